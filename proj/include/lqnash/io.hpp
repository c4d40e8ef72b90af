#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lqnash/game.hpp"
#include "lqnash/outer.hpp"

namespace lqnash {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows,
                               Eigen::Index cols, const std::string& field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw value_error(field + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw value_error(field + ": row " + std::to_string(i) + " must have " +
                        std::to_string(cols) + " entries");
    }
    for (Eigen::Index jj = 0; jj < cols; ++jj) {
      if (!row[jj].is_number()) {
        throw value_error(field + ": entry (" + std::to_string(i) + "," +
                          std::to_string(jj) + ") is not a finite number");
      }
      m(i, jj) = row[jj].get<double>();
    }
  }
  if (!m.allFinite()) throw value_error(field + ": non-finite entries");
  return m;
}

/// Instance file schema v1:
/// {"v":1, "n":.., "m1":.., "m2":.., "A":[[..]], "B1":.., "B2":..,
///  "Q":.., "R1":.., "R2":.., "Sigma":..}
inline json instance_to_json(const GameInstance& g) {
  json j;
  j["v"] = 1;
  j["n"] = g.n();
  j["m1"] = g.m1();
  j["m2"] = g.m2();
  j["A"] = matrix_to_json(g.A);
  j["B1"] = matrix_to_json(g.B1);
  j["B2"] = matrix_to_json(g.B2);
  j["Q"] = matrix_to_json(g.Q.mat());
  j["R1"] = matrix_to_json(g.R1.mat());
  j["R2"] = matrix_to_json(g.R2.mat());
  j["Sigma"] = matrix_to_json(g.Sigma.mat());
  return j;
}

inline GameInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw value_error("instance: expected a JSON object");
  if (!j.contains("v") || j["v"] != 1) {
    throw value_error("instance.v: unsupported schema version (want 1)");
  }
  for (const char* f : {"n", "m1", "m2", "A", "B1", "B2", "Q", "R1", "R2", "Sigma"}) {
    if (!j.contains(f)) throw value_error(std::string("instance.") + f + ": missing");
  }
  const Eigen::Index n = j["n"].get<Eigen::Index>();
  const Eigen::Index m1 = j["m1"].get<Eigen::Index>();
  const Eigen::Index m2 = j["m2"].get<Eigen::Index>();
  if (n < 1 || m1 < 1 || m2 < 1) {
    throw value_error("instance: n, m1, m2 must be >= 1");
  }
  auto sym = [&](const char* f, Eigen::Index d) {
    try {
      return SymMatrix(matrix_from_json(j[f], d, d, std::string("instance.") + f));
    } catch (const value_error& e) {
      throw value_error(std::string("instance.") + f + ": " + e.what());
    }
  };
  return GameInstance(matrix_from_json(j["A"], n, n, "instance.A"),
                      matrix_from_json(j["B1"], n, m1, "instance.B1"),
                      matrix_from_json(j["B2"], n, m2, "instance.B2"),
                      sym("Q", n), sym("R1", m1), sym("R2", m2),
                      sym("Sigma", n));
}

inline json certificate_to_json(const NashCertificate& c) {
  json j;
  j["stationarity_K"] = c.stationarity_K;
  j["stationarity_L"] = c.stationarity_L;
  j["rho"] = c.rho;
  j["gare_norm"] = c.gare_norm;
  j["assumption"] = to_string(c.assumption);
  j["pass"] = c.pass;
  return j;
}

inline json solution_to_json(const NashSolution& sol) {
  json j;
  j["K_star"] = matrix_to_json(sol.K_star);
  j["L_star"] = matrix_to_json(sol.L_star);
  j["X_star"] = matrix_to_json(sol.X_star.mat());
  j["certificate"] = certificate_to_json(sol.certificate);
  j["status"] = to_string(sol.status);
  if (!sol.detail.empty()) j["detail"] = sol.detail;
  return j;
}

inline PolicyPair policy_from_json(const json& j, const GameInstance& g) {
  if (!j.is_object() || !j.contains("K") || !j.contains("L")) {
    throw value_error("policy: expected an object with fields K and L");
  }
  return PolicyPair(matrix_from_json(j["K"], g.m1(), g.n(), "policy.K"),
                    matrix_from_json(j["L"], g.m2(), g.n(), "policy.L"));
}

inline std::string trace_to_csv(const OuterTrace& trace) {
  std::ostringstream os;
  os << "j,cost,ng_norm,eta,rho,lambda_min_O,wall_ms\n";
  os.precision(17);
  for (const OuterRecord& r : trace.records) {
    os << r.j << ',' << r.cost << ',' << r.ng_norm << ',' << r.eta << ','
       << r.rho << ',' << r.lambda_min_O << ',' << r.wall_ms << "\n";
  }
  return os.str();
}

/// Atomic file write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::string& path,
                              const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out.flush()) throw error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw value_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw value_error(path + ": " + e.what());
  }
}

}  // namespace lqnash
