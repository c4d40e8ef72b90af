// lqnash: solve, verify, generate and rate-profile zero-sum LQ dynamic games.
//
// Exit codes: 0 success (certificate passes), 2 parse/validation error,
// 3 invalid initialization, 4 non-convergence (trace still written),
// 5 invariant violation (bug signal).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lqnash/lqnash.hpp"

namespace {

using namespace lqnash;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitParse = 2;
constexpr int kExitInit = 3;
constexpr int kExitNonConvergence = 4;
constexpr int kExitInvariant = 5;

struct RunConfigCli {
  std::string method = "qn";
  std::string leader = "L";
  std::string init = "zero";
  std::string init_matrix_path;
  double tol = 1e-8;
  int max_outer = 500;
  int max_inner = 10000;
  std::string inner_method = "qn";
  bool aggressive = false;
  std::uint64_t seed = 0;
};

SolveOptions to_solve_options(const RunConfigCli& c, const GameInstance& g) {
  SolveOptions opts;
  if (c.method == "ng") {
    opts.method = OuterMethod::natural_gradient;
  } else if (c.method == "qn") {
    opts.method = OuterMethod::quasi_newton;
  } else {
    throw value_error("config.method: expected \"ng\" or \"qn\"");
  }
  if (c.leader == "L") {
    opts.leader = Leader::player_l;
  } else if (c.leader == "K") {
    opts.leader = Leader::player_k;
  } else {
    throw value_error("config.leader: expected \"L\" or \"K\"");
  }
  if (opts.method == OuterMethod::quasi_newton && opts.leader == Leader::player_k) {
    throw value_error("config: quasi-Newton with leader K is not supported");
  }
  if (c.init == "zero") {
    opts.init = init_policy::zero;
  } else if (c.init == "bootstrap") {
    opts.init = init_policy::bootstrap;
  } else if (c.init == "matrix") {
    opts.init = init_policy::explicit_gain;
    if (c.init_matrix_path.empty()) {
      throw value_error("config.init: \"matrix\" needs --init-matrix FILE");
    }
    const json j = read_json_file(c.init_matrix_path);
    const Eigen::Index rows = opts.leader == Leader::player_l ? g.m2() : g.m1();
    opts.init_gain = matrix_from_json(j, rows, g.n(), "init matrix");
  } else {
    throw value_error("config.init: expected \"zero\", \"bootstrap\" or \"matrix\"");
  }
  if (c.inner_method == "gradient") {
    opts.inner_method = InnerMethod::gradient;
  } else if (c.inner_method == "ng") {
    opts.inner_method = InnerMethod::natural_gradient;
  } else if (c.inner_method == "qn") {
    opts.inner_method = InnerMethod::quasi_newton;
  } else {
    throw value_error("config.inner_method: expected \"gradient\", \"ng\" or \"qn\"");
  }
  if (c.tol <= 0.0) throw value_error("config.tol: must be positive");
  if (c.max_outer < 1 || c.max_inner < 1) {
    throw value_error("config: iteration caps must be >= 1");
  }
  opts.tol = c.tol;
  opts.max_outer = c.max_outer;
  opts.max_inner = c.max_inner;
  opts.aggressive_stepsize = c.aggressive;
  opts.seed = c.seed;
  return opts;
}

void apply_config_file(const std::string& path, RunConfigCli& c) {
  const json j = read_json_file(path);
  if (!j.is_object()) throw value_error(path + ": expected a JSON object");
  if (j.contains("method")) c.method = j["method"].get<std::string>();
  if (j.contains("leader")) c.leader = j["leader"].get<std::string>();
  if (j.contains("init")) c.init = j["init"].get<std::string>();
  if (j.contains("tol")) c.tol = j["tol"].get<double>();
  if (j.contains("max_outer")) c.max_outer = j["max_outer"].get<int>();
  if (j.contains("max_inner")) c.max_inner = j["max_inner"].get<int>();
  if (j.contains("inner_method")) c.inner_method = j["inner_method"].get<std::string>();
  if (j.contains("aggressive_stepsize")) c.aggressive = j["aggressive_stepsize"].get<bool>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
}

int cmd_solve(const std::string& instance_path, const RunConfigCli& cfg,
              const std::string& solution_path, const std::string& trace_path) {
  std::optional<GameInstance> g;
  std::optional<SolveOptions> opts;
  try {
    g.emplace(instance_from_json(read_json_file(instance_path)));
    opts = to_solve_options(cfg, *g);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  try {
    const NashSolution sol = solve_nash(*g, *opts);
    write_file_atomic(trace_path, trace_to_csv(sol.trace));
    write_file_atomic(solution_path, solution_to_json(sol).dump(2) + "\n");
    std::cout << solution_to_json(sol)["certificate"].dump(2) << "\n";
    if (!sol.converged()) {
      std::cerr << "non-convergence: " << sol.detail << "\n";
      return kExitNonConvergence;
    }
    if (!sol.certificate.pass) {
      std::cerr << "converged but the certificate does not pass\n";
      return kExitNonConvergence;
    }
    return kExitOk;
  } catch (const init_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInit;
  } catch (const invariant_violation& e) {
    std::cerr << "invariant violation (bug signal): " << e.what() << "\n";
    return kExitInvariant;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_verify(const std::string& instance_path, const std::string& policy_path,
               double tol) {
  std::optional<GameInstance> g;
  std::optional<PolicyPair> p;
  try {
    g.emplace(instance_from_json(read_json_file(instance_path)));
    p.emplace(policy_from_json(read_json_file(policy_path), *g));
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  const NashCertificate cert = nash_certificate(*g, p->K, p->L, tol);
  std::cout << certificate_to_json(cert).dump(2) << "\n";
  return cert.pass ? kExitOk : kExitFailure;
}

int cmd_generate(int n, int m1, int m2, std::uint64_t seed, bool indefinite,
                 const std::string& preset, const std::string& out_path) {
  try {
    std::optional<GameInstance> g;
    if (!preset.empty()) {
      if (preset != "g1") throw value_error("unknown --scalar-preset (try g1)");
      g.emplace(g1_preset());
    } else if (indefinite) {
      auto maybe = indefinite_at_ne_instance(n, m1, m2, seed);
      if (!maybe.has_value()) {
        std::cerr << "generation failed: no indefinite-at-equilibrium instance "
                     "within 100 draws\n";
        return kExitNonConvergence;
      }
      g = std::move(maybe);
    } else {
      g.emplace(random_instance(n, m1, m2, seed));
    }
    write_file_atomic(out_path, instance_to_json(*g).dump(2) + "\n");
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
}

struct RateFit {
  bool converged = false;
  double tail_slope = std::numeric_limits<double>::quiet_NaN();
  double quadratic_q = std::numeric_limits<double>::quiet_NaN();
  bool linear = false;
  bool quadratic = false;
};

RateFit fit_rates(const NashSolution& sol) {
  RateFit fit;
  fit.converged = sol.converged();
  if (!fit.converged || sol.trace.records.size() < 3) return fit;
  const double g_star = sol.trace.records.back().cost;
  const bool descending = sol.trace.leader == Leader::player_k;
  std::vector<double> err;
  for (const OuterRecord& r : sol.trace.records) {
    err.push_back(descending ? r.cost - g_star : g_star - r.cost);
  }
  // Trailing log-linear slope over the positive tail; superlinear runs can
  // leave the tail half empty, in which case fit over every positive point.
  std::vector<std::pair<double, double>> pts;
  for (size_t j = err.size() / 2; j < err.size(); ++j) {
    if (err[j] > 1e-15) pts.push_back({static_cast<double>(j), std::log10(err[j])});
  }
  if (pts.size() < 2) {
    pts.clear();
    for (size_t j = 0; j < err.size(); ++j) {
      if (err[j] > 1e-15) pts.push_back({static_cast<double>(j), std::log10(err[j])});
    }
  }
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double nn = static_cast<double>(pts.size());
    fit.tail_slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    fit.linear = fit.tail_slope < 0.0;
  }
  // Quadratic coefficient from the first qualifying pair; the flag holds if
  // the remaining pairs satisfy it with a x10 slack.
  bool have_q = false;
  bool ok = true;
  for (size_t j = 1; j < err.size(); ++j) {
    if (err[j - 1] < 1e-2 && err[j - 1] > 1e-14 && err[j] > 1e-15) {
      const double q = err[j] / (err[j - 1] * err[j - 1]);
      if (!have_q) {
        fit.quadratic_q = q;
        have_q = true;
      } else if (err[j] > 10.0 * fit.quadratic_q * err[j - 1] * err[j - 1]) {
        ok = false;
      }
    }
  }
  fit.quadratic = have_q && ok;
  return fit;
}

int cmd_rates(const std::string& instance_path, const std::string& methods_csv,
              const RunConfigCli& cfg, const std::string& out_path) {
  std::optional<GameInstance> g;
  try {
    g.emplace(instance_from_json(read_json_file(instance_path)));
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  std::vector<std::string> methods;
  {
    std::stringstream ss(methods_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) methods.push_back(item);
    }
  }
  if (methods.empty()) {
    std::cerr << "error: --methods must name at least one of ng,qn\n";
    return kExitParse;
  }

  std::ostringstream csv;
  csv << "method,j,cost,err,ng_norm\n";
  csv.precision(17);
  json summary = json::object();
  bool all_converged = true;
  for (const std::string& m : methods) {
    RunConfigCli local = cfg;
    local.method = m;
    std::optional<SolveOptions> opts;
    try {
      opts = to_solve_options(local, *g);
    } catch (const error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitParse;
    }
    try {
      const NashSolution sol = solve_nash(*g, *opts);
      const RateFit fit = fit_rates(sol);
      const double g_star = sol.trace.records.back().cost;
      const bool descending = sol.trace.leader == Leader::player_k;
      for (const OuterRecord& r : sol.trace.records) {
        const double err = descending ? r.cost - g_star : g_star - r.cost;
        csv << m << ',' << r.j << ',' << r.cost << ',' << err << ','
            << r.ng_norm << "\n";
      }
      json entry;
      entry["converged"] = fit.converged;
      entry["tail_slope"] = fit.converged && std::isfinite(fit.tail_slope)
                                ? json(fit.tail_slope)
                                : json(nullptr);
      entry["linear"] = fit.converged ? json(fit.linear) : json(nullptr);
      entry["quadratic_q"] = fit.converged && std::isfinite(fit.quadratic_q)
                                 ? json(fit.quadratic_q)
                                 : json(nullptr);
      entry["quadratic"] = fit.converged ? json(fit.quadratic) : json(nullptr);
      summary[m] = entry;
      all_converged = all_converged && sol.converged();
    } catch (const init_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitInit;
    } catch (const invariant_violation& e) {
      std::cerr << "invariant violation (bug signal): " << e.what() << "\n";
      return kExitInvariant;
    }
  }
  write_file_atomic(out_path, csv.str());
  std::cout << summary.dump(2) << "\n";
  return all_converged ? kExitOk : kExitNonConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilizing Nash equilibria of zero-sum LQ dynamic games via "
               "projection-free sequential policy gradients"};
  app.require_subcommand(1);

  RunConfigCli cfg;
  std::string instance_path, config_path, solution_path = "solution.json";
  std::string trace_path = "trace.csv";

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "RunConfig JSON file");
    cmd->add_option("--method", cfg.method, "Outer method: ng | qn");
    cmd->add_option("--leader", cfg.leader, "Leader player: L | K");
    cmd->add_option("--init", cfg.init, "Initialization: zero | bootstrap | matrix");
    cmd->add_option("--init-matrix", cfg.init_matrix_path,
                    "JSON file with the explicit initial gain");
    cmd->add_option("--tol", cfg.tol, "Outer tolerance on ||N_g||_F");
    cmd->add_option("--max-outer", cfg.max_outer, "Outer round cap");
    cmd->add_option("--max-inner", cfg.max_inner, "Inner iteration cap");
    cmd->add_option("--inner-method", cfg.inner_method,
                    "Follower oracle: gradient | ng | qn");
    cmd->add_flag("--aggressive-stepsize", cfg.aggressive,
                  "Use the larger in-range leader stepsize");
    cmd->add_option("--seed", cfg.seed, "Seed recorded in the run config");
  };

  CLI::App* solve = app.add_subcommand("solve", "Solve an instance file");
  solve->add_option("instance", instance_path, "Instance JSON")->required();
  solve->add_option("--solution", solution_path, "Solution output path");
  solve->add_option("--trace", trace_path, "Trace CSV output path");
  add_config_flags(solve);

  std::string policy_path;
  double verify_tol = 1e-8;
  CLI::App* verify = app.add_subcommand("verify", "Certify a policy pair");
  verify->add_option("instance", instance_path, "Instance JSON")->required();
  verify->add_option("policy", policy_path, "Policy JSON with fields K, L")
      ->required();
  verify->add_option("--tol", verify_tol, "Certificate tolerance");

  int n = 4, m1 = 2, m2 = 2;
  std::uint64_t gen_seed = 0;
  bool indefinite = false;
  std::string preset, out_path = "instance.json";
  CLI::App* generate = app.add_subcommand("generate", "Emit an instance file");
  generate->add_option("--n", n, "State dimension");
  generate->add_option("--m1", m1, "Minimizer input dimension");
  generate->add_option("--m2", m2, "Maximizer input dimension");
  generate->add_option("--seed", gen_seed, "Generator seed");
  generate->add_flag("--indefinite-at-ne", indefinite,
                     "Require Q - L*' R2 L* indefinite at the equilibrium");
  generate->add_option("--scalar-preset", preset, "Named preset (g1)");
  generate->add_option("--out", out_path, "Output path");

  std::string methods_csv = "ng,qn";
  std::string rates_out = "rates.csv";
  CLI::App* rates = app.add_subcommand(
      "rates", "Run methods and emit convergence-rate data");
  rates->add_option("instance", instance_path, "Instance JSON")->required();
  rates->add_option("--methods", methods_csv, "Comma list of ng,qn");
  rates->add_option("--out", rates_out, "Per-iteration CSV path");
  add_config_flags(rates);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) apply_config_file(config_path, cfg);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }

  if (solve->parsed()) return cmd_solve(instance_path, cfg, solution_path, trace_path);
  if (verify->parsed()) return cmd_verify(instance_path, policy_path, verify_tol);
  if (generate->parsed()) {
    return cmd_generate(n, m1, m2, gen_seed, indefinite, preset, out_path);
  }
  if (rates->parsed()) return cmd_rates(instance_path, methods_csv, cfg, rates_out);
  return kExitFailure;
}
