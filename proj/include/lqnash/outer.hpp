#pragma once

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lqnash/diagnostics.hpp"
#include "lqnash/game.hpp"
#include "lqnash/inner.hpp"
#include "lqnash/log.hpp"

namespace lqnash {

enum class OuterMethod { natural_gradient, quasi_newton };
enum class Leader { player_l, player_k };

inline const char* to_string(OuterMethod m) {
  return m == OuterMethod::natural_gradient ? "ng" : "qn";
}
inline const char* to_string(Leader l) {
  return l == Leader::player_l ? "L" : "K";
}

struct OuterOptions {
  double tol = 1e-8;
  int max_outer = 500;
  int max_inner = 10000;
  InnerMethod inner_method = InnerMethod::quasi_newton;
  double inner_tol = 1e-10;
  // Theorem stepsize 1/(2 lambda_n(O)); the aggressive flag moves to
  // 0.95/lambda_n(O), inside the key lemma's admissible range but strictly
  // below its endpoint where the progress term 4 eta - 4 eta^2 lambda_n
  // degenerates to zero.
  bool aggressive_stepsize = false;
};

/// One outer round: the leader gain after round j, the follower's exact
/// response, and the certified per-round quantities the convergence
/// theorems speak about.
struct OuterRecord {
  int j = 0;
  Matrix leader_gain;
  Matrix follower_gain;
  SymMatrix X;
  double cost = 0.0;
  double ng_norm = 0.0;       // ||N_g||_F = ||2V||_F (resp. ||2U||_F for leader K)
  double eta = 0.0;           // stepsize that produced this round's leader gain
  double rho = 0.0;
  double lambda_min_O = 0.0;
  double wall_ms = 0.0;
};

struct OuterTrace {
  Leader leader = Leader::player_l;
  std::vector<OuterRecord> records;
  std::vector<InnerReport> inner_reports;
  bool detectability_warning = false;
};

enum class solve_status { converged, max_iterations, inner_failure };

inline const char* to_string(solve_status s) {
  switch (s) {
    case solve_status::converged: return "converged";
    case solve_status::max_iterations: return "max_iterations";
    case solve_status::inner_failure: return "inner_failure";
  }
  return "?";
}

struct NashSolution {
  Matrix K_star;
  Matrix L_star;
  SymMatrix X_star;
  NashCertificate certificate;
  OuterTrace trace;
  solve_status status = solve_status::max_iterations;
  std::string detail;

  bool converged() const { return status == solve_status::converged; }
};

/// Validated initialization context for the L-leader algorithms.
struct InitContextL {
  SymMatrix X_plus;
  Matrix K0;
  bool detectability_warning = false;
};

namespace detail {

inline double ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

inline InnerReport follower_solve(const GameInstance& g, const Matrix& l,
                                  const Matrix& warm, InnerMethod method,
                                  double tol, int max_iter) {
  Matrix m0 = warm;
  if (spectral_radius(g.A - g.B2 * l - g.B1 * m0) >= 1.0) {
    m0 = bootstrap_stabilizing_gain(g.A - g.B2 * l, g.B1);
  }
  return inner_solve(g, l, method, m0, tol, max_iter);
}

inline InnerReport maximizer_solve(const GameInstance& g, const Matrix& k,
                                   const Matrix& warm, InnerMethod method,
                                   double tol, int max_iter) {
  Matrix l0 = warm;
  if (spectral_radius(g.A - g.B1 * k - g.B2 * l0) >= 1.0) {
    l0 = bootstrap_stabilizing_gain(g.A - g.B1 * k, g.B2);
  }
  return argmax_L(g, k, method, l0, tol, max_iter);
}

}  // namespace detail

/// Checks that L0 initializes the leader loop: (A - B2 L0, B1) stabilizable,
/// the follower DARE at L0 has a stabilizing solution X+, and
/// R1 + B1' X+ B1 > 0. Each failed check raises a distinctly named error.
inline InitContextL validate_init_L(const GameInstance& g, const Matrix& l0,
                                    const OuterOptions& opts = {}) {
  if (l0.rows() != g.m2() || l0.cols() != g.n()) {
    throw dimension_error("validate_init_L: L0 must be m2 x n");
  }
  const Matrix a_open = g.A - g.B2 * l0;
  if (!is_stabilizable(a_open, g.B1)) {
    throw init_error(init_check::stabilizability,
                     "(A - B2 L0, B1) is not stabilizable");
  }
  InnerReport rep;
  try {
    const Matrix m_boot = bootstrap_stabilizing_gain(a_open, g.B1);
    rep = inner_solve(g, l0, InnerMethod::quasi_newton, m_boot,
                      std::min(opts.inner_tol, 1e-10), opts.max_inner);
  } catch (const invariant_violation& e) {
    throw init_error(init_check::dare_solvable, e.what());
  }
  if (!rep.converged()) {
    if (rep.status == inner_status::curvature_loss) {
      throw init_error(init_check::curvature, rep.detail);
    }
    throw init_error(init_check::dare_solvable, rep.detail);
  }
  const SymMatrix e_plus(symmetrized(
      g.R1.mat() + g.B1.transpose() * rep.X_plus.mat() * g.B1));
  if (!is_positive_definite(e_plus, 0.0)) {
    throw init_error(init_check::curvature,
                     "R1 + B1' X+ B1 is not positive definite at L0");
  }
  InitContextL ctx{rep.X_plus, rep.K_opt, false};
  const SymMatrix q_eff(
      symmetrized(g.Q.mat() - l0.transpose() * g.R2.mat() * l0));
  ctx.detectability_warning = !is_detectable(q_eff.mat(), a_open);
  return ctx;
}

namespace detail {

inline NashSolution outer_drive_l(const GameInstance& g, const Matrix& l0,
                                  OuterMethod method, const OuterOptions& opts) {
  const InitContextL ctx = validate_init_L(g, l0, opts);
  if (ctx.detectability_warning) {
    log_info("(Q - L0' R2 L0, A - B2 L0) is not detectable; proceeding");
  }

  NashSolution sol;
  sol.trace.leader = Leader::player_l;
  sol.trace.detectability_warning = ctx.detectability_warning;

  Matrix l = l0;
  Matrix k = ctx.K0;
  SymMatrix x = ctx.X_plus;
  double eta_used = 0.0;

  for (int j = 0; j <= opts.max_outer; ++j) {
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix a_cl = g.A - g.B1 * k - g.B2 * l;
    const double rho = spectral_radius(a_cl);
    const Matrix v = -(g.R2.mat() * l) - g.B2.transpose() * x.mat() * a_cl;
    const double ng_norm = 2.0 * v.norm();
    const SymMatrix o = o_matrix(g, x);
    const auto [o_min, o_max] = sym_eigen_bounds(o);

    OuterRecord rec;
    rec.j = j;
    rec.leader_gain = l;
    rec.follower_gain = k;
    rec.X = x;
    rec.cost = (x.mat() * g.Sigma.mat()).trace();
    rec.ng_norm = ng_norm;
    rec.eta = eta_used;
    rec.rho = rho;
    rec.lambda_min_O = o_min;

    if (rho >= 1.0) {
      throw invariant_violation("outer iterate left the stabilizing set");
    }
    if (!(o_min > 0.0)) {
      std::ostringstream os;
      os << "outer round " << j << ": lambda_min(O) = " << o_min
         << " is not positive";
      throw invariant_violation(os.str());
    }
    if (j > 0) {
      const double drop = lambda_min(
          SymMatrix(symmetrized(x.mat() - sol.trace.records.back().X.mat())));
      if (drop < -1e-10) {
        std::ostringstream os;
        os << "outer round " << j << ": value matrix lost monotonicity, "
           << "lambda_min(X_j - X_{j-1}) = " << drop;
        throw invariant_violation(os.str());
      }
    }
    rec.wall_ms = ms_since(t0);
    sol.trace.records.push_back(rec);

    if (ng_norm <= opts.tol) {
      sol.status = solve_status::converged;
      break;
    }
    if (j == opts.max_outer) {
      sol.status = solve_status::max_iterations;
      std::ostringstream os;
      os << "no convergence in " << opts.max_outer << " rounds (||N_g|| = "
         << ng_norm << ")";
      sol.detail = os.str();
      break;
    }

    if (method == OuterMethod::natural_gradient) {
      eta_used = opts.aggressive_stepsize ? 0.95 / o_max : 1.0 / (2.0 * o_max);
      l = l + eta_used * 2.0 * v;
    } else {
      eta_used = 0.5;
      l = l + eta_used * detail::guarded_solve(o.mat(), 2.0 * v, "qn outer step");
    }

    // Follower error must not dominate leader progress; floor guards the
    // last rounds where ||N_g|| sits near machine precision.
    const double inner_tol =
        std::max(std::min(opts.inner_tol, 1e-2 * ng_norm), 1e-13);
    InnerReport inner = follower_solve(g, l, k, opts.inner_method, inner_tol,
                                       opts.max_inner);
    sol.trace.inner_reports.push_back(inner);
    if (!inner.converged()) {
      sol.status = solve_status::inner_failure;
      std::ostringstream os;
      os << "follower oracle failed at round " << (j + 1) << ": " << inner.detail;
      sol.detail = os.str();
      break;
    }
    k = inner.K_opt;
    x = inner.X_plus;
    std::ostringstream os;
    os << "round " << j + 1 << ": cost " << (x.mat() * g.Sigma.mat()).trace()
       << ", ||N_g|| " << ng_norm << ", eta " << eta_used;
    log_debug(os.str());
  }

  sol.K_star = k;
  sol.L_star = l;
  sol.X_star = x;
  sol.certificate = nash_certificate(g, k, l, 10.0 * opts.tol);
  return sol;
}

}  // namespace detail

/// Algorithm: natural-gradient leader on L with the follower solved exactly
/// each round. Stepsize 1/(2 lambda_n(O_{j-1})); stops on ||2V||_F <= tol.
inline NashSolution ng_outer(const GameInstance& g, const Matrix& l0,
                             const OuterOptions& opts = {}) {
  return detail::outer_drive_l(g, l0, OuterMethod::natural_gradient, opts);
}

/// Algorithm: quasi-Newton leader on L, update L + O^{-1} V (eta = 1/2).
inline NashSolution qn_outer(const GameInstance& g, const Matrix& l0,
                             const OuterOptions& opts = {}) {
  return detail::outer_drive_l(g, l0, OuterMethod::quasi_newton, opts);
}

/// Natural-gradient leader on K; the maximizer responds exactly each round
/// through the sign-flipped Riccati subproblem. Curvature
/// O = R1 + B1'X B1 + B1'X B2 (R2 - B2'X B2)^{-1} B2'X B1.
inline NashSolution ng_outer_leader_k(const GameInstance& g, const Matrix& k0,
                                      const OuterOptions& opts = {}) {
  if (k0.rows() != g.m1() || k0.cols() != g.n()) {
    throw dimension_error("ng_outer_leader_k: K0 must be m1 x n");
  }
  const Matrix a_open0 = g.A - g.B1 * k0;
  if (!is_stabilizable(a_open0, g.B2)) {
    throw init_error(init_check::stabilizability,
                     "(A - B1 K0, B2) is not stabilizable");
  }
  InnerReport first;
  try {
    const Matrix l_boot = bootstrap_stabilizing_gain(a_open0, g.B2);
    first = argmax_L(g, k0, InnerMethod::quasi_newton, l_boot,
                     std::min(opts.inner_tol, 1e-10), opts.max_inner);
  } catch (const invariant_violation& e) {
    throw init_error(init_check::dare_solvable, e.what());
  }
  if (!first.converged()) {
    if (first.status == inner_status::curvature_loss) {
      throw init_error(init_check::curvature, first.detail);
    }
    throw init_error(init_check::dare_solvable, first.detail);
  }

  NashSolution sol;
  sol.trace.leader = Leader::player_k;
  Matrix k = k0;
  Matrix l = first.K_opt;
  SymMatrix x = first.X_plus;
  double eta_used = 0.0;

  for (int j = 0; j <= opts.max_outer; ++j) {
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix a_cl = g.A - g.B1 * k - g.B2 * l;
    const double rho = spectral_radius(a_cl);
    const Matrix u = g.R1.mat() * k - g.B1.transpose() * x.mat() * a_cl;
    const double ng_norm = 2.0 * u.norm();

    const Matrix d2 =
        symmetrized(g.R2.mat() - g.B2.transpose() * x.mat() * g.B2);
    if (!is_positive_definite(SymMatrix(d2), 0.0)) {
      throw invariant_violation("leader-K round: R2 - B2' X B2 lost definiteness");
    }
    const Matrix cross = g.B2.transpose() * x.mat() * g.B1;
    const SymMatrix o(symmetrized(
        g.R1.mat() + g.B1.transpose() * x.mat() * g.B1 +
        cross.transpose() * detail::guarded_solve(d2, cross, "leader-K curvature")));
    const auto [o_min, o_max] = sym_eigen_bounds(o);

    OuterRecord rec;
    rec.j = j;
    rec.leader_gain = k;
    rec.follower_gain = l;
    rec.X = x;
    rec.cost = (x.mat() * g.Sigma.mat()).trace();
    rec.ng_norm = ng_norm;
    rec.eta = eta_used;
    rec.rho = rho;
    rec.lambda_min_O = o_min;

    if (rho >= 1.0) {
      throw invariant_violation("outer iterate left the stabilizing set");
    }
    if (!(o_min > 0.0)) {
      throw invariant_violation("leader-K round: lambda_min(O) is not positive");
    }
    if (j > 0) {
      // Mirror of the L-leader monotonicity: the leader descends, X decreases.
      const double drop = lambda_min(
          SymMatrix(symmetrized(sol.trace.records.back().X.mat() - x.mat())));
      if (drop < -1e-10) {
        throw invariant_violation("leader-K round: value matrix lost monotonicity");
      }
    }
    rec.wall_ms = detail::ms_since(t0);
    sol.trace.records.push_back(rec);

    if (ng_norm <= opts.tol) {
      sol.status = solve_status::converged;
      break;
    }
    if (j == opts.max_outer) {
      sol.status = solve_status::max_iterations;
      sol.detail = "no convergence within the round cap";
      break;
    }

    eta_used = opts.aggressive_stepsize ? 0.95 / o_max : 1.0 / (2.0 * o_max);
    k = k - eta_used * 2.0 * u;

    const double inner_tol =
        std::max(std::min(opts.inner_tol, 1e-2 * ng_norm), 1e-13);
    InnerReport inner =
        detail::maximizer_solve(g, k, l, opts.inner_method, inner_tol,
                                opts.max_inner);
    sol.trace.inner_reports.push_back(inner);
    if (!inner.converged()) {
      sol.status = solve_status::inner_failure;
      std::ostringstream os;
      os << "maximizer oracle failed at round " << (j + 1) << ": "
         << inner.detail;
      sol.detail = os.str();
      break;
    }
    l = inner.K_opt;
    x = inner.X_plus;
  }

  sol.K_star = k;
  sol.L_star = l;
  sol.X_star = x;
  sol.certificate = nash_certificate(g, k, l, 10.0 * opts.tol);
  return sol;
}

enum class init_policy { zero, bootstrap, explicit_gain };

struct SolveOptions : OuterOptions {
  OuterMethod method = OuterMethod::quasi_newton;
  Leader leader = Leader::player_l;
  init_policy init = init_policy::zero;
  Matrix init_gain;  // used when init == explicit_gain
  std::uint64_t seed = 0;
};

/// Dispatch to the three drivers with the configured initialization. A zero
/// initialization that fails validation is retried once from a bootstrap
/// stabilizing gain.
inline NashSolution solve_nash(const GameInstance& g, const SolveOptions& opts) {
  if (opts.method == OuterMethod::quasi_newton && opts.leader == Leader::player_k) {
    throw value_error("solve_nash: quasi-Newton with leader K is not supported");
  }
  const Eigen::Index rows = opts.leader == Leader::player_l ? g.m2() : g.m1();
  auto initial_gain = [&](bool bootstrap) -> Matrix {
    if (opts.init == init_policy::explicit_gain && !bootstrap) {
      return opts.init_gain;
    }
    if (bootstrap || opts.init == init_policy::bootstrap) {
      return opts.leader == Leader::player_l
                 ? bootstrap_stabilizing_gain(g.A, g.B2)
                 : bootstrap_stabilizing_gain(g.A, g.B1);
    }
    return Matrix::Zero(rows, g.n());
  };
  auto run = [&](const Matrix& gain) {
    if (opts.leader == Leader::player_k) return ng_outer_leader_k(g, gain, opts);
    return opts.method == OuterMethod::natural_gradient ? ng_outer(g, gain, opts)
                                                        : qn_outer(g, gain, opts);
  };
  try {
    return run(initial_gain(false));
  } catch (const init_error& e) {
    if (opts.init != init_policy::zero) throw;
    log_info(std::string("zero initialization rejected (") + e.what() +
             "); retrying from a bootstrap gain");
    try {
      NashSolution sol = run(initial_gain(true));
      sol.detail += (sol.detail.empty() ? "" : "; ");
      sol.detail += "zero init failed validation; used bootstrap gain";
      return sol;
    } catch (const invariant_violation&) {
      throw;
    } catch (const error&) {
      throw e;  // the zero-init diagnosis is the actionable one
    }
  }
}

}  // namespace lqnash
