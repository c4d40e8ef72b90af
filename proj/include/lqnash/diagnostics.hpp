#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "lqnash/game.hpp"
#include "lqnash/inner.hpp"

namespace lqnash {

/// First-order, stability, GARE and curvature evidence that (K, L) is a
/// stabilizing Nash equilibrium to tolerance.
struct NashCertificate {
  double stationarity_K = std::numeric_limits<double>::infinity();  // ||U||_F
  double stationarity_L = std::numeric_limits<double>::infinity();  // ||V||_F
  double rho = std::numeric_limits<double>::infinity();
  double gare_norm = std::numeric_limits<double>::infinity();
  assumption_case assumption = assumption_case::neither;
  bool pass = false;
};

inline NashCertificate nash_certificate(const GameInstance& g, const Matrix& k,
                                        const Matrix& l, double tol) {
  NashCertificate cert;
  const PolicyPair p(k, l);
  cert.rho = spectral_radius(closed_loop(g, p));
  if (cert.rho >= 1.0) return cert;
  const ValueCertificate vc = value_certificate(g, p);
  const GradientBundle gb = gradient_bundle(g, p, vc);
  cert.stationarity_K = gb.U.norm();
  cert.stationarity_L = gb.V.norm();
  try {
    cert.gare_norm = gare_residual(g, vc.X).mat().norm();
    cert.assumption = check_assumption(g, vc.X);
  } catch (const singularity_error&) {
    return cert;  // blocked curvature: fields stay at their failing defaults
  }
  cert.pass = cert.stationarity_K <= tol && cert.stationarity_L <= tol &&
              cert.rho < 1.0 && cert.gare_norm <= tol &&
              cert.assumption != assumption_case::neither;
  return cert;
}

enum class comparison_form { a, b };

/// Residual of the value-difference identity between two admissible pairs
/// (an algebraic identity; any violation beyond roundoff is an
/// implementation bug). Form a anchors the gradient factors at p1, form b
/// at p2.
inline double comparison_residual(const GameInstance& g, const PolicyPair& p1,
                                  const PolicyPair& p2, comparison_form form) {
  const ValueCertificate c1 = value_certificate(g, p1);
  const ValueCertificate c2 = value_certificate(g, p2);
  const Matrix a1 = closed_loop(g, p1);
  const Matrix a2 = closed_loop(g, p2);
  const Matrix dx = c1.X.mat() - c2.X.mat();
  const Matrix dk = p1.K - p2.K;
  const Matrix dl = p1.L - p2.L;
  const Matrix da = a1 - a2;
  Matrix rhs;
  if (form == comparison_form::a) {
    const GradientBundle gb = gradient_bundle(g, p1, c1);
    rhs = a2.transpose() * dx * a2 + dk.transpose() * gb.U +
          gb.U.transpose() * dk - dk.transpose() * g.R1.mat() * dk +
          dl.transpose() * gb.V + gb.V.transpose() * dl +
          dl.transpose() * g.R2.mat() * dl - da.transpose() * c1.X.mat() * da;
  } else {
    const GradientBundle gb = gradient_bundle(g, p2, c2);
    rhs = a1.transpose() * dx * a1 + dk.transpose() * gb.U +
          gb.U.transpose() * dk + dk.transpose() * g.R1.mat() * dk +
          dl.transpose() * gb.V + gb.V.transpose() * dl -
          dl.transpose() * g.R2.mat() * dl + da.transpose() * c2.X.mat() * da;
  }
  return (dx - rhs).norm();
}

/// Residuals of the two displayed identities relating the exact follower
/// responses at L and Lt: the value-difference decomposition through the
/// Riccati map, and the Riccati map's expansion in (L - Lt).
inline std::pair<double, double> comparison2_residual(const GameInstance& g,
                                                      const Matrix& l,
                                                      const Matrix& lt) {
  const int max_iter = 10000;
  const double tol = 1e-12;
  const Matrix m0 = bootstrap_stabilizing_gain(g.A - g.B2 * l, g.B1);
  const Matrix m0t = bootstrap_stabilizing_gain(g.A - g.B2 * lt, g.B1);
  const InnerReport ri =
      inner_solve(g, l, InnerMethod::quasi_newton, m0, tol, max_iter);
  const InnerReport rt =
      inner_solve(g, lt, InnerMethod::quasi_newton, m0t, tol, max_iter);
  if (!ri.converged() || !rt.converged()) {
    throw numerical_error("comparison2_residual: inner solve failed");
  }
  const Matrix& k = ri.K_opt;
  const Matrix& xt = rt.X_plus.mat();
  const Matrix a_open = g.A - g.B2 * l;
  const Matrix a_kl = a_open - g.B1 * k;

  const Matrix e = symmetrized(g.R1.mat() + g.B1.transpose() * xt * g.B1);
  const Matrix f = g.B1.transpose() * xt * a_open;
  const SymMatrix ric = riccati_map(
      a_open, g.B1,
      SymMatrix(symmetrized(g.Q.mat() - l.transpose() * g.R2.mat() * l)), g.R1,
      rt.X_plus);

  const Matrix ekf = e * k - f;
  const Matrix dx = ri.X_plus.mat() - xt;
  const double id1 =
      (dx - (a_kl.transpose() * dx * a_kl + ric.mat() +
             ekf.transpose() * detail::guarded_solve(e, ekf, "comparison2") ))
          .norm();

  const Matrix a_tilde = g.A - g.B1 * rt.K_opt - g.B2 * lt;
  const Matrix vt = -(g.R2.mat() * lt) - g.B2.transpose() * xt * a_tilde;
  const Matrix dl = l - lt;
  const SymMatrix o = o_matrix(g, rt.X_plus);
  const double id2 = (ric.mat() - (dl.transpose() * vt + vt.transpose() * dl -
                                   dl.transpose() * o.mat() * dl))
                         .norm();
  return {id1, id2};
}

/// Quadratic form <Hess g(L) E, E> of the leader's value function
/// g(L) = min_K f(K, L), at a point where the minimizer is unique. Built
/// from the Frechet derivatives of the maximal DARE solution, the follower
/// gain and the metric matrix; the infinite series are evaluated through
/// their equivalent Lyapunov equations.
inline double hessian_g_action(const GameInstance& g, const Matrix& l,
                               const Matrix& e) {
  if (e.rows() != g.m2() || e.cols() != g.n()) {
    throw dimension_error("hessian_g_action: E must be m2 x n");
  }
  const Matrix m0 = bootstrap_stabilizing_gain(g.A - g.B2 * l, g.B1);
  const InnerReport rep =
      inner_solve(g, l, InnerMethod::quasi_newton, m0, 1e-12, 10000);
  if (!rep.converged()) {
    throw degenerate_input_error(
        "hessian_g_action: no unique stabilizing minimizer at L; g is not "
        "differentiable here");
  }
  const Matrix& k0 = rep.K_opt;
  const Matrix& x0 = rep.X_plus.mat();
  const Matrix a0 = g.A - g.B1 * k0 - g.B2 * l;
  const SymMatrix y0 = solve_dual_lyapunov(a0, g.Sigma);
  const Matrix v0 = -(g.R2.mat() * l) - g.B2.transpose() * x0 * a0;

  // X0'(E): d/dt of the maximal solution along L + tE. The K-variation drops
  // out of the Lyapunov derivative through stationarity R1 K0 - B1' X0 A0 = 0.
  const SymMatrix xp = solve_discrete_lyapunov(
      a0, SymMatrix(symmetrized(e.transpose() * v0 + v0.transpose() * e)));
  const Matrix e0 = symmetrized(g.R1.mat() + g.B1.transpose() * x0 * g.B1);
  const Matrix kp = detail::guarded_solve(
      e0,
      g.B1.transpose() * xp.mat() * a0 - g.B1.transpose() * x0 * g.B2 * e,
      "hessian_g_action");
  const Matrix adot = -(g.B1 * kp) - g.B2 * e;
  const SymMatrix yp = solve_dual_lyapunov(
      a0, SymMatrix(symmetrized(adot * y0.mat() * a0.transpose() +
                                a0 * y0.mat() * adot.transpose())));
  const Matrix vp =
      -(g.R2.mat() * e) - g.B2.transpose() * xp.mat() * a0 - g.B2.transpose() * x0 * adot;
  return 2.0 * (e.transpose() * (vp * y0.mat() + v0 * yp.mat())).trace();
}

/// One curvature probe: the analytic quadratic form against the
/// second-order central difference of g along E.
struct HessianProbe {
  Matrix L;
  Matrix E;
  double value = 0.0;
  double fd_value = 0.0;
};

inline HessianProbe hessian_probe(const GameInstance& g, const Matrix& l,
                                  const Matrix& e, double step = 1e-4) {
  HessianProbe probe{l, e, hessian_g_action(g, l, e), 0.0};
  const Matrix m0 = bootstrap_stabilizing_gain(g.A - g.B2 * l, g.B1);
  auto g_of = [&](const Matrix& at) {
    const InnerReport rep =
        inner_solve(g, at, InnerMethod::quasi_newton,
                    spectral_radius(g.A - g.B2 * at - g.B1 * m0) < 1.0
                        ? m0
                        : bootstrap_stabilizing_gain(g.A - g.B2 * at, g.B1),
                    1e-13, 10000);
    if (!rep.converged()) {
      throw numerical_error("hessian_probe: inner solve failed at a probe point");
    }
    return (rep.X_plus.mat() * g.Sigma.mat()).trace();
  };
  probe.fd_value = (g_of(l + step * e) - 2.0 * g_of(l) + g_of(l - step * e)) /
                   (step * step);
  return probe;
}

/// Max entrywise error between the analytic gradients and central finite
/// differences of the cost, relative to max(1, |fd|). Shrinks the step by
/// x0.1 (up to 5 times) when a probe leaves the stabilizing set.
inline double fd_gradient_check(const GameInstance& g, const PolicyPair& p,
                                double step) {
  if (step <= 0.0) throw value_error("fd_gradient_check: step must be positive");
  const ValueCertificate cert = value_certificate(g, p);
  const GradientBundle gb = gradient_bundle(g, p, cert);

  auto cost_at = [&](const Matrix& k, const Matrix& l) {
    return value_certificate(g, PolicyPair(k, l)).cost;
  };

  double h = step;
  for (int attempt = 0; attempt < 6; ++attempt) {
    try {
      double worst = 0.0;
      auto probe = [&](const Matrix& analytic, bool vary_k) {
        Matrix base = vary_k ? p.K : p.L;
        for (Eigen::Index i = 0; i < base.rows(); ++i) {
          for (Eigen::Index j = 0; j < base.cols(); ++j) {
            Matrix plus = base, minus = base;
            plus(i, j) += h;
            minus(i, j) -= h;
            const double fp = vary_k ? cost_at(plus, p.L) : cost_at(p.K, plus);
            const double fm = vary_k ? cost_at(minus, p.L) : cost_at(p.K, minus);
            const double fd = (fp - fm) / (2.0 * h);
            const double err =
                std::abs(analytic(i, j) - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, err);
          }
        }
      };
      probe(gb.gradK, true);
      probe(gb.gradL, false);
      return worst;
    } catch (const stability_error&) {
      h *= 0.1;  // probe left the stabilizing set
    }
  }
  throw stability_error(
      "fd_gradient_check: probes keep leaving the stabilizing set");
}

}  // namespace lqnash
