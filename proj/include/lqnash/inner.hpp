#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "lqnash/game.hpp"
#include "lqnash/linalg.hpp"
#include "lqnash/log.hpp"

namespace lqnash {

enum class InnerMethod { gradient, natural_gradient, quasi_newton };

inline const char* to_string(InnerMethod m) {
  switch (m) {
    case InnerMethod::gradient: return "gradient";
    case InnerMethod::natural_gradient: return "ng";
    case InnerMethod::quasi_newton: return "qn";
  }
  return "?";
}

enum class inner_status { converged, max_iterations, curvature_loss, diverged };

/// Result of one follower solve. Every recorded iterate is stabilizing;
/// X_plus is the maximal DARE solution for the frozen opponent gain.
struct InnerReport {
  Matrix K_opt;
  SymMatrix X_plus;
  int iterations = 0;
  double final_grad_norm = 0.0;  // ||n(M)||_F = 2 ||R M - B' X A_M||_F
  std::vector<double> stepsizes;
  std::vector<double> rho_trace;
  std::vector<SymMatrix> x_trace;
  std::vector<Matrix> gain_trace;
  inner_status status = inner_status::max_iterations;
  std::string detail;

  bool converged() const { return status == inner_status::converged; }
};

/// Stepsize constants for the gradient policy (perturbation bound on the
/// metric matrix plus the stability interval bound).
struct GradientStepsize {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double eta0 = 0.0;
  double beta0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double c0 = 0.0;
  double eta = 0.0;
};

namespace detail {

constexpr double kEtaMax = 1e3;  // vanishing-gradient cap on the step

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues().maxCoeff();
}

/// Stepsize for one gradient step on the subproblem
/// min_M Tr(X_M Sigma) with dynamics a_open - b M, control cost r.
/// u is the natural-gradient factor r M - b' X (a_open - b M) at the
/// current iterate, x/y its value and metric matrices.
inline GradientStepsize gradient_stepsize_core(const Matrix& a_open,
                                               const Matrix& b,
                                               const SymMatrix& r,
                                               const SymMatrix& sigma,
                                               const SymMatrix& x,
                                               const SymMatrix& y,
                                               const Matrix& u) {
  if (u.norm() == 0.0) {
    throw degenerate_input_error(
        "gradient_stepsize: gradient is zero; caller should declare "
        "convergence");
  }
  GradientStepsize gs;
  const double s = spectral_norm(b * u * y.mat());
  const double yn = lambda_max(y);  // ||Y||_2 for Y > 0
  const double sig1 = lambda_min(sigma);
  gs.mu1 = yn * s * s / sig1;
  gs.mu2 = yn * s * spectral_norm(a_open) / sig1;

  // Root of 4 mu1 t^2 + 4 mu2 t = 1, then backed off by half so the metric
  // perturbation factor beta0 stays finite (at the root itself the factor
  // diverges).
  double root;
  if (gs.mu1 <= 1e-300) {
    root = gs.mu2 <= 1e-300 ? std::numeric_limits<double>::infinity()
                            : 1.0 / (4.0 * gs.mu2);
  } else {
    root = (std::sqrt(gs.mu1 + gs.mu2 * gs.mu2) - gs.mu2) / (2.0 * gs.mu1);
  }
  gs.eta0 = std::min(0.5 * root, kEtaMax);
  gs.beta0 = 1.0 / (1.0 - 4.0 * gs.mu1 * gs.eta0 * gs.eta0 - 4.0 * gs.mu2 * gs.eta0);

  const double a = lambda_max(
      SymMatrix(symmetrized(r.mat() + b.transpose() * x.mat() * b)));
  if (!(a > 0.0)) {
    throw numerical_error("gradient_stepsize: R + B' X B has no positive part");
  }
  const double un2 = spectral_norm(u);
  gs.a1 = a * gs.beta0 * yn + 4.0 * un2 * gs.beta0 * yn * yn;
  gs.a2 = 4.0 * a * un2 * gs.beta0 * yn * yn;
  // 0.99 x the positive root of a2 t^2 + a1 t = 1 (strict inequality).
  gs.c0 = 0.99 * (std::sqrt(1.0 / gs.a2 + gs.a1 * gs.a1 / (4.0 * gs.a2 * gs.a2)) -
                  gs.a1 / (2.0 * gs.a2));
  gs.eta = std::min({gs.eta0, gs.c0, kEtaMax});
  if (!(gs.eta > 0.0) || !std::isfinite(gs.eta)) {
    throw numerical_error("gradient_stepsize: no positive stepsize found");
  }
  return gs;
}

/// An LQR-shaped subproblem min_M Tr(X_M Sigma) over stabilizing M for
/// dynamics a_open - b M; the state cost may be indefinite.
struct LqrSubproblem {
  Matrix a_open;
  Matrix b;
  SymMatrix q;
  SymMatrix r;
  SymMatrix sigma;
};

inline InnerReport policy_iteration(const LqrSubproblem& sub, const Matrix& m0,
                                    InnerMethod method, double tol,
                                    int max_iter) {
  if (tol <= 0.0) throw value_error("inner solve: tol must be positive");
  InnerReport rep;
  Matrix m = m0;
  const double rho0 = spectral_radius(sub.a_open - sub.b * m);
  if (rho0 >= 1.0) {
    std::ostringstream os;
    os << "inner solve: initial gain is not stabilizing (rho = " << rho0 << ")";
    throw stability_error(os.str());
  }

  for (int it = 0; it <= max_iter; ++it) {
    const Matrix a_cl = sub.a_open - sub.b * m;
    const double rho = spectral_radius(a_cl);
    if (rho >= 1.0) {
      // The specified stepsizes keep every iterate stabilizing; reaching this
      // point means either an implementation bug or an unsolvable subproblem
      // (no maximal stabilizing solution exists for this opponent gain).
      std::ostringstream os;
      os << "inner solve: iterate " << it << " left the stabilizing set (rho = "
         << rho << ")";
      throw invariant_violation(os.str());
    }
    const SymMatrix x = solve_discrete_lyapunov(
        a_cl, SymMatrix(symmetrized(sub.q.mat() +
                                    m.transpose() * sub.r.mat() * m)));
    rep.rho_trace.push_back(rho);
    rep.x_trace.push_back(x);
    rep.gain_trace.push_back(m);
    const Matrix u = sub.r.mat() * m - sub.b.transpose() * x.mat() * a_cl;
    rep.final_grad_norm = 2.0 * u.norm();
    rep.K_opt = m;
    rep.X_plus = x;
    rep.iterations = it;

    if (rep.final_grad_norm <= tol) {
      // The maximal solution must carry positive curvature R + B' X+ B > 0.
      const SymMatrix e_plus(
          symmetrized(sub.r.mat() + sub.b.transpose() * x.mat() * sub.b));
      if (!is_positive_definite(e_plus, 0.0)) {
        rep.status = inner_status::curvature_loss;
        rep.detail = "converged to a point without positive curvature";
        return rep;
      }
      rep.status = inner_status::converged;
      return rep;
    }
    if (it == max_iter) break;
    if (!x.mat().allFinite() || x.mat().norm() > 1e15) {
      rep.status = inner_status::diverged;
      rep.detail = "value matrix diverged; the subproblem has no finite optimum";
      return rep;
    }

    const SymMatrix e(
        symmetrized(sub.r.mat() + sub.b.transpose() * x.mat() * sub.b));
    double eta = 0.0;
    switch (method) {
      case InnerMethod::natural_gradient: {
        const double en = lambda_max(e);
        if (en <= 0.0) {
          rep.status = inner_status::curvature_loss;
          rep.detail = "R + B' X B lost its positive part";
          return rep;
        }
        eta = 1.0 / (2.0 * en);
        m = m - eta * 2.0 * u;
        break;
      }
      case InnerMethod::quasi_newton: {
        if (lambda_min(e) <= 0.0) {
          rep.status = inner_status::curvature_loss;
          rep.detail = "R + B' X B is not positive definite";
          return rep;
        }
        eta = 0.5;
        m = m - eta * 2.0 * detail::guarded_solve(e.mat(), u, "inner quasi-Newton");
        break;
      }
      case InnerMethod::gradient: {
        const SymMatrix y = solve_dual_lyapunov(a_cl, sub.sigma);
        const GradientStepsize gs =
            gradient_stepsize_core(sub.a_open, sub.b, sub.r, sub.sigma, x, y, u);
        eta = gs.eta;
        m = m - eta * 2.0 * u * y.mat();
        break;
      }
    }
    rep.stepsizes.push_back(eta);
  }
  rep.status = inner_status::max_iterations;
  std::ostringstream os;
  os << "inner solve: " << max_iter << " iterations without reaching "
     << tol << " (grad norm " << rep.final_grad_norm << ")";
  rep.detail = os.str();
  return rep;
}

}  // namespace detail

/// A gain M0 with rho(A - B M0) < 1, from Riccati value iteration on the
/// auxiliary problem with unit state and control costs. Returns zero when A
/// is already Schur.
inline Matrix bootstrap_stabilizing_gain(const Matrix& a, const Matrix& b) {
  require_square(a, "bootstrap_stabilizing_gain");
  if (b.rows() != a.rows()) {
    throw dimension_error("bootstrap_stabilizing_gain: B row count must match A");
  }
  const Eigen::Index n = a.rows();
  if (spectral_radius(a) < 1.0) return Matrix::Zero(b.cols(), n);
  if (!is_stabilizable(a, b)) {
    throw infeasibility_error("bootstrap_stabilizing_gain: (A, B) is not stabilizable");
  }
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix im = Matrix::Identity(b.cols(), b.cols());
  Matrix x = eye;
  bool settled = false;
  for (int it = 0; it < 100000; ++it) {
    const Matrix bxa = b.transpose() * x * a;
    const Matrix e = im + b.transpose() * x * b;
    const Matrix xn =
        symmetrized(a.transpose() * x * a -
                    bxa.transpose() * detail::guarded_solve(e, bxa,
                                                            "bootstrap value iteration") +
                    eye);
    const double step = (xn - x).norm();
    x = xn;
    if (step <= 1e-12 * std::max(1.0, x.norm())) {
      settled = true;
      break;
    }
  }
  const double resid =
      riccati_map(a, b, SymMatrix(eye), SymMatrix(im), SymMatrix(x)).mat().norm();
  if (!settled || resid > 1e-10 * std::max(1.0, x.norm())) {
    throw numerical_error("bootstrap_stabilizing_gain: value iteration did not converge");
  }
  const Matrix e = im + b.transpose() * x * b;
  const Matrix m0 = detail::guarded_solve(e, b.transpose() * x * a, "bootstrap gain");
  if (spectral_radius(a - b * m0) >= 1.0) {
    throw numerical_error("bootstrap_stabilizing_gain: produced gain is not stabilizing");
  }
  return m0;
}

/// Gradient stepsize at gain M against frozen opponent gain L, computed from
/// the value certificate of the pair (M, L).
inline GradientStepsize gradient_stepsize(const GameInstance& g, const Matrix& l,
                                          const Matrix& m,
                                          const ValueCertificate& cert) {
  const Matrix a_open = g.A - g.B2 * l;
  const Matrix u =
      g.R1.mat() * m - g.B1.transpose() * cert.X.mat() * (a_open - g.B1 * m);
  return detail::gradient_stepsize_core(a_open, g.B1, g.R1, g.Sigma, cert.X,
                                        cert.Y, u);
}

/// Follower oracle: min_K f(K, L) for frozen L via policy iteration on the
/// DARE with state cost Q - L' R2 L (indefinite in general). Iterates stay
/// stabilizing without projection; convergence is declared on the
/// natural-gradient norm.
inline InnerReport inner_solve(const GameInstance& g, const Matrix& l,
                               InnerMethod method, const Matrix& m0, double tol,
                               int max_iter) {
  if (l.rows() != g.m2() || l.cols() != g.n()) {
    throw dimension_error("inner_solve: L must be m2 x n");
  }
  if (m0.rows() != g.m1() || m0.cols() != g.n()) {
    throw dimension_error("inner_solve: M0 must be m1 x n");
  }
  const Matrix a_open = g.A - g.B2 * l;
  if (!is_stabilizable(a_open, g.B1)) {
    throw infeasibility_error("inner_solve: (A - B2 L, B1) is not stabilizable");
  }
  detail::LqrSubproblem sub{
      a_open, g.B1,
      SymMatrix(symmetrized(g.Q.mat() - l.transpose() * g.R2.mat() * l)), g.R1,
      g.Sigma};
  return detail::policy_iteration(sub, m0, method, tol, max_iter);
}

/// Best response of the maximizer: max_L f(K, L) for frozen K, solved by
/// running the minimizing oracle on the sign-flipped subproblem (state cost
/// -(Q + K' R1 K), input B2, control cost R2) and mapping the flipped value
/// W+ back as Z+ = -W+.
inline InnerReport argmax_L(const GameInstance& g, const Matrix& k,
                            InnerMethod method, const Matrix& l0, double tol,
                            int max_iter) {
  if (k.rows() != g.m1() || k.cols() != g.n()) {
    throw dimension_error("argmax_L: K must be m1 x n");
  }
  if (l0.rows() != g.m2() || l0.cols() != g.n()) {
    throw dimension_error("argmax_L: L0 must be m2 x n");
  }
  const Matrix a_open = g.A - g.B1 * k;
  if (!is_stabilizable(a_open, g.B2)) {
    throw infeasibility_error("argmax_L: (A - B1 K, B2) is not stabilizable");
  }
  detail::LqrSubproblem sub{
      a_open, g.B2,
      SymMatrix(symmetrized(-(g.Q.mat() + k.transpose() * g.R1.mat() * k))),
      g.R2, g.Sigma};
  InnerReport rep = detail::policy_iteration(sub, l0, method, tol, max_iter);
  // Map back to the game's orientation: W+ solves the flipped DARE, -W+ the
  // original one; the recorded iterates flip with it.
  rep.X_plus = SymMatrix(-rep.X_plus.mat());
  for (auto& x : rep.x_trace) x = SymMatrix(-x.mat());
  if (rep.converged()) {
    const SymMatrix d2(symmetrized(g.R2.mat() -
                                   g.B2.transpose() * rep.X_plus.mat() * g.B2));
    if (!is_positive_definite(d2, 0.0)) {
      rep.status = inner_status::curvature_loss;
      rep.detail = "argmax_L: R2 - B2' Z+ B2 is not positive definite";
    }
  }
  return rep;
}

}  // namespace lqnash
