#pragma once

#include <sstream>
#include <string>

#include "lqnash/errors.hpp"
#include "lqnash/linalg.hpp"

namespace lqnash {

/// Zero-sum LQ game data: dynamics x+ = A x - B1 u1 - B2 u2, stage cost
/// x'Qx + u1'R1 u1 - u2'R2 u2, and the initial-state weight Sigma that makes
/// the value f(K, L) = Tr(X Sigma) independent of x0.
///
/// Q is symmetric but need not be definite; R1, R2 and Sigma must be
/// positive definite and (A, [B1 B2]) stabilizable.
struct GameInstance {
  Matrix A;
  Matrix B1;
  Matrix B2;
  SymMatrix Q;
  SymMatrix R1;
  SymMatrix R2;
  SymMatrix Sigma;

  GameInstance(Matrix a, Matrix b1, Matrix b2, SymMatrix q, SymMatrix r1,
               SymMatrix r2, SymMatrix sigma)
      : A(std::move(a)),
        B1(std::move(b1)),
        B2(std::move(b2)),
        Q(std::move(q)),
        R1(std::move(r1)),
        R2(std::move(r2)),
        Sigma(std::move(sigma)) {
    require_square(A, "GameInstance.A");
    require_finite(A, "GameInstance.A");
    require_finite(B1, "GameInstance.B1");
    require_finite(B2, "GameInstance.B2");
    const Eigen::Index nn = A.rows();
    auto check_dim = [&](bool ok, const char* field, const std::string& want) {
      if (!ok) {
        throw dimension_error(std::string("GameInstance.") + field +
                              ": expected " + want);
      }
    };
    check_dim(B1.rows() == nn, "B1", "n rows");
    check_dim(B2.rows() == nn, "B2", "n rows");
    check_dim(Q.dim() == nn, "Q", "n x n");
    check_dim(R1.dim() == B1.cols(), "R1", "m1 x m1");
    check_dim(R2.dim() == B2.cols(), "R2", "m2 x m2");
    check_dim(Sigma.dim() == nn, "Sigma", "n x n");
    if (!is_positive_definite(R1, 1e-12)) {
      throw value_error("GameInstance.R1: must be positive definite");
    }
    if (!is_positive_definite(R2, 1e-12)) {
      throw value_error("GameInstance.R2: must be positive definite");
    }
    if (!is_positive_definite(Sigma, 0.0)) {
      throw value_error("GameInstance.Sigma: must be positive definite");
    }
    Matrix b(nn, B1.cols() + B2.cols());
    b << B1, B2;
    if (!is_stabilizable(A, b)) {
      throw value_error("GameInstance: (A, [B1 B2]) is not stabilizable");
    }
  }

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m1() const { return B1.cols(); }
  Eigen::Index m2() const { return B2.cols(); }
};

/// Feedback gains u1 = K x, u2 = L x. Admissibility (rho(A - B1 K - B2 L) < 1)
/// is checked by operations, never assumed.
struct PolicyPair {
  Matrix K;
  Matrix L;

  PolicyPair(Matrix k, Matrix l) : K(std::move(k)), L(std::move(l)) {
    require_finite(K, "PolicyPair.K");
    require_finite(L, "PolicyPair.L");
  }
};

/// Value matrix X, metric matrix Y and cost Tr(X Sigma) of an admissible pair.
struct ValueCertificate {
  SymMatrix X;
  SymMatrix Y;
  double cost = 0.0;
};

/// Gradients of f and their natural-gradient factors:
/// gradK = 2 U Y with U = R1 K - B1' X A_cl, and
/// gradL = 2 V Y with V = -R2 L - B2' X A_cl.
struct GradientBundle {
  Matrix gradK;
  Matrix gradL;
  Matrix U;
  Matrix V;
};

inline void require_policy_dims(const GameInstance& g, const PolicyPair& p) {
  if (p.K.rows() != g.m1() || p.K.cols() != g.n()) {
    throw dimension_error("PolicyPair.K: expected m1 x n");
  }
  if (p.L.rows() != g.m2() || p.L.cols() != g.n()) {
    throw dimension_error("PolicyPair.L: expected m2 x n");
  }
}

inline Matrix closed_loop(const GameInstance& g, const PolicyPair& p) {
  require_policy_dims(g, p);
  return g.A - g.B1 * p.K - g.B2 * p.L;
}

inline bool is_admissible(const GameInstance& g, const PolicyPair& p) {
  return spectral_radius(closed_loop(g, p)) < 1.0;
}

/// Value of an admissible pair. Refuses inadmissible pairs: outside the
/// stabilizing set the Lyapunov system may still be solvable but its
/// "value" is not a valid indicator of anything.
inline ValueCertificate value_certificate(const GameInstance& g,
                                          const PolicyPair& p) {
  const Matrix a_cl = closed_loop(g, p);
  const double rho = spectral_radius(a_cl);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "value_certificate: pair is not admissible (rho = " << rho << ")";
    throw stability_error(os.str());
  }
  const SymMatrix stage(symmetrized(g.Q.mat() + p.K.transpose() * g.R1.mat() * p.K -
                                    p.L.transpose() * g.R2.mat() * p.L));
  ValueCertificate cert;
  cert.X = solve_discrete_lyapunov(a_cl, stage);
  cert.Y = solve_dual_lyapunov(a_cl, g.Sigma);
  cert.cost = (cert.X.mat() * g.Sigma.mat()).trace();
  return cert;
}

inline GradientBundle gradient_bundle(const GameInstance& g,
                                      const PolicyPair& p,
                                      const ValueCertificate& cert) {
  const Matrix a_cl = closed_loop(g, p);
  GradientBundle out;
  out.U = g.R1.mat() * p.K - g.B1.transpose() * cert.X.mat() * a_cl;
  out.V = -(g.R2.mat() * p.L) - g.B2.transpose() * cert.X.mat() * a_cl;
  out.gradK = 2.0 * out.U * cert.Y.mat();
  out.gradL = 2.0 * out.V * cert.Y.mat();
  return out;
}

namespace detail {

/// Solve W Z = RHS for symmetric W, with a singularity guard that reports a
/// condition estimate.
inline Matrix guarded_solve(const Matrix& w, const Matrix& rhs,
                            const char* what) {
  Eigen::FullPivLU<Matrix> lu(w);
  const double cond = lu.rcond();
  if (!lu.isInvertible() || cond < 1e-14) {
    std::ostringstream os;
    os << what << ": singular or ill-conditioned block (rcond = " << cond
       << ")";
    throw singularity_error(os.str());
  }
  return lu.solve(rhs);
}

}  // namespace detail

/// Curvature of the leader's value function:
/// O_X = R2 - B2' X B2 + B2' X B1 (R1 + B1' X B1)^{-1} B1' X B2.
inline SymMatrix o_matrix(const GameInstance& g, const SymMatrix& x) {
  const Matrix e = g.R1.mat() + g.B1.transpose() * x.mat() * g.B1;
  const Matrix xb2 = x.mat() * g.B2;
  const Matrix cross = g.B1.transpose() * xb2;  // B1' X B2
  const Matrix o = g.R2.mat() - g.B2.transpose() * xb2 +
                   cross.transpose() * detail::guarded_solve(e, cross, "o_matrix");
  return SymMatrix(symmetrized(o));
}

/// Riccati map R(X) = A' X A + Q - X - A' X B (R + B' X B)^{-1} B' X A;
/// zero exactly on DARE solutions.
inline SymMatrix riccati_map(const Matrix& a, const Matrix& b,
                             const SymMatrix& q, const SymMatrix& r,
                             const SymMatrix& x) {
  const Matrix e = r.mat() + b.transpose() * x.mat() * b;
  const Matrix f = b.transpose() * x.mat() * a;  // B' X A
  const Matrix val = a.transpose() * x.mat() * a + q.mat() - x.mat() -
                     f.transpose() * detail::guarded_solve(e, f, "riccati_map");
  return SymMatrix(symmetrized(val));
}

/// Left-hand side of the game's generalized Riccati equation,
///   A' X A - X + Q - b' G^{-1} b = 0,
/// with b = [B1' X A; B2' X A] and G the blocked curvature
/// [[R1 + B1'XB1, B1'XB2], [B2'XB1, -R2 + B2'XB2]]. A small Frobenius norm
/// certifies X as a GARE solution.
inline SymMatrix gare_residual(const GameInstance& g, const SymMatrix& x) {
  const Eigen::Index m1 = g.m1(), m2 = g.m2();
  Matrix big(m1 + m2, m1 + m2);
  big.topLeftCorner(m1, m1) = g.R1.mat() + g.B1.transpose() * x.mat() * g.B1;
  big.topRightCorner(m1, m2) = g.B1.transpose() * x.mat() * g.B2;
  big.bottomLeftCorner(m2, m1) = big.topRightCorner(m1, m2).transpose();
  big.bottomRightCorner(m2, m2) =
      -g.R2.mat() + g.B2.transpose() * x.mat() * g.B2;
  Matrix rhs(m1 + m2, g.n());
  rhs.topRows(m1) = g.B1.transpose() * x.mat() * g.A;
  rhs.bottomRows(m2) = g.B2.transpose() * x.mat() * g.A;
  const Matrix val = g.A.transpose() * x.mat() * g.A - x.mat() + g.Q.mat() -
                     rhs.transpose() *
                         detail::guarded_solve(big, rhs, "gare_residual");
  return SymMatrix(symmetrized(val));
}

/// Stationary policies extracted from a GARE solution: [K; L] = G^{-1} b.
inline PolicyPair gare_policies(const GameInstance& g, const SymMatrix& x) {
  const Eigen::Index m1 = g.m1(), m2 = g.m2();
  Matrix big(m1 + m2, m1 + m2);
  big.topLeftCorner(m1, m1) = g.R1.mat() + g.B1.transpose() * x.mat() * g.B1;
  big.topRightCorner(m1, m2) = g.B1.transpose() * x.mat() * g.B2;
  big.bottomLeftCorner(m2, m1) = big.topRightCorner(m1, m2).transpose();
  big.bottomRightCorner(m2, m2) =
      -g.R2.mat() + g.B2.transpose() * x.mat() * g.B2;
  Matrix rhs(m1 + m2, g.n());
  rhs.topRows(m1) = g.B1.transpose() * x.mat() * g.A;
  rhs.bottomRows(m2) = g.B2.transpose() * x.mat() * g.A;
  const Matrix z = detail::guarded_solve(big, rhs, "gare_policies");
  return PolicyPair(z.topRows(m1), z.bottomRows(m2));
}

enum class assumption_case { a1, a2, both, neither };

inline const char* to_string(assumption_case c) {
  switch (c) {
    case assumption_case::a1: return "A1";
    case assumption_case::a2: return "A2";
    case assumption_case::both: return "Both";
    case assumption_case::neither: return "Neither";
  }
  return "?";
}

inline bool a1_holds(assumption_case c) {
  return c == assumption_case::a1 || c == assumption_case::both;
}
inline bool a2_holds(assumption_case c) {
  return c == assumption_case::a2 || c == assumption_case::both;
}

/// Definiteness conditions on the candidate value matrix, with margin 1e-10:
/// (a1): R1 + B1' X B1 > 0 and O_X > 0;
/// (a2): R2 - B2' X B2 > 0 and
///       R1 + B1' X B1 + B1' X B2 (R2 - B2' X B2)^{-1} B2' X B1 > 0.
inline assumption_case check_assumption(const GameInstance& g,
                                        const SymMatrix& x_star) {
  constexpr double margin = 1e-10;
  const Matrix e1 = symmetrized(g.R1.mat() + g.B1.transpose() * x_star.mat() * g.B1);
  const Matrix d2 = symmetrized(g.R2.mat() - g.B2.transpose() * x_star.mat() * g.B2);

  bool a1 = false;
  if (is_positive_definite(SymMatrix(e1), margin)) {
    a1 = is_positive_definite(o_matrix(g, x_star), margin);
  }
  bool a2 = false;
  if (is_positive_definite(SymMatrix(d2), margin)) {
    const Matrix cross = g.B2.transpose() * x_star.mat() * g.B1;  // B2' X B1
    const Matrix inner = symmetrized(
        e1 + cross.transpose() *
                 detail::guarded_solve(d2, cross, "check_assumption"));
    a2 = is_positive_definite(SymMatrix(inner), margin);
  }
  if (a1 && a2) return assumption_case::both;
  if (a1) return assumption_case::a1;
  if (a2) return assumption_case::a2;
  return assumption_case::neither;
}

}  // namespace lqnash
