#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "lqnash/errors.hpp"

namespace lqnash {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool is_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw value_error(std::string(what) + ": non-finite entries");
  }
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected square matrix, got " << m.rows() << "x"
       << m.cols();
    throw dimension_error(os.str());
  }
}

inline Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

/// Symmetric matrix with validated construction: entries must be finite
/// and symmetric to 1e-12 * max(1, ||M||_F); storage is symmetrized so
/// asymmetry cannot compound across repeated solves.
class SymMatrix {
public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) {
    require_square(m, "SymMatrix");
    require_finite(m, "SymMatrix");
    const double scale = std::max(1.0, m.norm());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
      std::ostringstream os;
      os << "SymMatrix: symmetry violated, max |M_ij - M_ji| = " << asym
         << " exceeds " << 1e-12 * scale;
      throw value_error(os.str());
    }
    m_ = symmetrized(m);
  }

  static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }
  static SymMatrix identity(Eigen::Index n) {
    return SymMatrix(Matrix::Identity(n, n));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  operator const Matrix&() const { return m_; }

  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
  Matrix m_;
};

/// Largest |eigenvalue| over the complex spectrum.
inline double spectral_radius(const Matrix& m) {
  require_square(m, "spectral_radius");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

enum class schur_status { stable, marginal, unstable };

/// Three-valued stability verdict: marginal when |rho - 1| <= 1e-10.
inline schur_status classify_schur(const Matrix& m) {
  const double rho = spectral_radius(m);
  if (std::abs(rho - 1.0) <= 1e-10) return schur_status::marginal;
  return rho < 1.0 ? schur_status::stable : schur_status::unstable;
}

/// True iff rho(M) < 1 - margin (strict by default).
inline bool is_schur(const Matrix& m, double margin = 0.0) {
  return spectral_radius(m) < 1.0 - margin;
}

namespace detail {

// X <- sum_k (A')^k W A^k by doubling: X_{m+1} = X_m + P' X_m P, P <- P^2.
inline Matrix dlyap_doubling(const Matrix& a, const Matrix& w) {
  Matrix x = w;
  Matrix p = a;
  const double scale = std::max(1.0, w.norm());
  for (int it = 0; it < 200; ++it) {
    const Matrix incr = p.transpose() * x * p;
    x += incr;
    if (incr.norm() <= 1e-18 * scale) break;
    p = p * p;
  }
  return x;
}

// Exact dense solve of (I - A' (x) A') vec(X) = vec(W).
inline Matrix dlyap_kron(const Matrix& a, const Matrix& w) {
  const Eigen::Index n = a.rows();
  const Matrix at = a.transpose();
  Matrix sys = Matrix::Identity(n * n, n * n);
  // kron(A', A') in column-major vec convention: vec(A' X A) = (A' (x) A') vec(X).
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      sys.block(i * n, j * n, n, n) -= at(i, j) * at;
    }
  }
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(w.data(), n * n);
  Eigen::VectorXd x = sys.partialPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

inline Matrix dlyap_core(const Matrix& a, const Matrix& w) {
  // Vectorization is exact at desk scale; doubling avoids the O(n^6) system
  // for larger states. Both must meet the same residual bound.
  return a.rows() <= 30 ? dlyap_kron(a, w) : dlyap_doubling(a, w);
}

}  // namespace detail

/// Unique symmetric X with A' X A + Q - X = 0 for Schur A. Q may be
/// indefinite. The result satisfies
/// ||A' X A + Q - X||_F <= 1e-10 * max(1, ||Q||_F).
inline SymMatrix solve_discrete_lyapunov(const Matrix& a, const SymMatrix& q) {
  require_square(a, "solve_discrete_lyapunov");
  if (a.rows() != q.dim()) {
    throw dimension_error("solve_discrete_lyapunov: A and Q dimension mismatch");
  }
  const double rho = spectral_radius(a);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "solve_discrete_lyapunov: A is not Schur (rho = " << rho
       << "); I - A'(x)A' is singular or ill-conditioned";
    throw stability_error(os.str());
  }
  Matrix x = symmetrized(detail::dlyap_core(a, q.mat()));
  const double bound = 1e-10 * std::max(1.0, q.mat().norm());
  Matrix resid = a.transpose() * x * a + q.mat() - x;
  if (resid.norm() > bound) {
    // One refinement pass: the correction solves the same equation with the
    // residual as right-hand side.
    x = symmetrized(x + detail::dlyap_core(a, symmetrized(resid)));
    resid = a.transpose() * x * a + q.mat() - x;
    if (resid.norm() > bound) {
      std::ostringstream os;
      os << "solve_discrete_lyapunov: residual " << resid.norm()
         << " exceeds bound " << bound << " (rho(A) = " << rho << ")";
      throw numerical_error(os.str());
    }
  }
  return SymMatrix(x);
}

/// Unique Y with A Y A' + Sigma - Y = 0 for Schur A; Y > 0 when Sigma > 0.
inline SymMatrix solve_dual_lyapunov(const Matrix& a, const SymMatrix& sigma) {
  return solve_discrete_lyapunov(a.transpose(), sigma);
}

/// PBH stabilizability test: rank [lambda I - A, B] = n for every
/// eigenvalue with |lambda| >= 1 - 1e-10. Marginal eigenvalues are treated
/// as unstable modes; rank uses the threshold 1e-9 * ||[A B]||_2.
inline bool is_stabilizable(const Matrix& a, const Matrix& b) {
  require_square(a, "is_stabilizable");
  if (b.rows() != a.rows()) {
    throw dimension_error("is_stabilizable: B row count must match A");
  }
  const Eigen::Index n = a.rows();
  Matrix ab(n, n + b.cols());
  ab << a, b;
  const double norm_ab =
      Eigen::JacobiSVD<Matrix>(ab).singularValues().maxCoeff();
  const double rank_tol = 1e-9 * std::max(norm_ab, 1e-300);

  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - 1e-10) continue;
    Eigen::MatrixXcd pencil(n, n + b.cols());
    pencil.leftCols(n) =
        lambda * Eigen::MatrixXcd::Identity(n, n) - a.cast<std::complex<double>>();
    pencil.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    if (svd.singularValues().minCoeff() <= rank_tol) return false;
  }
  return true;
}

/// (C, A) detectable iff (A', C') stabilizable.
inline bool is_detectable(const Matrix& c, const Matrix& a) {
  return is_stabilizable(a.transpose(), c.transpose());
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
inline std::pair<double, double> sym_eigen_bounds(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

inline double lambda_min(const SymMatrix& m) { return sym_eigen_bounds(m).first; }
inline double lambda_max(const SymMatrix& m) { return sym_eigen_bounds(m).second; }

/// lambda_min(M) > margin.
inline bool is_positive_definite(const SymMatrix& m, double margin = 0.0) {
  return lambda_min(m) > margin;
}

}  // namespace lqnash
