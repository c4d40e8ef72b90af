#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "lqnash/game.hpp"
#include "lqnash/inner.hpp"
#include "lqnash/outer.hpp"

namespace lqnash {

/// Deterministic generator: xoshiro-style splitmix64 stream with a
/// hand-rolled Box-Muller, so emitted instances are byte-identical across
/// platforms and standard-library versions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = std::max(uniform(), 1e-300);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Matrix randn(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    }
    return m;
  }

private:
  std::uint64_t state_;
};

/// Canonical scalar preset: a = 1.2, b1 = 1, b2 = 0.5, q = 1, r1 = 1,
/// r2 = 5, sigma = 1. Unstable open loop, condition (a1) holds at the
/// equilibrium.
inline GameInstance g1_preset() {
  auto s = [](double v) { return SymMatrix((Matrix(1, 1) << v).finished()); };
  auto m = [](double v) { return (Matrix(1, 1) << v).finished(); };
  return GameInstance(m(1.2), m(1.0), m(0.5), s(1.0), s(1.0), s(5.0), s(1.0));
}

/// Swaps the players' roles: (A, B2, B1, -Q, R2, R1, Sigma). The mirrored
/// game's value matrix is the negation of the original's, and condition
/// (a1) maps to (a2).
inline GameInstance mirror_instance(const GameInstance& g) {
  return GameInstance(g.A, g.B2, g.B1, SymMatrix(-g.Q.mat()), g.R2, g.R1,
                      g.Sigma);
}

namespace detail {

inline SymMatrix random_spd(Rng& rng, Eigen::Index n, double base,
                            double spread) {
  const Matrix w = rng.randn(n, n);
  return SymMatrix(symmetrized(base * Matrix::Identity(n, n) +
                               (spread / static_cast<double>(n)) *
                                   w.transpose() * w));
}

}  // namespace detail

struct GeneratorOptions {
  double rho_min = 0.4;
  double rho_max = 1.05;
  double b2_scale = 0.15;
  double q_base = 0.3;
  double q_spread = 1.0;
  double r2_base = 8.0;
};

/// Rejection-samples random entries until (A, [B1 B2]) passes the PBH test.
inline GameInstance random_instance(int n, int m1, int m2, std::uint64_t seed,
                                    const GeneratorOptions& opts = {}) {
  if (n < 1 || m1 < 1 || m2 < 1) {
    throw value_error("random_instance: n, m1, m2 must be >= 1");
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix a = rng.randn(n, n);
    const double rho = spectral_radius(a);
    const double target = rng.uniform(opts.rho_min, opts.rho_max);
    if (rho > 0.0) a *= target / rho;
    const Matrix b1 = rng.randn(n, m1);
    const Matrix b2 = opts.b2_scale * rng.randn(n, m2);
    const SymMatrix q = detail::random_spd(rng, n, opts.q_base, opts.q_spread);
    const SymMatrix r1 = detail::random_spd(rng, m1, 1.0, 0.25);
    const SymMatrix r2 = detail::random_spd(rng, m2, opts.r2_base, 0.25);
    Matrix b(n, m1 + m2);
    b << b1, b2;
    if (!is_stabilizable(a, b)) continue;
    return GameInstance(a, b1, b2, q, r1, r2, SymMatrix::identity(n));
  }
  throw numerical_error("random_instance: rejection sampling exhausted");
}

/// Draws instances until one is solvable with Q - L*' R2 L* indefinite at
/// the equilibrium (the regime a positive-semidefinite projection set would
/// exclude). Solves each candidate to check; up to max_draws attempts.
inline std::optional<GameInstance> indefinite_at_ne_instance(
    int n, int m1, int m2, std::uint64_t seed, int max_draws = 100) {
  GeneratorOptions opts;
  opts.q_base = 0.02;
  opts.q_spread = 0.05;
  opts.b2_scale = 0.8;
  opts.r2_base = 1.6;
  opts.rho_min = 0.8;
  opts.rho_max = 1.25;
  for (int draw = 0; draw < max_draws; ++draw) {
    GameInstance g = random_instance(n, m1, m2, seed + 7919ULL * draw, opts);
    SolveOptions sopt;
    sopt.tol = 1e-9;
    sopt.max_outer = 200;
    try {
      const NashSolution sol = solve_nash(g, sopt);
      if (!sol.converged() || !sol.certificate.pass) continue;
      const SymMatrix q_eff(symmetrized(
          g.Q.mat() - sol.L_star.transpose() * g.R2.mat() * sol.L_star));
      if (lambda_min(q_eff) < 0.0) return g;
    } catch (const error&) {
      continue;
    }
  }
  return std::nullopt;
}

}  // namespace lqnash
