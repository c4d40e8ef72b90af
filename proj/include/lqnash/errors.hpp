#pragma once

#include <stdexcept>
#include <string>

namespace lqnash {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Incompatible matrix dimensions.
class dimension_error : public error {
public:
  using error::error;
};

/// Bad values at construction: NaN/Inf entries, broken symmetry,
/// definiteness requirements not met. Carries a field-level message.
class value_error : public error {
public:
  using error::error;
};

/// A matrix required to be Schur stable is not, or a policy pair is
/// inadmissible.
class stability_error : public error {
public:
  using error::error;
};

/// A matrix that must be inverted is singular or numerically rank
/// deficient. The message includes a condition estimate where available.
class singularity_error : public error {
public:
  using error::error;
};

/// A system pair is not stabilizable (no feedback can exist).
class infeasibility_error : public error {
public:
  using error::error;
};

/// An iterative procedure failed to meet its residual bound.
class numerical_error : public error {
public:
  using error::error;
};

/// An input that makes the requested computation meaningless,
/// e.g. a stepsize query at an exactly-zero gradient.
class degenerate_input_error : public error {
public:
  using error::error;
};

/// Initialization checks for the outer solvers. Each failed check is
/// reported distinctly.
enum class init_check {
  stabilizability,   // (A - B2 L0, B1) not stabilizable (mirrored for K leader)
  dare_solvable,     // follower DARE has no stabilizing solution from L0/K0
  curvature,         // R1 + B1' X+ B1 (resp. R2 + B2' W+ B2) not positive definite
};

inline const char* to_string(init_check c) {
  switch (c) {
    case init_check::stabilizability: return "stabilizability";
    case init_check::dare_solvable: return "dare_solvable";
    case init_check::curvature: return "curvature";
  }
  return "unknown";
}

class init_error : public error {
public:
  init_error(init_check which, const std::string& what)
      : error(std::string("initialization check '") + to_string(which) +
              "' failed: " + what),
        which_(which) {}
  init_check which() const { return which_; }

private:
  init_check which_;
};

/// A condition the theory guarantees was violated at runtime
/// (an iterate left the stabilizing set, a curvature matrix lost
/// definiteness, a value matrix broke monotonicity). This is a bug
/// signal, not a recoverable state.
class invariant_violation : public error {
public:
  using error::error;
};

}  // namespace lqnash
