#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sgdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error hierarchy. The CLI maps these onto exit codes; library code throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad model/operation parameter (non-positive scale, non-PSD matrix, ...).
struct DomainError : Error {
  using Error::Error;
};

// Vector/matrix dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid sampling request (e.g. without-replacement with m > n).
struct SamplingError : Error {
  using Error::Error;
};

// Inconsistent solver wiring (missing reference path, grid mismatch).
struct ConfigError : Error {
  using Error::Error;
};

// Iterate left the representable range; carries the offending step.
struct DivergenceError : Error {
  long step;
  explicit DivergenceError(const std::string& what, long step_index)
      : Error(what), step(step_index) {}
};

// Query outside a trajectory/path horizon.
struct RangeError : Error {
  using Error::Error;
};

struct SingularityError : Error {
  using Error::Error;
};

struct InsufficientSamplesError : Error {
  using Error::Error;
};

struct PreconditionError : Error {
  using Error::Error;
};

inline void require_dim(const Vec& v, Eigen::Index p, const char* where) {
  if (v.size() != p)
    throw ShapeError(std::string(where) + ": expected dimension " +
                     std::to_string(p) + ", got " + std::to_string(v.size()));
}

inline void check_finite(const Vec& v, long step) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double x = v[i];
    if (!std::isfinite(x) || std::abs(x) > 1e12)
      throw DivergenceError(
          "iterate diverged at step " + std::to_string(step) +
              " (coordinate " + std::to_string(i) + " = " + std::to_string(x) + ")",
          step);
  }
}

}  // namespace sgdlab
