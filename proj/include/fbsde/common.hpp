#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace fbsde {

// Coefficient evaluation produced a non-finite value or was otherwise unusable.
class EvaluationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Forward simulation hit a non-finite state.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t path, std::size_t step)
      : std::runtime_error(what + " (path " + std::to_string(path) + ", step " +
                           std::to_string(step) + ")"),
        path_(path),
        step_(step) {}
  std::size_t path() const noexcept { return path_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t path_, step_;
};

// Least-squares kernel failure (rank deficiency with zero ridge, shape mismatch).
class RegressionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backward solver / outer iteration failure (inner non-convergence, budget breach).
class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config parsing or structural validation failure.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Comparison-theorem hypothesis not satisfied (distinct exit path in the CLI).
class HypothesisError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double sup_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::fabs(x));
  return s;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace fbsde
