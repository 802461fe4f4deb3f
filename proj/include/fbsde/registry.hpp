#pragma once

// Built-in model registry.  These instances back the oracle and fixture
// suites and must run from a clean checkout:
//
//   trivial-zero         all coefficients zero
//   decoupled-quadratic  b = 0, sigma = 1, h = tanh(x1), g = (gamma/2) z1^2
//   coupled-smooth       b = 0.2 tanh(y1), g = 0.2 tanh(x1) + 0.5 z1^2, h = tanh(x1)
//   bounding-ode         zero coefficients, used for the dominating-process checks

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/model.hpp"

namespace fbsde {

using RegistryParams = std::map<std::string, double>;

namespace registry_detail {

inline double take(RegistryParams& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  return v;
}

inline void reject_leftovers(const RegistryParams& params, const std::string& name) {
  if (!params.empty())
    throw ConfigError("registry model '" + name + "' does not take parameter '" +
                      params.begin()->first + "'");
}

inline CoefficientFn zero_vector(std::size_t n) {
  return CoefficientFn::builtin("zero(" + std::to_string(n) + ")", Arity{}, OutputShape::VectorN,
                                n, [](double, auto, auto, auto, std::span<double> out) {
                                  for (double& v : out) v = 0.0;
                                });
}

inline CoefficientFn zero_terminal(std::size_t n) {
  return CoefficientFn::builtin("zero-terminal(" + std::to_string(n) + ")", Arity{},
                                OutputShape::VectorN, n,
                                [](double, auto, auto, auto, std::span<double> out) {
                                  for (double& v : out) v = 0.0;
                                });
}

inline CoefficientFn constant_diffusion(std::size_t n, std::size_t d, double value) {
  return CoefficientFn::builtin(
      "constant-diffusion(" + std::to_string(value) + ")", Arity{}, OutputShape::MatrixNxD, n * d,
      [n, d, value](double, auto, auto, auto, std::span<double> out) {
        for (double& v : out) v = 0.0;
        for (std::size_t i = 0; i < std::min(n, d); ++i) out[i * d + i] = value;
      });
}

inline CoefficientFn zero_scalar_generator() {
  return CoefficientFn::builtin("zero-generator", Arity{}, OutputShape::Scalar, 1,
                                [](double, auto, auto, auto, std::span<double> out) {
                                  out[0] = 0.0;
                                });
}

}  // namespace registry_detail

inline std::vector<std::string> registry_names() {
  return {"trivial-zero", "decoupled-quadratic", "coupled-smooth", "bounding-ode"};
}

inline FBSDEProblem make_registry_problem(const std::string& name, RegistryParams params = {}) {
  using namespace registry_detail;
  FBSDEProblem p;
  p.n = 1;
  p.d = 1;

  if (name == "trivial-zero" || name == "bounding-ode") {
    p.horizon = take(params, "horizon", 1.0);
    p.growth_c = take(params, "growth_constant", 1.0);
    reject_leftovers(params, name);
    p.x0 = {0.0};
    p.drift = zero_vector(1);
    p.diffusion = registry_detail::constant_diffusion(1, 1, 0.0);
    p.terminal = zero_terminal(1);
    p.generator = {zero_scalar_generator()};
    return p;
  }

  if (name == "decoupled-quadratic") {
    const double gamma = take(params, "gamma", 1.0);
    p.horizon = take(params, "horizon", 1.0);
    p.growth_c = take(params, "growth_constant", std::max(1.0, 0.5 * gamma));
    reject_leftovers(params, name);
    p.x0 = {0.0};
    p.drift = zero_vector(1);
    p.diffusion = constant_diffusion(1, 1, 1.0);
    p.terminal = CoefficientFn::builtin("tanh-terminal", Arity{false, true, false, false},
                                        OutputShape::VectorN, 1,
                                        [](double, std::span<const double> x, auto, auto,
                                           std::span<double> out) { out[0] = std::tanh(x[0]); });
    p.generator = {CoefficientFn::builtin(
        "pure-quadratic-generator(gamma=" + std::to_string(gamma) + ")",
        Arity{false, false, false, true}, OutputShape::Scalar, 1,
        [gamma](double, auto, auto, std::span<const double> z, std::span<double> out) {
          out[0] = 0.5 * gamma * z[0] * z[0];
        })};
    return p;
  }

  if (name == "coupled-smooth") {
    const double terminal_shift = take(params, "terminal_shift", 0.0);
    const double x0_shift = take(params, "x0_shift", 0.0);
    const double drift_shift = take(params, "drift_shift", 0.0);
    p.horizon = take(params, "horizon", 1.0);
    p.growth_c = take(params, "growth_constant", 1.0);
    reject_leftovers(params, name);
    p.x0 = {x0_shift};
    p.drift = CoefficientFn::builtin(
        "coupled-drift(shift=" + std::to_string(drift_shift) + ")",
        Arity{false, false, true, false}, OutputShape::VectorN, 1,
        [drift_shift](double, auto, std::span<const double> y, auto, std::span<double> out) {
          out[0] = 0.2 * std::tanh(y[0]) + drift_shift;
        });
    p.diffusion = constant_diffusion(1, 1, 1.0);
    p.terminal = CoefficientFn::builtin(
        "tanh-terminal(shift=" + std::to_string(terminal_shift) + ")",
        Arity{false, true, false, false}, OutputShape::VectorN, 1,
        [terminal_shift](double, std::span<const double> x, auto, auto, std::span<double> out) {
          out[0] = std::tanh(x[0]) + terminal_shift;
        });
    p.generator = {CoefficientFn::builtin(
        "coupled-generator", Arity{false, true, false, true}, OutputShape::Scalar, 1,
        [](double, std::span<const double> x, auto, std::span<const double> z,
           std::span<double> out) { out[0] = 0.2 * std::tanh(x[0]) + 0.5 * z[0] * z[0]; })};
    return p;
  }

  throw ConfigError("unknown registry model '" + name + "'");
}

}  // namespace fbsde
