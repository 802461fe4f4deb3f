#pragma once

// Experiment configuration: a single JSON document with a strict schema
// (unknown keys are rejected).  Problem coefficients are either registry
// references or inline DSL expression strings; both resolve to
// CoefficientFn at load time.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/expr.hpp"
#include "fbsde/model.hpp"
#include "fbsde/picard.hpp"
#include "fbsde/registry.hpp"

namespace fbsde {

struct NumericsConfig {
  std::size_t paths = 10000;
  std::size_t steps = 50;
  std::uint64_t seed = 1;
  double tolerance = 1e-3;
  std::size_t max_iterations = 20;
  std::size_t basis_degree = 3;
  bool projection = true;
  std::vector<double> p_list = {2.0, 4.0, 8.0};
  std::size_t inner_max_iterations = 64;
  double inner_tolerance = 1e-12;
  double ridge = 1e-8;
  double z_truncation = 0.0;     // explicit row-norm cap
  bool z_truncation_auto = false;  // derive the cap from the phi estimate
  std::size_t probe_count = 256;
  double probe_radius = 5.0;
  double alarm_threshold = 0.01;
  double eps_mono = 0.0;  // 0 = automatic (3 x fit standard error)
};

struct ExperimentConfig {
  FBSDEProblem problem;
  std::optional<FBSDEProblem> compare_problem;
  NumericsConfig numerics;
  std::string output_dir = "out";
  bool dump_paths = false;

  IterationConfig iteration_config() const {
    IterationConfig c;
    c.max_outer_iterations = numerics.max_iterations;
    c.tolerance = numerics.tolerance;
    c.steps = numerics.steps;
    c.paths = numerics.paths;
    c.seed = numerics.seed;
    c.basis_degree = numerics.basis_degree;
    c.envelope_projection = numerics.projection;
    c.alarm_threshold = numerics.alarm_threshold;
    c.eps_mono_override = numerics.eps_mono;
    c.backward.inner_max_iterations = numerics.inner_max_iterations;
    c.backward.inner_tolerance = numerics.inner_tolerance;
    c.backward.ridge = numerics.ridge;
    c.backward.z_truncation = numerics.z_truncation;
    return c;
  }
};

namespace config_detail {

using json = nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& context) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + context);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline ExprAst compile(const std::string& text, std::size_t n, std::size_t d,
                       const std::string& context) {
  try {
    return ExprAst::parse(text, n, d);
  } catch (const ExprError& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

inline CoefficientFn dsl_coefficient(const json& j, const char* key, std::size_t n, std::size_t d,
                                     Arity arity, OutputShape shape, const std::string& context) {
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ConfigError(context + "." + key + " must be an array of expressions");
  std::vector<ExprAst> components;
  if (shape == OutputShape::MatrixNxD) {
    // nested n x d array, row-major
    for (std::size_t r = 0; r < arr.size(); ++r) {
      const json& row = arr.at(r);
      if (!row.is_array())
        throw ConfigError(context + "." + key + " must be a nested array of rows");
      if (row.size() != d)
        throw ConfigError(context + "." + key + " row " + std::to_string(r) + " must have " +
                          std::to_string(d) + " entries");
      for (std::size_t c = 0; c < row.size(); ++c)
        components.push_back(compile(row.at(c).get<std::string>(), n, d,
                                     context + "." + key + "[" + std::to_string(r) + "][" +
                                         std::to_string(c) + "]"));
    }
  } else {
    for (std::size_t i = 0; i < arr.size(); ++i)
      components.push_back(compile(arr.at(i).get<std::string>(), n, d,
                                   context + "." + key + "[" + std::to_string(i) + "]"));
  }
  try {
    return CoefficientFn::from_expressions(std::move(components), arity, shape);
  } catch (const ConfigError& e) {
    throw ConfigError(context + "." + key + ": " + e.what());
  }
}

inline FBSDEProblem parse_problem(const json& j, const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be an object");
  if (j.contains("registry")) {
    check_keys(j, {"registry", "params"}, context);
    RegistryParams params;
    if (j.contains("params")) {
      for (const auto& item : j.at("params").items()) {
        if (!item.value().is_number())
          throw ConfigError(context + ".params." + item.key() + " must be a number");
        params[item.key()] = item.value().get<double>();
      }
    }
    return make_registry_problem(j.at("registry").get<std::string>(), std::move(params));
  }

  check_keys(j, {"n", "d", "horizon", "x0", "growth_constant", "drift", "diffusion", "terminal",
                 "generator"},
             context);
  for (const char* key :
       {"n", "d", "horizon", "x0", "growth_constant", "drift", "diffusion", "terminal",
        "generator"})
    if (!j.contains(key)) throw ConfigError(context + " is missing required key '" + key + "'");

  FBSDEProblem p;
  p.n = j.at("n").get<std::size_t>();
  p.d = j.at("d").get<std::size_t>();
  p.horizon = j.at("horizon").get<double>();
  p.x0 = j.at("x0").get<std::vector<double>>();
  p.growth_c = j.at("growth_constant").get<double>();
  p.drift = dsl_coefficient(j, "drift", p.n, p.d, Arity{true, true, true, false},
                            OutputShape::VectorN, context);
  p.diffusion = dsl_coefficient(j, "diffusion", p.n, p.d, Arity{true, true, false, false},
                                OutputShape::MatrixNxD, context);
  p.terminal = dsl_coefficient(j, "terminal", p.n, p.d, Arity{false, true, false, false},
                               OutputShape::VectorN, context);
  {
    const json& arr = j.at("generator");
    if (!arr.is_array() || arr.size() != p.n)
      throw ConfigError(context + ".generator must list exactly n expressions");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::vector<ExprAst> one;
      one.push_back(compile(arr.at(i).get<std::string>(), p.n, p.d,
                            context + ".generator[" + std::to_string(i) + "]"));
      p.generator.push_back(CoefficientFn::from_expressions(std::move(one),
                                                            Arity{true, true, true, true},
                                                            OutputShape::Scalar));
    }
  }
  return p;
}

inline NumericsConfig parse_numerics(const json& j) {
  check_keys(j,
             {"paths", "steps", "seed", "tolerance", "max_iterations", "basis_degree",
              "projection", "p_list", "inner_max_iterations", "inner_tolerance", "ridge",
              "z_truncation", "probe_count", "probe_radius", "alarm_threshold", "eps_mono"},
             "numerics");
  NumericsConfig n;
  n.paths = get_or<std::size_t>(j, "paths", n.paths);
  n.steps = get_or<std::size_t>(j, "steps", n.steps);
  n.seed = get_or<std::uint64_t>(j, "seed", n.seed);
  n.tolerance = get_or<double>(j, "tolerance", n.tolerance);
  n.max_iterations = get_or<std::size_t>(j, "max_iterations", n.max_iterations);
  n.basis_degree = get_or<std::size_t>(j, "basis_degree", n.basis_degree);
  n.projection = get_or<bool>(j, "projection", n.projection);
  n.p_list = get_or<std::vector<double>>(j, "p_list", n.p_list);
  n.inner_max_iterations = get_or<std::size_t>(j, "inner_max_iterations", n.inner_max_iterations);
  n.inner_tolerance = get_or<double>(j, "inner_tolerance", n.inner_tolerance);
  n.ridge = get_or<double>(j, "ridge", n.ridge);
  if (j.contains("z_truncation")) {
    const json& z = j.at("z_truncation");
    if (z.is_string()) {
      if (z.get<std::string>() != "auto")
        throw ConfigError("numerics.z_truncation must be a number or \"auto\"");
      n.z_truncation_auto = true;
    } else if (z.is_number()) {
      n.z_truncation = z.get<double>();
    } else {
      throw ConfigError("numerics.z_truncation must be a number or \"auto\"");
    }
  }
  n.probe_count = get_or<std::size_t>(j, "probe_count", n.probe_count);
  n.probe_radius = get_or<double>(j, "probe_radius", n.probe_radius);
  n.alarm_threshold = get_or<double>(j, "alarm_threshold", n.alarm_threshold);
  n.eps_mono = get_or<double>(j, "eps_mono", n.eps_mono);
  return n;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using config_detail::check_keys;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  check_keys(j, {"problem", "numerics", "output_dir", "dump_paths", "compare"}, "config");
  if (!j.contains("problem")) throw ConfigError("config is missing 'problem'");

  ExperimentConfig cfg;
  cfg.problem = config_detail::parse_problem(j.at("problem"), "problem");
  if (j.contains("numerics")) cfg.numerics = config_detail::parse_numerics(j.at("numerics"));
  cfg.output_dir = config_detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.dump_paths = config_detail::get_or<bool>(j, "dump_paths", cfg.dump_paths);
  if (j.contains("compare")) {
    const auto& c = j.at("compare");
    check_keys(c, {"problem"}, "compare");
    if (!c.contains("problem")) throw ConfigError("compare is missing 'problem'");
    cfg.compare_problem = config_detail::parse_problem(c.at("problem"), "compare.problem");
  }

  const ValidationResult v = validate_problem(cfg.problem);
  if (!v.ok) {
    std::string msg = "problem fails validation:";
    for (const auto& d : v.defects) msg += " " + d + ";";
    throw ConfigError(msg);
  }
  if (cfg.compare_problem) {
    const ValidationResult vb = validate_problem(*cfg.compare_problem);
    if (!vb.ok) {
      std::string msg = "compare.problem fails validation:";
      for (const auto& d : vb.defects) msg += " " + d + ";";
      throw ConfigError(msg);
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace fbsde
