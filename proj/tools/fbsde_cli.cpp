// Experiment driver.  Subcommands:
//
//   solve   <config>   assumption probes, monotone iteration, diagnostics
//   compare <config>   dual ordered run on shared noise (needs compare.problem)
//   check   <config>   assumption probes only
//
// Exit codes: 0 success, 1 numerical failure, 2 config/validation failure,
// 3 hypothesis failure (compare).

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fbsde/fbsde.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;
constexpr int kExitHypothesis = 3;

struct Overrides {
  std::optional<std::size_t> paths, steps, max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<std::string> output_dir;
  bool no_projection = false;
};

void apply(const Overrides& o, fbsde::ExperimentConfig& cfg) {
  if (o.paths) cfg.numerics.paths = *o.paths;
  if (o.steps) cfg.numerics.steps = *o.steps;
  if (o.seed) cfg.numerics.seed = *o.seed;
  if (o.tol) cfg.numerics.tolerance = *o.tol;
  if (o.max_iter) cfg.numerics.max_iterations = *o.max_iter;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.no_projection) cfg.numerics.projection = false;
}

fbsde::AssumptionReport run_probes(const fbsde::FBSDEProblem& p, const fbsde::NumericsConfig& n) {
  fbsde::AssumptionReport growth =
      fbsde::probe_growth_lipschitz(p, n.probe_count, n.probe_radius, n.seed);
  const fbsde::AssumptionReport mono =
      fbsde::probe_quasi_monotonicity(p, n.probe_count, n.probe_radius, n.seed);
  for (const auto& c : mono.checks) growth.checks.push_back(c);
  return growth;
}

// a-priori truncation level from the phi estimate: twice the single-step cap
// implied by (1/2) E_t int |Z|^2 <= phi(K) + C T phi'(K)(1 + K), with the
// C,T-only bound K = (1+C) e^{CT} - 1 of the dominating ODE.
double auto_z_truncation(const fbsde::FBSDEProblem& p, double dt) {
  const double C = p.growth_c;
  const double K = (1.0 + C) * std::exp(C * p.horizon) - 1.0;
  const double ceiling = fbsde::phi_function(K, C) +
                         C * p.horizon * fbsde::phi_derivative(K, C) * (1.0 + K);
  return 2.0 * std::sqrt(2.0 * ceiling / dt);
}

void write_solve_outputs(const std::string& dir, const fbsde::AssumptionReport& probes,
                         const fbsde::FBSDEProblem& p, const fbsde::ExperimentConfig& cfg,
                         const fbsde::PicardResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  fbsde::write_json_file(dir + "/assumptions.json", fbsde::to_json(probes));
  fbsde::write_json_file(dir + "/convergence.json", fbsde::to_json(result.report));
  fbsde::write_text_file(dir + "/history.csv", fbsde::history_csv(result.report.history));

  const fbsde::RegressionBasis basis(cfg.numerics.basis_degree, p.n);
  const fbsde::NormReport norm_x =
      fbsde::estimate_norms(result.x, nullptr, result.grid, cfg.numerics.p_list);
  const fbsde::NormReport norm_y = fbsde::estimate_norms(
      result.y, &result.z, result.grid, cfg.numerics.p_list, basis, &result.x,
      cfg.numerics.ridge);
  const fbsde::PhiBoundReport phi =
      fbsde::phi_bound_check(result.report.norm_u_sinf, result.z, p, result.grid, basis, result.x,
                             cfg.numerics.ridge);
  nlohmann::json norms;
  norms["x"] = fbsde::to_json(norm_x);
  norms["y"] = fbsde::to_json(norm_y);
  norms["phi_bound"] = fbsde::to_json(phi);
  fbsde::write_json_file(dir + "/norms.json", norms);

  fbsde::write_json_file(dir + "/residuals.json", fbsde::to_json(result.report.residuals));

  if (cfg.dump_paths) {
    const fbsde::PathDumpHeader head{cfg.numerics.paths, cfg.numerics.steps, p.n, p.d};
    fbsde::write_path_dump(dir + "/x.bin", result.x, head);
    fbsde::write_path_dump(dir + "/y.bin", result.y, head);
    fbsde::write_path_dump(dir + "/z.bin", result.z, head);
  }
}

int cmd_solve(const std::string& config_path, const Overrides& overrides) {
  fbsde::ExperimentConfig cfg = fbsde::load_config(config_path);
  apply(overrides, cfg);

  const fbsde::AssumptionReport probes = run_probes(cfg.problem, cfg.numerics);
  if (!probes.all_pass())
    std::cerr << "warning: assumption probes report violations; see assumptions.json\n";

  fbsde::IterationConfig icfg = cfg.iteration_config();
  if (cfg.numerics.z_truncation_auto)
    icfg.backward.z_truncation =
        auto_z_truncation(cfg.problem, cfg.problem.horizon / static_cast<double>(icfg.steps));

  const auto t0 = std::chrono::steady_clock::now();
  fbsde::PicardResult result = fbsde::run(cfg.problem, icfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_solve_outputs(cfg.output_dir, probes, cfg.problem, cfg, result);

  std::cerr << "solve: " << (result.report.converged ? "converged" : "NOT converged") << " at k="
            << result.report.iterations << ", supdiff_x=" << result.report.final_supdiff_x
            << ", supdiff_y=" << result.report.final_supdiff_y << ", " << elapsed << " s\n";
  return result.report.converged ? kExitOk : kExitNumerical;
}

int cmd_compare(const std::string& config_path, const Overrides& overrides) {
  fbsde::ExperimentConfig cfg = fbsde::load_config(config_path);
  apply(overrides, cfg);
  if (!cfg.compare_problem)
    throw fbsde::ConfigError("compare requires a 'compare.problem' entry in the config");

  fbsde::IterationConfig icfg = cfg.iteration_config();
  if (cfg.numerics.z_truncation_auto)
    icfg.backward.z_truncation =
        auto_z_truncation(cfg.problem, cfg.problem.horizon / static_cast<double>(icfg.steps));

  const fbsde::ComparisonReport rep = fbsde::run_comparison(
      cfg.problem, *cfg.compare_problem, icfg, cfg.numerics.probe_count, cfg.numerics.probe_radius);

  std::filesystem::create_directories(cfg.output_dir);
  fbsde::write_json_file(cfg.output_dir + "/comparison.json", fbsde::to_json(rep));
  fbsde::write_text_file(cfg.output_dir + "/gaps.csv", fbsde::gap_csv(rep));

  const bool ok = rep.ordering_ok(cfg.numerics.alarm_threshold);
  std::cerr << "compare: ordering " << (ok ? "holds" : "VIOLATED") << " (frac_x="
            << rep.x_order.fraction << ", frac_y=" << rep.y_order.fraction << ", gap_y0="
            << rep.gap_y0 << ")\n";
  return ok ? kExitOk : kExitNumerical;
}

int cmd_check(const std::string& config_path, const Overrides& overrides) {
  fbsde::ExperimentConfig cfg = fbsde::load_config(config_path);
  apply(overrides, cfg);
  const fbsde::AssumptionReport probes = run_probes(cfg.problem, cfg.numerics);
  std::filesystem::create_directories(cfg.output_dir);
  fbsde::write_json_file(cfg.output_dir + "/assumptions.json", fbsde::to_json(probes));
  for (const auto& c : probes.checks)
    std::cerr << "check " << c.id << ": " << (c.pass ? "pass" : "FAIL") << " (worst " << c.worst
              << ", " << c.worst_kind << ")\n";
  return probes.all_pass() ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monotone Picard solver for coupled FBSDEs with diagonally quadratic drivers"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  std::size_t paths = 0, steps = 0, max_iter = 0;
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::string output_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--paths", paths, "override numerics.paths");
    sub->add_option("--steps", steps, "override numerics.steps");
    sub->add_option("--seed", seed, "override numerics.seed");
    sub->add_option("--tol", tol, "override numerics.tolerance");
    sub->add_option("--max-iter", max_iter, "override numerics.max_iterations");
    sub->add_option("--output-dir", output_dir, "override output directory");
    sub->add_flag("--no-projection", overrides.no_projection, "disable envelope projection");
  };

  CLI::App* solve = app.add_subcommand("solve", "run the monotone iteration and diagnostics");
  CLI::App* compare = app.add_subcommand("compare", "solve two ordered problems on shared noise");
  CLI::App* check = app.add_subcommand("check", "run the assumption probes only");
  add_common(solve);
  add_common(compare);
  add_common(check);

  CLI11_PARSE(app, argc, argv);

  auto grab = [&](const CLI::App* sub) {
    if (sub->count("--paths")) overrides.paths = paths;
    if (sub->count("--steps")) overrides.steps = steps;
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--tol")) overrides.tol = tol;
    if (sub->count("--max-iter")) overrides.max_iter = max_iter;
    if (sub->count("--output-dir")) overrides.output_dir = output_dir;
  };

  try {
    if (solve->parsed()) {
      grab(solve);
      return cmd_solve(config_path, overrides);
    }
    if (compare->parsed()) {
      grab(compare);
      return cmd_compare(config_path, overrides);
    }
    grab(check);
    return cmd_check(config_path, overrides);
  } catch (const fbsde::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fbsde::HypothesisError& e) {
    std::cerr << "hypothesis failure: " << e.what() << '\n';
    return kExitHypothesis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
