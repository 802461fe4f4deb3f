#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbsde/backward.hpp"
#include "fbsde/registry.hpp"
#include "test_support.hpp"

using namespace fbsde;
using test_support::dsl_problem;

namespace {

std::vector<CoefficientFn> dsl_generator(const std::string& expr, std::size_t n, std::size_t d) {
  std::vector<CoefficientFn> gen;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<ExprAst> one;
    one.push_back(ExprAst::parse(expr, n, d));
    gen.push_back(CoefficientFn::from_expressions(std::move(one), Arity{true, true, true, true},
                                                  OutputShape::Scalar));
  }
  return gen;
}

}  // namespace

TEST_CASE("constant terminal with zero driver is a constant martingale") {
  const TimeGrid grid = make_grid(1.0, 20);
  const std::size_t m_paths = 256;  // power of two keeps the intercept fit exact
  const BrownianBundle bundle = sample_brownian(m_paths, grid, 1, 3);
  const PathArray x = brownian_state_path(bundle, grid);
  const double c = 0.7;
  const std::vector<double> terminal(m_paths, c);
  BackwardOpts opts;
  opts.ridge = 0.0;
  const RegressionBasis intercept(0, 1);
  const BSDESolution sol = solve_bsde(dsl_generator("0", 1, 1), terminal, x, bundle, grid,
                                      intercept, opts);
  for (std::size_t m = 0; m < m_paths; ++m)
    for (std::size_t j = 0; j <= 20; ++j)
      CHECK_THAT(sol.y.at(m, j, 0), Catch::Matchers::WithinAbs(c, 1e-12));
  CHECK(sol.z.sup_abs() <= 1e-10);
}

TEST_CASE("constant driver integrates deterministically") {
  const TimeGrid grid = make_grid(2.0, 32);
  const std::size_t m_paths = 128;
  const BrownianBundle bundle = sample_brownian(m_paths, grid, 1, 5);
  const PathArray x = brownian_state_path(bundle, grid);
  const double c = 0.5, a = 0.3;
  const std::vector<double> terminal(m_paths, c);
  BackwardOpts opts;
  opts.ridge = 0.0;
  const BSDESolution sol = solve_bsde(dsl_generator("0.3", 1, 1), terminal, x, bundle, grid,
                                      RegressionBasis(0, 1), opts);
  CHECK_THAT(sol.y.at(0, 0, 0), Catch::Matchers::WithinAbs(c + a * 2.0, 1e-12));
}

TEST_CASE("terminal values are stored bit-exactly") {
  const TimeGrid grid = make_grid(1.0, 4);
  const BrownianBundle bundle = sample_brownian(64, grid, 1, 9);
  const PathArray x = brownian_state_path(bundle, grid);
  std::vector<double> terminal(64);
  RandomStream rs(1);
  for (auto& v : terminal) v = rs.uniform(-1.0, 1.0);
  const BSDESolution sol = solve_bsde(dsl_generator("0.5*y1 + z1", 1, 1), terminal, x, bundle,
                                      grid, RegressionBasis(2, 1), BackwardOpts{});
  for (std::size_t m = 0; m < 64; ++m) CHECK(sol.y.at(m, 4, 0) == terminal[m]);
}

TEST_CASE("bounding BSDE matches its ODE oracle") {
  // V = 0 reduces the dominating BSDE to U' = -C(1 + U), U(T) = C, so
  // U(0) = (1 + C) e^{CT} - 1
  const FBSDEProblem p = make_registry_problem("bounding-ode");
  const TimeGrid grid = make_grid(1.0, 500);
  const BrownianBundle bundle = sample_brownian(2048, grid, 1, 17);
  const RegressionBasis basis(3, 1);
  const BSDESolution u = solve_bounding_U(p, grid, bundle, basis, BackwardOpts{});
  const double oracle = 2.0 * std::exp(1.0) - 1.0;
  CHECK_THAT(u.y.at(0, 0, 0), Catch::Matchers::WithinRel(oracle, 1e-2));

  SECTION("terminal condition is exact") {
    for (std::size_t m = 0; m < 8; ++m) CHECK(u.y.at(m, grid.steps, 0) == p.growth_c);
  }
}

TEST_CASE("seed BSDE matches its ODE oracle and mirrors the bounding solve") {
  const FBSDEProblem p = make_registry_problem("bounding-ode");
  const TimeGrid grid = make_grid(1.0, 500);
  const BrownianBundle bundle = sample_brownian(2048, grid, 1, 17);
  const RegressionBasis basis(3, 1);
  const BSDESolution y0 = solve_seed_Y0(p, grid, bundle, basis, BackwardOpts{});
  const double oracle = 1.0 - 2.0 * std::exp(1.0);
  CHECK_THAT(y0.y.at(0, 0, 0), Catch::Matchers::WithinRel(oracle, 1e-2));
  for (std::size_t m = 0; m < 8; ++m) CHECK(y0.y.at(m, grid.steps, 0) == -p.growth_c);

  SECTION("sign symmetry against the bounding solve") {
    const BSDESolution u = solve_bounding_U(p, grid, bundle, basis, BackwardOpts{});
    CHECK_THAT(y0.y.at(0, 0, 0), Catch::Matchers::WithinAbs(-u.y.at(0, 0, 0), 1e-12));
  }
}

TEST_CASE("vanishing horizon pins the bounding solve at its terminal value") {
  const FBSDEProblem p = make_registry_problem("bounding-ode", {{"horizon", 1e-8}});
  const TimeGrid grid = make_grid(1e-8, 1);
  const BrownianBundle bundle = sample_brownian(64, grid, 1, 2);
  const BSDESolution u = solve_bounding_U(p, grid, bundle, RegressionBasis(0, 1), BackwardOpts{});
  CHECK_THAT(u.y.at(0, 0, 0), Catch::Matchers::WithinRel(1.0, 1e-6));
}

TEST_CASE("quadratic driver reproduces the exponential-transform closed form") {
  // g = z^2 / 2, terminal tanh(W_T):  Y_0 = ln E[exp(tanh(W_T))]
  const FBSDEProblem p = make_registry_problem("decoupled-quadratic");
  const TimeGrid grid = make_grid(1.0, 25);
  const std::size_t m_paths = 20000;
  const BrownianBundle bundle = sample_brownian(m_paths, grid, 1, 99);
  const PathArray w = brownian_state_path(bundle, grid);
  std::vector<double> terminal(m_paths);
  for (std::size_t m = 0; m < m_paths; ++m) terminal[m] = std::tanh(w.at(m, grid.steps, 0));

  const BSDESolution sol = solve_bsde(p.generator, terminal, w, bundle, grid,
                                      RegressionBasis(3, 1), BackwardOpts{});

  // independent plain Monte Carlo of the log-expectation
  RandomStream rs(123456);
  double acc = 0.0;
  const std::size_t oracle_samples = 400000;
  for (std::size_t i = 0; i < oracle_samples; ++i) acc += std::exp(std::tanh(rs.normal()));
  const double oracle = std::log(acc / static_cast<double>(oracle_samples));

  CHECK_THAT(sol.y.at(0, 0, 0), Catch::Matchers::WithinRel(oracle, 0.05));
}

TEST_CASE("ordered drivers on a shared bundle give ordered solutions") {
  // driver shifted up by a constant: Y_bar - Y ~ 0.1 (T - t) >= 0 pathwise
  const TimeGrid grid = make_grid(1.0, 20);
  const std::size_t m_paths = 4096;
  const BrownianBundle bundle = sample_brownian(m_paths, grid, 1, 21);
  const PathArray w = brownian_state_path(bundle, grid);
  std::vector<double> terminal(m_paths);
  for (std::size_t m = 0; m < m_paths; ++m) terminal[m] = std::tanh(w.at(m, grid.steps, 0));

  const RegressionBasis basis(3, 1);
  const BSDESolution lo = solve_bsde(dsl_generator("0.2*tanh(x1)", 1, 1), terminal, w, bundle,
                                     grid, basis, BackwardOpts{});
  const BSDESolution hi = solve_bsde(dsl_generator("0.2*tanh(x1) + 0.1", 1, 1), terminal, w,
                                     bundle, grid, basis, BackwardOpts{});
  for (std::size_t m = 0; m < m_paths; ++m)
    for (std::size_t j = 0; j <= 20; ++j)
      CHECK(lo.y.at(m, j, 0) <= hi.y.at(m, j, 0) + 1e-6);

  // the envelope bound: |Y| never leaves the dominating interval
  const FBSDEProblem pb = make_registry_problem("bounding-ode");
  const BSDESolution u = solve_bounding_U(pb, grid, bundle, basis, BackwardOpts{});
  const BSDESolution y0 = solve_seed_Y0(pb, grid, bundle, basis, BackwardOpts{});
  const double k_env = std::max(u.y.sup_abs(), y0.y.sup_abs());
  CHECK(lo.y.sup_abs() <= k_env + 3.0 * lo.fit_se_max);
}

TEST_CASE("inner fixed point reports non-contraction") {
  // y-Lipschitz constant 80 with dt = 0.5 cannot contract
  const TimeGrid grid = make_grid(1.0, 2);
  const BrownianBundle bundle = sample_brownian(64, grid, 1, 4);
  const PathArray w = brownian_state_path(bundle, grid);
  const std::vector<double> terminal(64, 1.0);
  CHECK_THROWS_AS(solve_bsde(dsl_generator("80*y1", 1, 1), terminal, w, bundle, grid,
                             RegressionBasis(1, 1), BackwardOpts{}),
                  SolverError);
}

TEST_CASE("z truncation caps row norms and counts activations") {
  const TimeGrid grid = make_grid(1.0, 10);
  const BrownianBundle bundle = sample_brownian(512, grid, 1, 8);
  const PathArray w = brownian_state_path(bundle, grid);
  std::vector<double> terminal(512);
  for (std::size_t m = 0; m < 512; ++m) terminal[m] = w.at(m, grid.steps, 0);  // Z ~ 1

  BackwardOpts opts;
  opts.z_truncation = 0.25;
  const BSDESolution sol = solve_bsde(dsl_generator("0", 1, 1), terminal, w, bundle, grid,
                                      RegressionBasis(3, 1), opts);
  CHECK(sol.truncation_total() > 0);
  CHECK(sol.z.sup_abs() <= 0.25 + 1e-12);

  BackwardOpts off;
  const BSDESolution free_sol = solve_bsde(dsl_generator("0", 1, 1), terminal, w, bundle, grid,
                                           RegressionBasis(3, 1), off);
  CHECK(free_sol.z.sup_abs() > 0.5);
  CHECK(free_sol.truncation_total() == 0);
}
