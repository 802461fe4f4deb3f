#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fbsde/diagnostics.hpp"
#include "fbsde/registry.hpp"
#include "test_support.hpp"

using namespace fbsde;
using test_support::dsl_problem;

TEST_CASE("norms of a constant process") {
  const TimeGrid grid = make_grid(2.0, 16);
  const double c = -1.5;
  const PathArray proc = PathArray::constant(32, 17, std::vector<double>{c});
  const std::vector<double> ps = {2.0, 4.0, 8.0};
  const NormReport rep = estimate_norms(proc, nullptr, grid, ps);
  CHECK(rep.s_inf == std::fabs(c));
  for (double sp : rep.s_p) CHECK_THAT(sp, Catch::Matchers::WithinRel(std::fabs(c), 1e-12));
  for (double hp : rep.h_p)
    CHECK_THAT(hp, Catch::Matchers::WithinRel(std::fabs(c) * std::sqrt(2.0), 1e-12));
  CHECK_FALSE(rep.bmo2.has_value());
}

TEST_CASE("BMO of the zero process is exactly zero") {
  const TimeGrid grid = make_grid(1.0, 8);
  const PathArray proc = PathArray::zeros(16, 9, 1);
  const PathArray z = PathArray::zeros(16, 8, 1);
  const NormReport rep = estimate_norms(proc, &z, grid, {}, RegressionBasis(0, 1));
  REQUIRE(rep.bmo2.has_value());
  CHECK(*rep.bmo2 == 0.0);
}

TEST_CASE("BMO of unit Z over unit horizon is one") {
  const TimeGrid grid = make_grid(1.0, 40);
  const PathArray proc = PathArray::zeros(64, 41, 1);
  const PathArray z = PathArray::constant(64, 40, std::vector<double>{1.0});
  const NormReport rep = estimate_norms(proc, &z, grid, {}, RegressionBasis(0, 1));
  REQUIRE(rep.bmo2.has_value());
  CHECK_THAT(*rep.bmo2, Catch::Matchers::WithinRel(1.0, 1e-6));
}

TEST_CASE("power-mean ordering of the S^p family") {
  RandomStream rs(44);
  PathArray proc = PathArray::zeros(200, 21, 2);
  for (double& v : proc.values) v = rs.normal();
  const TimeGrid grid = make_grid(1.0, 20);
  const std::vector<double> ps = {2.0, 4.0, 8.0};
  const NormReport rep = estimate_norms(proc, nullptr, grid, ps);
  CHECK(rep.s_p[0] <= rep.s_p[1]);
  CHECK(rep.s_p[1] <= rep.s_p[2]);
  CHECK(rep.s_p[2] <= rep.s_inf);
  CHECK(rep.h_p[0] <= rep.h_p[1]);
  CHECK(rep.h_p[1] <= rep.h_p[2]);
}

TEST_CASE("BMO estimate is invariant under path permutation") {
  RandomStream rs(13);
  const std::size_t m_paths = 128, steps = 10;
  PathArray cond = PathArray::zeros(m_paths, steps + 1, 1);
  PathArray z = PathArray::zeros(m_paths, steps, 1);
  for (double& v : cond.values) v = rs.normal();
  for (double& v : z.values) v = rs.normal();
  const TimeGrid grid = make_grid(1.0, steps);
  const RegressionBasis basis(2, 1);
  const NormReport a = estimate_norms(cond, &z, grid, {}, basis);

  std::vector<std::size_t> perm(m_paths);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  PathArray cond_p = cond, z_p = z;
  for (std::size_t m = 0; m < m_paths; ++m) {
    for (std::size_t j = 0; j <= steps; ++j) cond_p.at(m, j, 0) = cond.at(perm[m], j, 0);
    for (std::size_t j = 0; j < steps; ++j) z_p.at(m, j, 0) = z.at(perm[m], j, 0);
  }
  const NormReport b = estimate_norms(cond_p, &z_p, grid, {}, basis);
  CHECK_THAT(*a.bmo2, Catch::Matchers::WithinAbs(*b.bmo2, 1e-10));
}

TEST_CASE("phi function values and defining identity") {
  CHECK(phi_function(0.0, 1.0) == 0.0);
  CHECK(phi_function(0.0, 0.25) == 0.0);
  // C = 0.5: phi(1) = e - 2 by direct evaluation
  CHECK_THAT(phi_function(1.0, 0.5),
             Catch::Matchers::WithinAbs(std::exp(1.0) - 2.0, 1e-12));

  // phi'' - 2C|phi'| = 1, probed by central finite differences
  RandomStream rs(5);
  for (int i = 0; i < 50; ++i) {
    const double c = rs.uniform(0.1, 2.0);
    const double x = rs.uniform(-2.0, 2.0);
    const double h = 1e-5;
    const double d2 =
        (phi_function(x + h, c) - 2.0 * phi_function(x, c) + phi_function(x - h, c)) / (h * h);
    const double d1 = (phi_function(x + h, c) - phi_function(x - h, c)) / (2.0 * h);
    CHECK_THAT(d2 - 2.0 * c * std::fabs(d1), Catch::Matchers::WithinAbs(1.0, 1e-3));
    CHECK_THAT(d1, Catch::Matchers::WithinAbs(phi_derivative(x, c), 1e-4));
  }
}

TEST_CASE("phi bound check passes trivially on the zero instance") {
  const FBSDEProblem p = make_registry_problem("trivial-zero");
  const TimeGrid grid = make_grid(1.0, 8);
  const PathArray z = PathArray::zeros(16, 8, 1);
  const PathArray cond = PathArray::zeros(16, 9, 1);
  const PhiBoundReport rep = phi_bound_check(2.0, z, p, grid, RegressionBasis(0, 1), cond);
  CHECK(rep.left == 0.0);
  CHECK(rep.ceiling > 0.0);
  CHECK(rep.pass);
}

TEST_CASE("residual check on exact discrete solutions and injected defects") {
  const FBSDEProblem p = make_registry_problem("trivial-zero");
  const TimeGrid grid = make_grid(1.0, 10);
  const BrownianBundle bundle = sample_brownian(32, grid, 1, 6);
  const PathArray x = PathArray::zeros(32, 11, 1);
  PathArray y = PathArray::zeros(32, 11, 1);
  const PathArray z = PathArray::zeros(32, 10, 1);

  const ResidualReport clean = residual_check(p, x, y, z, bundle, grid);
  CHECK(clean.forward_max <= 1e-12);
  CHECK(clean.backward_max <= 1e-12);
  CHECK(clean.terminal_max <= 1e-12);

  y.at(7, 4, 0) += 1.0;  // corrupt one node
  const ResidualReport dirty = residual_check(p, x, y, z, bundle, grid);
  CHECK(dirty.backward_max >= 1.0 - 1e-12);
}

TEST_CASE("residual check rejects mismatched shapes") {
  const FBSDEProblem p = make_registry_problem("trivial-zero");
  const TimeGrid grid = make_grid(1.0, 10);
  const BrownianBundle bundle = sample_brownian(32, grid, 1, 6);
  const PathArray x = PathArray::zeros(32, 11, 1);
  const PathArray y = PathArray::zeros(32, 10, 1);  // wrong node count
  const PathArray z = PathArray::zeros(32, 10, 1);
  CHECK_THROWS_AS(residual_check(p, x, y, z, bundle, grid), std::invalid_argument);
}
