#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbsde/comparison.hpp"
#include "fbsde/registry.hpp"

using namespace fbsde;

namespace {

IterationConfig comparison_config() {
  IterationConfig cfg;
  cfg.paths = 2000;
  cfg.steps = 20;
  cfg.tolerance = 1e-3;
  cfg.seed = 11;
  cfg.max_outer_iterations = 12;
  cfg.envelope_projection = false;
  return cfg;
}

}  // namespace

TEST_CASE("ordering hypotheses hold reflexively") {
  const FBSDEProblem p = make_registry_problem("coupled-smooth");
  const OrderingHypothesisReport rep = verify_ordering_hypotheses(p, p, 200, 3);
  CHECK(rep.pass());
  CHECK(rep.x0_ordered);
}

TEST_CASE("shifted terminal keeps the hypotheses") {
  const FBSDEProblem a = make_registry_problem("coupled-smooth", {{"growth_constant", 1.2}});
  const FBSDEProblem b = make_registry_problem(
      "coupled-smooth", {{"growth_constant", 1.2}, {"terminal_shift", 0.1}});
  CHECK(verify_ordering_hypotheses(a, b, 200, 3).pass());
}

TEST_CASE("reversed drift order fails with a witness") {
  const FBSDEProblem a = make_registry_problem("coupled-smooth");
  const FBSDEProblem b = make_registry_problem("coupled-smooth", {{"drift_shift", -1.0}});
  const OrderingHypothesisReport rep = verify_ordering_hypotheses(a, b, 200, 3);
  CHECK_FALSE(rep.pass());
  const AssumptionCheck* h5 = rep.cone.find("H5");
  REQUIRE(h5 != nullptr);
  CHECK_FALSE(h5->pass);
  CHECK(h5->worst == Catch::Approx(1.0).margin(0.4));
  CHECK(h5->witness.x.size() == 1);
}

TEST_CASE("differing diffusions are structurally rejected") {
  const FBSDEProblem a = make_registry_problem("coupled-smooth");   // sigma = 1
  const FBSDEProblem b = make_registry_problem("trivial-zero");     // sigma = 0
  CHECK_THROWS_AS(verify_ordering_hypotheses(a, b, 50, 3), HypothesisError);
}

TEST_CASE("identical problems compare as an exact fixed point") {
  const FBSDEProblem p = make_registry_problem("coupled-smooth");
  const ComparisonReport rep = run_comparison(p, p, comparison_config());
  CHECK(rep.x_order.fraction == 0.0);
  CHECK(rep.y_order.fraction == 0.0);
  CHECK(rep.x_order.worst == 0.0);
  CHECK(rep.y_order.worst == 0.0);
  for (const auto& node : rep.nodes) {
    CHECK(node.mean_gap_x == 0.0);
    CHECK(node.mean_gap_y == 0.0);
  }
  CHECK(rep.gap_y0 == 0.0);
}

TEST_CASE("shifted terminal produces an ordered pair with a positive mean gap") {
  const FBSDEProblem a = make_registry_problem("coupled-smooth", {{"growth_constant", 1.2}});
  const FBSDEProblem b = make_registry_problem(
      "coupled-smooth", {{"growth_constant", 1.2}, {"terminal_shift", 0.1}});
  const ComparisonReport rep = run_comparison(a, b, comparison_config());
  CHECK(rep.x_order.fraction <= 0.01);
  CHECK(rep.y_order.fraction <= 0.01);
  CHECK(rep.gap_y0 > 0.0);
  CHECK(rep.gap_y0 > 3.0 * rep.gap_y0_se);
  // the run metadata must agree between the two runs
  CHECK(rep.run_a.seed == rep.run_b.seed);
  CHECK(rep.run_a.paths == rep.run_b.paths);
  CHECK(rep.run_a.steps == rep.run_b.steps);
  CHECK(rep.run_a.basis_degree == rep.run_b.basis_degree);
}

TEST_CASE("shifted initial state produces ordered forward and backward processes") {
  const FBSDEProblem a = make_registry_problem("coupled-smooth");
  const FBSDEProblem b = make_registry_problem("coupled-smooth", {{"x0_shift", 0.5}});
  const ComparisonReport rep = run_comparison(a, b, comparison_config());
  CHECK(rep.x_order.fraction <= 0.01);
  CHECK(rep.y_order.fraction <= 0.01);
  CHECK(rep.nodes.front().mean_gap_x == Catch::Approx(0.5).margin(1e-12));
  CHECK(rep.gap_y0 > 0.0);
}

TEST_CASE("failed hypotheses abort the comparison run") {
  const FBSDEProblem a = make_registry_problem("coupled-smooth");
  const FBSDEProblem b = make_registry_problem("coupled-smooth", {{"drift_shift", -1.0}});
  CHECK_THROWS_AS(run_comparison(a, b, comparison_config()), HypothesisError);
}
