#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbsde/model.hpp"
#include "fbsde/registry.hpp"
#include "test_support.hpp"

using namespace fbsde;
using test_support::dsl_problem;

TEST_CASE("validate_problem accepts consistent instances") {
  const FBSDEProblem p = make_registry_problem("trivial-zero");
  CHECK(validate_problem(p).ok);
  const FBSDEProblem q =
      dsl_problem(2, 2, 1.0, {0.0, 0.0}, 1.0, {"0", "0"}, {{"1", "0"}, {"0", "1"}}, {"0", "0"},
                  {"0", "0"});
  CHECK(validate_problem(q).ok);
}

TEST_CASE("validate_problem flags shape and positivity defects") {
  FBSDEProblem p = make_registry_problem("trivial-zero");

  SECTION("sigma declared with the wrong output shape") {
    // declared to output 2x1 in a problem with n = 1
    p.diffusion = CoefficientFn::builtin("bad-sigma", Arity{}, OutputShape::MatrixNxD, 2,
                                         [](double, auto, auto, auto, std::span<double> out) {
                                           out[0] = out[1] = 0.0;
                                         });
    const ValidationResult r = validate_problem(p);
    CHECK_FALSE(r.ok);
    bool found = false;
    for (const auto& d : r.defects) found = found || d.find("n x d") != std::string::npos;
    CHECK(found);
  }

  SECTION("non-positive horizon") {
    p.horizon = 0.0;
    CHECK_FALSE(validate_problem(p).ok);
  }

  SECTION("non-positive growth constant") {
    p.growth_c = 0.0;
    CHECK_FALSE(validate_problem(p).ok);
  }

  SECTION("x0 length") {
    p.x0 = {0.0, 1.0};
    CHECK_FALSE(validate_problem(p).ok);
  }

  SECTION("generator count") {
    p.generator.clear();
    CHECK_FALSE(validate_problem(p).ok);
  }
}

TEST_CASE("coefficients cannot read variables outside their arity") {
  std::vector<ExprAst> comps;
  comps.push_back(ExprAst::parse("y1", 1, 1));
  // terminal h reads only x
  CHECK_THROWS_AS(CoefficientFn::from_expressions(std::move(comps),
                                                  Arity{false, true, false, false},
                                                  OutputShape::VectorN),
                  ConfigError);
}

TEST_CASE("growth/Lipschitz probes pass on zero coefficients") {
  const FBSDEProblem p = make_registry_problem("trivial-zero");
  const AssumptionReport rep = probe_growth_lipschitz(p, 200, 5.0, 42);
  CHECK(rep.all_pass());
  for (const auto& c : rep.checks) CHECK(c.worst == 0.0);
}

TEST_CASE("quadratic generator satisfies the A4 growth bound with C = 1") {
  const FBSDEProblem p =
      dsl_problem(1, 1, 1.0, {0.0}, 1.0, {"0"}, {{"0"}}, {"0"}, {"z1^2"});
  const AssumptionReport rep = probe_growth_lipschitz(p, 500, 5.0, 7);
  const AssumptionCheck* a4 = rep.find("A4");
  REQUIRE(a4 != nullptr);
  CHECK(a4->pass);
  CHECK(a4->worst <= 1.0 + 1e-6);
}

TEST_CASE("drift 2x with C = 1 fails A1 with a witness") {
  const FBSDEProblem p =
      dsl_problem(1, 1, 1.0, {0.0}, 1.0, {"2*x1"}, {{"0"}}, {"0"}, {"0"});
  const AssumptionReport rep = probe_growth_lipschitz(p, 500, 10.0, 7);
  const AssumptionCheck* a1 = rep.find("A1");
  REQUIRE(a1 != nullptr);
  CHECK_FALSE(a1->pass);
  CHECK(a1->worst > 1.0 + 1e-6);
  CHECK(a1->worst == Catch::Approx(2.0).margin(0.4));  // Lipschitz ratio approaches 2
  CHECK(a1->witness.x.size() == 1);
  CHECK_FALSE(rep.all_pass());
}

TEST_CASE("quasi-monotonicity probes") {
  SECTION("b = y is monotone") {
    const FBSDEProblem p =
        dsl_problem(1, 1, 1.0, {0.0}, 1.0, {"y1"}, {{"0"}}, {"0"}, {"0"});
    CHECK(probe_quasi_monotonicity(p, 300, 3.0, 9).all_pass());
  }

  SECTION("h = -x is antitone and fails A6 with the offset magnitude") {
    const FBSDEProblem p =
        dsl_problem(1, 1, 1.0, {0.0}, 1.0, {"0"}, {{"0"}}, {"-x1"}, {"0"});
    const AssumptionReport rep = probe_quasi_monotonicity(p, 300, 3.0, 9);
    const AssumptionCheck* a6 = rep.find("A6");
    REQUIRE(a6 != nullptr);
    CHECK_FALSE(a6->pass);
    CHECK(a6->worst > 0.0);
    // violation magnitude is exactly the componentwise offset x_bar - x
    CHECK(a6->worst ==
          Catch::Approx(a6->witness.x_bar[0] - a6->witness.x[0]).epsilon(1e-12));
  }

  SECTION("g = tanh(x1) + z1^2 is monotone in x") {
    const FBSDEProblem p =
        dsl_problem(1, 1, 1.0, {0.0}, 1.0, {"0"}, {{"0"}}, {"0"}, {"tanh(x1) + z1^2"});
    CHECK(probe_quasi_monotonicity(p, 300, 3.0, 9).all_pass());
  }
}

TEST_CASE("probes are deterministic in the seed") {
  const FBSDEProblem p = make_registry_problem("coupled-smooth");
  const AssumptionReport a = probe_growth_lipschitz(p, 128, 4.0, 31);
  const AssumptionReport b = probe_growth_lipschitz(p, 128, 4.0, 31);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].worst == b.checks[i].worst);
    CHECK(a.checks[i].witness.t == b.checks[i].witness.t);
  }
  const AssumptionReport c = probe_growth_lipschitz(p, 128, 4.0, 32);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.checks.size(); ++i)
    any_diff = any_diff || a.checks[i].worst != c.checks[i].worst;
  CHECK(any_diff);
}

TEST_CASE("zero DSL expression passes the growth probes for any C") {
  for (double c : {0.1, 1.0, 25.0}) {
    const FBSDEProblem p = dsl_problem(1, 1, 1.0, {0.0}, c, {"0"}, {{"0"}}, {"0"}, {"0"});
    CHECK(probe_growth_lipschitz(p, 100, 8.0, 3).all_pass());
  }
}

TEST_CASE("a passing report holds no witness beyond tolerance") {
  const FBSDEProblem p = make_registry_problem("decoupled-quadratic");
  const AssumptionReport growth = probe_growth_lipschitz(p, 400, 5.0, 12);
  CHECK(growth.all_pass());
  for (const auto& c : growth.checks) CHECK(c.worst <= c.threshold);
  const AssumptionReport mono = probe_quasi_monotonicity(p, 400, 5.0, 12);
  CHECK(mono.all_pass());
  for (const auto& c : mono.checks) CHECK(c.worst <= c.threshold);
}

TEST_CASE("coefficient evaluation failures surface as errors") {
  // log(x1) is NaN on half the sampled ball
  const FBSDEProblem p =
      dsl_problem(1, 1, 1.0, {0.0}, 1.0, {"log(x1)"}, {{"0"}}, {"0"}, {"0"});
  CHECK_THROWS_AS(probe_growth_lipschitz(p, 200, 5.0, 3), EvaluationError);
}
