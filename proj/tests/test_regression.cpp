#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbsde/regression.hpp"
#include "fbsde/rng.hpp"

using fbsde::RegressionBasis;
using fbsde::RegressionError;
using fbsde::RegressionResult;
using fbsde::regress_conditional;

namespace {

// independent oracle: normal equations assembled and solved in long double
// with Gaussian elimination and partial pivoting
std::vector<double> normal_equation_oracle(const std::vector<double>& features, std::size_t rows,
                                           std::size_t cols, const std::vector<double>& targets,
                                           double lambda) {
  std::vector<long double> a(cols * cols, 0.0L), rhs(cols, 0.0L);
  for (std::size_t m = 0; m < rows; ++m) {
    const double* f = features.data() + m * cols;
    for (std::size_t i = 0; i < cols; ++i) {
      rhs[i] += static_cast<long double>(f[i]) * targets[m];
      for (std::size_t j = 0; j < cols; ++j)
        a[i * cols + j] += static_cast<long double>(f[i]) * f[j];
    }
  }
  for (std::size_t i = 0; i < cols; ++i) a[i * cols + i] += lambda;

  for (std::size_t col = 0; col < cols; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < cols; ++r)
      if (std::fabs(static_cast<double>(a[r * cols + col])) >
          std::fabs(static_cast<double>(a[pivot * cols + col])))
        pivot = r;
    for (std::size_t c = 0; c < cols; ++c) std::swap(a[col * cols + c], a[pivot * cols + c]);
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < cols; ++r) {
      const long double factor = a[r * cols + col] / a[col * cols + col];
      for (std::size_t c = col; c < cols; ++c) a[r * cols + c] -= factor * a[col * cols + c];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::vector<double> beta(cols);
  for (std::size_t i = cols; i-- > 0;) {
    long double v = rhs[i];
    for (std::size_t j = i + 1; j < cols; ++j) v -= a[i * cols + j] * beta[j];
    beta[i] = static_cast<double>(v / a[i * cols + i]);
  }
  return beta;
}

}  // namespace

TEST_CASE("polynomial basis enumerates monomials up to total degree") {
  const RegressionBasis cubic(3, 1);
  REQUIRE(cubic.feature_count() == 4);
  double f[4];
  const double x[] = {2.0};
  cubic.features(x, f);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 2.0);
  CHECK(f[2] == 4.0);
  CHECK(f[3] == 8.0);

  const RegressionBasis quad2(2, 2);
  CHECK(quad2.feature_count() == 6);  // (2+2 choose 2)
  const RegressionBasis cubic3(3, 3);
  CHECK(cubic3.feature_count() == 20);  // (3+3 choose 3)
}

TEST_CASE("intercept-only regression fits the sample mean") {
  const std::vector<double> features(8, 1.0);
  const std::vector<double> targets = {1, 2, 3, 4, 5, 6, 7, 10};
  const RegressionResult r = regress_conditional(targets, features, 1, 0.0);
  const double mean = 38.0 / 8.0;
  for (double v : r.fitted) CHECK_THAT(v, Catch::Matchers::WithinULP(mean, 2));
}

TEST_CASE("exact linear relation is recovered with zero ridge") {
  fbsde::RandomStream rs(5);
  std::vector<double> features(64), targets(64);
  for (std::size_t m = 0; m < 64; ++m) {
    features[m] = rs.uniform(-4.0, 4.0);
    targets[m] = 2.0 * features[m];
  }
  const RegressionResult r = regress_conditional(targets, features, 1, 0.0);
  CHECK_THAT(r.coefficients[0], Catch::Matchers::WithinAbs(2.0, 1e-13));
  for (std::size_t m = 0; m < 64; ++m)
    CHECK_THAT(r.fitted[m], Catch::Matchers::WithinAbs(targets[m], 1e-12));
}

TEST_CASE("fitted values match the long-double normal-equation oracle") {
  fbsde::RandomStream rs(11);
  const std::size_t rows = 300, cols = 6;
  const RegressionBasis basis(5, 1);
  REQUIRE(basis.feature_count() == cols);
  std::vector<double> features(rows * cols), targets(rows);
  for (std::size_t m = 0; m < rows; ++m) {
    const double x[] = {rs.uniform(-2.0, 2.0)};
    basis.features(x, {features.data() + m * cols, cols});
    targets[m] = std::sin(3.0 * x[0]) + 0.1 * rs.normal();
  }
  const double lambda = 1e-8;
  const RegressionResult r = regress_conditional(targets, features, cols, lambda);
  const std::vector<double> beta = normal_equation_oracle(features, rows, cols, targets, lambda);
  for (std::size_t m = 0; m < rows; ++m) {
    double fit = 0.0;
    for (std::size_t c = 0; c < cols; ++c) fit += features[m * cols + c] * beta[c];
    CHECK_THAT(r.fitted[m], Catch::Matchers::WithinRel(fit, 1e-8));
  }
}

TEST_CASE("rank deficiency is rejected at zero ridge and rescued by ridge") {
  // duplicated column -> singular Gram
  std::vector<double> features;
  fbsde::RandomStream rs(2);
  for (std::size_t m = 0; m < 32; ++m) {
    const double v = rs.uniform(-1.0, 1.0);
    features.push_back(v);
    features.push_back(v);
  }
  std::vector<double> targets(32, 1.0);
  CHECK_THROWS_AS(regress_conditional(targets, features, 2, 0.0), RegressionError);
  CHECK_NOTHROW(regress_conditional(targets, features, 2, 1e-6));
  // more features than paths
  const std::vector<double> one_target = {1.0};
  const std::vector<double> two_features = {1.0, 2.0};
  CHECK_THROWS_AS(regress_conditional(one_target, two_features, 2, 0.0), RegressionError);
}
