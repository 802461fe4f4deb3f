#pragma once

// Empirical conditional expectations: polynomial feature map in the
// conditioning state and a ridge-regularized normal-equation solve
// (shared Gram factorization across the right-hand sides of one time step).

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "fbsde/common.hpp"

namespace fbsde {

// Monomials of total degree <= degree in state_dim variables, enumerated in
// graded lexicographic order (so index 0 is always the intercept).
class RegressionBasis {
 public:
  RegressionBasis() = default;
  RegressionBasis(std::size_t degree, std::size_t state_dim)
      : degree_(degree), state_dim_(state_dim) {
    std::vector<unsigned> current(state_dim, 0u);
    for (std::size_t total = 0; total <= degree; ++total) enumerate(current, 0, total);
  }

  std::size_t degree() const noexcept { return degree_; }
  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t feature_count() const noexcept { return exponents_.size(); }

  void features(std::span<const double> state, std::span<double> out) const {
    for (std::size_t f = 0; f < exponents_.size(); ++f) {
      double v = 1.0;
      const auto& e = exponents_[f];
      for (std::size_t c = 0; c < state_dim_; ++c)
        for (unsigned k = 0; k < e[c]; ++k) v *= state[c];
      out[f] = v;
    }
  }

 private:
  void enumerate(std::vector<unsigned>& current, std::size_t pos, std::size_t remaining) {
    if (pos + 1 == current.size()) {
      current[pos] = static_cast<unsigned>(remaining);
      exponents_.push_back(current);
      return;
    }
    for (std::size_t k = 0; k <= remaining; ++k) {
      current[pos] = static_cast<unsigned>(remaining - k);
      enumerate(current, pos + 1, k);
    }
  }

  std::size_t degree_ = 0;
  std::size_t state_dim_ = 0;
  std::vector<std::vector<unsigned>> exponents_;
};

struct RegressionResult {
  std::vector<double> coefficients;  // length F
  std::vector<double> fitted;        // length M, features . coefficients per row
};

// One factorization of (Phi' Phi + lambda I), reused for many targets.
// The feature buffer is caller-owned and must outlive the kernel.
class RegressionKernel {
 public:
  using RowMajorMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  // features: row-major rows x cols
  RegressionKernel(const std::vector<double>& features, std::size_t rows, std::size_t cols)
      : feat_(features.data()), rows_(rows), cols_(cols) {
    if (features.size() != rows * cols)
      throw RegressionError("regression: feature buffer size mismatch");
    if (cols > rows) throw RegressionError("regression: more features than paths");
    const RowMajorMap phi(feat_, rows_, cols_);
    gram_ = phi.transpose() * phi;
  }

  double max_gram_diagonal() const { return gram_.diagonal().maxCoeff(); }

  void factor(double lambda) {
    if (lambda < 0.0) throw RegressionError("regression: negative ridge parameter");
    Eigen::MatrixXd a = gram_;
    a.diagonal().array() += lambda;
    ldlt_.compute(a);
    const auto dvec = ldlt_.vectorD();
    const double dmax = dvec.maxCoeff();
    const double dmin = dvec.minCoeff();
    if (!(dmax > 0.0) || dmin <= dmax * 1e-13)
      throw RegressionError("regression: rank-deficient design matrix (increase ridge)");
    factored_ = true;
  }

  RegressionResult fit(std::span<const double> targets) const {
    if (!factored_) throw RegressionError("regression: kernel not factored");
    if (targets.size() != rows_) throw RegressionError("regression: target length mismatch");
    const RowMajorMap phi(feat_, rows_, cols_);
    Eigen::Map<const Eigen::VectorXd> y(targets.data(), rows_);
    Eigen::VectorXd beta = ldlt_.solve(phi.transpose() * y);
    RegressionResult r;
    r.coefficients.assign(beta.data(), beta.data() + cols_);
    r.fitted.resize(rows_);
    Eigen::Map<Eigen::VectorXd>(r.fitted.data(), rows_) = phi * beta;
    return r;
  }

  // largest hat-matrix diagonal phi_m' (Gram + lambda)^{-1} phi_m; the
  // worst-point leverage of the fit (in (0, 1])
  double max_leverage() const {
    if (!factored_) throw RegressionError("regression: kernel not factored");
    const RowMajorMap phi(feat_, rows_, cols_);
    const Eigen::MatrixXd b = ldlt_.solve(phi.transpose());  // cols x rows
    double h = 0.0;
    for (std::size_t m = 0; m < rows_; ++m) {
      double v = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) v += feat_[m * cols_ + c] * b(c, m);
      h = std::max(h, v);
    }
    return h;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

 private:
  const double* feat_;
  std::size_t rows_, cols_;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool factored_ = false;
};

// Single-shot ridge regression of per-path scalar targets on per-path
// feature vectors; lambda is added to the Gram diagonal as given.
inline RegressionResult regress_conditional(std::span<const double> targets,
                                            const std::vector<double>& features,
                                            std::size_t feature_count, double lambda) {
  if (feature_count == 0) throw RegressionError("regression: empty feature map");
  const std::size_t rows = features.size() / feature_count;
  RegressionKernel kernel(features, rows, feature_count);
  kernel.factor(lambda);
  return kernel.fit(targets);
}

}  // namespace fbsde
