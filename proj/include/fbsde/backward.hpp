#pragma once

// Least-squares Monte Carlo solver for diagonally quadratic BSDEs.
// Backward recursion j = N-1 .. 0 with explicit Z / implicit Y splitting:
//
//   m^i   = E_j[Y^i_{j+1}]                        (ridge regression on features of the state)
//   Z^i_j = E_j[(Y^i_{j+1} - m^i) dW_j'] / dt     (centered martingale-increment regression)
//   Y^i_j = m^i + g^i(t_j, X_j, Y_j, Z^i_j) dt    (fixed point over all components, Z frozen)
//
// The y-Lipschitz part of the driver gives the inner contraction (factor
// ~ C dt, which constrains how coarse the grid may be).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/model.hpp"
#include "fbsde/regression.hpp"
#include "fbsde/simulation.hpp"

namespace fbsde {

struct BackwardOpts {
  std::size_t inner_max_iterations = 64;
  double inner_tolerance = 1e-12;
  double z_truncation = 0.0;  // Z row-norm cap; 0 disables
  double ridge = 1e-8;        // relative: lambda = ridge * max Gram diagonal
};

struct StepDiagnostics {
  double inner_residual = 0.0;        // residual after the final inner iteration
  std::size_t inner_iterations = 0;
  std::size_t truncation_count = 0;   // Z rows capped at this step
  std::size_t mean_range_clips = 0;   // conditional-mean fits clamped to the target range
  double fit_rms_residual = 0.0;      // worst-component RMS residual of the E_j regression
  double fit_standard_error = 0.0;    // rms * sqrt(max leverage), worst-point SE of the fit
};

struct BSDESolution {
  PathArray y;                        // M x (N+1) x n
  PathArray z;                        // M x N x (n*d)
  std::vector<StepDiagnostics> steps; // index j = 0..N-1
  double fit_se_max = 0.0;            // max over steps of fit_standard_error
  double y0_standard_error = 0.0;     // SE of the node-0 value estimate

  std::size_t truncation_total() const {
    std::size_t s = 0;
    for (const auto& d : steps) s += d.truncation_count;
    return s;
  }
};

// Discretized driving Brownian path W_{t_j} (cumulative increment sums);
// the natural conditioning state for the bounding/seed solves.
inline PathArray brownian_state_path(const BrownianBundle& bundle, const TimeGrid& grid) {
  PathArray w = PathArray::zeros(bundle.paths, grid.steps + 1, bundle.dim);
  for (std::size_t m = 0; m < bundle.paths; ++m)
    for (std::size_t j = 0; j < grid.steps; ++j) {
      const auto dw = bundle.dw_row(m, j);
      for (std::size_t c = 0; c < bundle.dim; ++c)
        w.at(m, j + 1, c) = w.at(m, j, c) + dw[c];
    }
  return w;
}

inline BSDESolution solve_bsde(std::span<const CoefficientFn> generator,
                               std::span<const double> terminal_values,  // M x n row-major
                               const PathArray& x_path, const BrownianBundle& bundle,
                               const TimeGrid& grid, const RegressionBasis& basis,
                               const BackwardOpts& opts) {
  const std::size_t n = generator.size();
  const std::size_t d = bundle.dim;
  const std::size_t N = grid.steps;
  const std::size_t M = bundle.paths;
  const std::size_t F = basis.feature_count();
  if (terminal_values.size() != M * n)
    throw std::invalid_argument("solve_bsde: terminal value count mismatch");
  if (x_path.paths != M || x_path.nodes != N + 1 || x_path.dim != basis.state_dim())
    throw std::invalid_argument("solve_bsde: x_path does not match bundle/basis");
  if (opts.inner_max_iterations < 1 || !(opts.inner_tolerance > 0.0))
    throw std::invalid_argument("solve_bsde: bad inner iteration options");

  BSDESolution sol;
  sol.y = PathArray::zeros(M, N + 1, n);
  sol.z = PathArray::zeros(M, N, n * d);
  sol.steps.resize(N);

  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t i = 0; i < n; ++i) sol.y.at(m, N, i) = terminal_values[m * n + i];

  std::vector<double> features(M * F);
  std::vector<double> targets(M);
  std::vector<double> cond_mean(M * n);   // m^i per path
  std::vector<double> y_cur(M * n), y_next(M * n);

  for (std::size_t j_plus = N; j_plus > 0; --j_plus) {
    const std::size_t j = j_plus - 1;
    const double t = grid.nodes[j];

    for (std::size_t m = 0; m < M; ++m)
      basis.features(x_path.row(m, j), {features.data() + m * F, F});
    RegressionKernel kernel(features, M, F);
    kernel.factor(opts.ridge * kernel.max_gram_diagonal());

    StepDiagnostics& diag = sol.steps[j];

    // conditional means of Y_{j+1}, clamped to the target range (the true
    // conditional expectation lies in it; the clamp stops polynomial tail
    // extrapolation from leaving the attainable values)
    for (std::size_t i = 0; i < n; ++i) {
      double tmin = sol.y.at(0, j + 1, i), tmax = tmin;
      for (std::size_t m = 0; m < M; ++m) {
        targets[m] = sol.y.at(m, j + 1, i);
        tmin = std::min(tmin, targets[m]);
        tmax = std::max(tmax, targets[m]);
      }
      RegressionResult res = kernel.fit(targets);
      double ss = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        double fit = res.fitted[m];
        if (fit < tmin) {
          fit = tmin;
          ++diag.mean_range_clips;
        } else if (fit > tmax) {
          fit = tmax;
          ++diag.mean_range_clips;
        }
        cond_mean[m * n + i] = fit;
        const double r = targets[m] - fit;
        ss += r * r;
      }
      const double rms = std::sqrt(ss / static_cast<double>(M));
      if (rms > diag.fit_rms_residual) diag.fit_rms_residual = rms;
    }
    diag.fit_standard_error = diag.fit_rms_residual * std::sqrt(kernel.max_leverage());
    if (diag.fit_standard_error > sol.fit_se_max) sol.fit_se_max = diag.fit_standard_error;
    if (j == 0)
      sol.y0_standard_error = diag.fit_rms_residual / std::sqrt(static_cast<double>(M));

    // Z^i_j, one regression per Brownian component, centered targets
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t m = 0; m < M; ++m)
          targets[m] =
              (sol.y.at(m, j + 1, i) - cond_mean[m * n + i]) * bundle.dw(m, j, c) / grid.dt;
        RegressionResult res = kernel.fit(targets);
        for (std::size_t m = 0; m < M; ++m) sol.z.at(m, j, i * d + c) = res.fitted[m];
      }
    }

    if (opts.z_truncation > 0.0) {
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t i = 0; i < n; ++i) {
          const std::span<double> row{&sol.z.at(m, j, i * d), d};
          const double norm = euclidean_norm(row);
          if (norm > opts.z_truncation) {
            const double s = opts.z_truncation / norm;
            for (double& v : row) v *= s;
            ++diag.truncation_count;
          }
        }
    }

    // implicit Y step: fixed point over all components, Z frozen
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t i = 0; i < n; ++i) y_cur[m * n + i] = cond_mean[m * n + i];
    double residual = 0.0;
    std::size_t it = 0;
    for (; it < opts.inner_max_iterations; ++it) {
      residual = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        const auto x_row = x_path.row(m, j);
        const std::span<const double> y_row{y_cur.data() + m * n, n};
        for (std::size_t i = 0; i < n; ++i) {
          const std::span<const double> z_row{&sol.z.at(m, j, i * d), d};
          const double g = generator[i].eval_scalar(t, x_row, y_row, z_row);
          const double v = cond_mean[m * n + i] + g * grid.dt;
          if (!std::isfinite(v))
            throw SolverError("solve_bsde: non-finite Y update at step " + std::to_string(j) +
                              ", path " + std::to_string(m));
          y_next[m * n + i] = v;
          residual = std::max(residual, std::fabs(v - y_cur[m * n + i]));
        }
      }
      y_cur.swap(y_next);
      if (residual <= opts.inner_tolerance) {
        ++it;
        break;
      }
    }
    diag.inner_iterations = it;
    diag.inner_residual = residual;
    if (residual > opts.inner_tolerance)
      throw SolverError("solve_bsde: inner fixed point did not converge at step " +
                        std::to_string(j) + " (residual " + std::to_string(residual) + ")");

    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t i = 0; i < n; ++i) sol.y.at(m, j, i) = y_cur[m * n + i];
  }
  return sol;
}

namespace backward_detail {

// driver C(1 + |y| + |z^i|^2) with the given sign, terminal sign * C
inline BSDESolution solve_dominating(const FBSDEProblem& p, const TimeGrid& grid,
                                     const BrownianBundle& bundle, const RegressionBasis& basis,
                                     const BackwardOpts& opts, double sign) {
  const double C = p.growth_c;
  std::vector<CoefficientFn> gen(p.n);
  for (std::size_t i = 0; i < p.n; ++i)
    gen[i] = CoefficientFn::builtin(
        (sign > 0 ? "dominating-driver" : "seed-driver"), Arity{false, false, true, true},
        OutputShape::Scalar, 1,
        [C, sign](double, std::span<const double>, std::span<const double> y,
                  std::span<const double> z, std::span<double> out) {
          double z2 = 0.0;
          for (double v : z) z2 += v * v;
          out[0] = sign * C * (1.0 + euclidean_norm(y) + z2);
        });
  const PathArray w = brownian_state_path(bundle, grid);
  std::vector<double> terminal(bundle.paths * p.n, sign * C);
  return solve_bsde(gen, terminal, w, bundle, grid, basis, opts);
}

}  // namespace backward_detail

// Dominating BSDE: terminal C, driver C(1 + |U| + |V^i|^2).  Conditions the
// regressions on the Brownian path (its driver reads no x); basis.state_dim
// must equal d.
inline BSDESolution solve_bounding_U(const FBSDEProblem& p, const TimeGrid& grid,
                                     const BrownianBundle& bundle, const RegressionBasis& basis,
                                     const BackwardOpts& opts) {
  return backward_detail::solve_dominating(p, grid, bundle, basis, opts, +1.0);
}

// Seed BSDE: terminal -C, driver -C(1 + |Y| + |Z^i|^2).
inline BSDESolution solve_seed_Y0(const FBSDEProblem& p, const TimeGrid& grid,
                                  const BrownianBundle& bundle, const RegressionBasis& basis,
                                  const BackwardOpts& opts) {
  return backward_detail::solve_dominating(p, grid, bundle, basis, opts, -1.0);
}

}  // namespace fbsde
