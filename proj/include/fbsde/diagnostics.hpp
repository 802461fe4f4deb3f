#pragma once

// Empirical norm estimators (S^inf, S^p, H^p, BMO_2), the phi-function
// ceiling on the Z quadratic variation, and discrete-residual verification
// of candidate solutions.
//
// The BMO_2 estimate takes its supremum over grid nodes only (the
// stopping-time supremum is not computable) and estimates the conditional
// remaining quadratic variation with the same regression basis family as
// the solver; it is reported as that surrogate.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/model.hpp"
#include "fbsde/regression.hpp"
#include "fbsde/simulation.hpp"

namespace fbsde {

struct NormReport {
  double s_inf = 0.0;
  std::vector<double> p_values;  // requested p
  std::vector<double> s_p;       // same order as p_values
  std::vector<double> h_p;
  std::optional<double> bmo2;    // present when a Z process was supplied
};

// S^inf, S^p, H^p of `proc`; BMO_2 of `z_proc` when supplied.  Conditional
// expectations for BMO_2 regress on `conditioning` (defaults to `proc`).
inline NormReport estimate_norms(const PathArray& proc, const PathArray* z_proc,
                                 const TimeGrid& grid, std::span<const double> p_list,
                                 const RegressionBasis& basis = RegressionBasis(0, 1),
                                 const PathArray* conditioning = nullptr,
                                 double ridge = 1e-8) {
  if (proc.paths == 0 || proc.nodes == 0) throw std::invalid_argument("estimate_norms: empty process");
  const std::size_t M = proc.paths;
  NormReport rep;
  rep.p_values.assign(p_list.begin(), p_list.end());

  // running-sup and integrated-square per path
  std::vector<double> run_sup(M, 0.0), int_sq(M, 0.0);
  const std::size_t int_steps = std::min(proc.nodes, grid.steps);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < proc.nodes; ++j) {
      const double a = euclidean_norm(proc.row(m, j));
      run_sup[m] = std::max(run_sup[m], a);
      if (j < int_steps) int_sq[m] += a * a * grid.dt;
    }
    rep.s_inf = std::max(rep.s_inf, run_sup[m]);
  }
  for (double p : p_list) {
    double ms = 0.0, mh = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      ms += std::pow(run_sup[m], p);
      mh += std::pow(int_sq[m], p / 2.0);
    }
    rep.s_p.push_back(std::pow(ms / static_cast<double>(M), 1.0 / p));
    rep.h_p.push_back(std::pow(mh / static_cast<double>(M), 1.0 / p));
  }

  if (z_proc) {
    const PathArray& z = *z_proc;
    const PathArray& cond = conditioning ? *conditioning : proc;
    if (z.paths != M) throw std::invalid_argument("estimate_norms: z path count mismatch");
    if (cond.dim != basis.state_dim())
      throw std::invalid_argument("estimate_norms: conditioning dim does not match basis");
    const std::size_t F = basis.feature_count();
    std::vector<double> remaining(M, 0.0);  // sum_{l >= j} |Z_l|^2 dt
    std::vector<double> features(M * F), targets(M);
    double worst = 0.0;
    for (std::size_t j_plus = z.nodes; j_plus > 0; --j_plus) {
      const std::size_t j = j_plus - 1;
      for (std::size_t m = 0; m < M; ++m) {
        const double zn = euclidean_norm(z.row(m, j));
        remaining[m] += zn * zn * grid.dt;
        targets[m] = remaining[m];
        basis.features(cond.row(m, j), {features.data() + m * F, F});
      }
      RegressionKernel kernel(features, M, F);
      kernel.factor(ridge * kernel.max_gram_diagonal());
      const RegressionResult res = kernel.fit(targets);
      for (double v : res.fitted) worst = std::max(worst, v);
    }
    rep.bmo2 = std::sqrt(std::max(0.0, worst));
  }
  return rep;
}

// phi(x) = (e^{2C|x|} - 2C|x| - 1) / (4C^2); phi'' - 2C|phi'| = 1.
inline double phi_function(double x, double C) {
  const double a = 2.0 * C * std::fabs(x);
  return (std::exp(a) - a - 1.0) / (4.0 * C * C);
}

inline double phi_derivative(double x, double C) {
  const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  return s * (std::exp(2.0 * C * std::fabs(x)) - 1.0) / (2.0 * C);
}

struct PhiBoundReport {
  double k = 0.0;         // the S^inf bound the ceiling is evaluated at
  double phi_k = 0.0;
  double phi_prime_k = 0.0;
  double ceiling = 0.0;   // phi(K) + C T phi'(K) (1 + K)
  double bmo2 = 0.0;      // estimated BMO_2 of the supplied Z
  double left = 0.0;      // (1/2) bmo2^2
  bool pass = false;
};

// Checks (1/2) * BMO_2(Z)^2 <= phi(K) + C T phi'(K) (1 + K).
inline PhiBoundReport phi_bound_check(double y_norm_k, const PathArray& z_proc,
                                      const FBSDEProblem& p, const TimeGrid& grid,
                                      const RegressionBasis& basis,
                                      const PathArray& conditioning, double ridge = 1e-8) {
  if (y_norm_k < 0.0) throw std::invalid_argument("phi_bound_check: K must be >= 0");
  PhiBoundReport rep;
  rep.k = y_norm_k;
  const double C = p.growth_c;
  rep.phi_k = phi_function(y_norm_k, C);
  rep.phi_prime_k = phi_derivative(y_norm_k, C);
  rep.ceiling = rep.phi_k + C * grid.horizon * rep.phi_prime_k * (1.0 + y_norm_k);
  const NormReport norms =
      estimate_norms(conditioning, &z_proc, grid, {}, basis, &conditioning, ridge);
  rep.bmo2 = *norms.bmo2;
  rep.left = 0.5 * rep.bmo2 * rep.bmo2;
  rep.pass = rep.left <= rep.ceiling;
  return rep;
}

struct ResidualReport {
  double forward_max = 0.0;   // sup Euler defect re-simulating X from the returned Y
  double forward_rms = 0.0;
  double backward_max = 0.0;  // sup one-step defect of Y against the discrete BSDE relation
  double backward_rms = 0.0;
  double terminal_max = 0.0;  // sup |Y_N - h(X_N)|
};

// Verifies the triple satisfies the discrete system under its own bundle:
//   forward defect:  X_{j+1} - X_j - b(t_j, X_j, Y_j) dt - sigma(t_j, X_j) dW_j
//   backward defect: Y^i_j - Y^i_{j+1} - g^i(t_j, X_j, Y_j, Z^i_j) dt + Z^i_j . dW_j
inline ResidualReport residual_check(const FBSDEProblem& p, const PathArray& x,
                                     const PathArray& y, const PathArray& z,
                                     const BrownianBundle& bundle, const TimeGrid& grid) {
  const std::size_t n = p.n, d = p.d, N = grid.steps, M = bundle.paths;
  if (x.paths != M || y.paths != M || z.paths != M || x.nodes != N + 1 || y.nodes != N + 1 ||
      z.nodes != N || x.dim != n || y.dim != n || z.dim != n * d)
    throw std::invalid_argument("residual_check: shape mismatch");

  ResidualReport rep;
  double fwd_ss = 0.0, bwd_ss = 0.0;
  std::vector<double> b(n), sigma(n * d), h(n);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < N; ++j) {
      const double t = grid.nodes[j];
      const auto xj = x.row(m, j);
      const auto yj = y.row(m, j);
      const auto dw = bundle.dw_row(m, j);
      p.drift.eval(t, xj, yj, {}, b);
      p.diffusion.eval(t, xj, {}, {}, sigma);
      for (std::size_t c = 0; c < n; ++c) {
        double defect = x.at(m, j + 1, c) - xj[c] - b[c] * grid.dt;
        const double* srow = sigma.data() + c * d;
        for (std::size_t l = 0; l < d; ++l) defect -= srow[l] * dw[l];
        rep.forward_max = std::max(rep.forward_max, std::fabs(defect));
        fwd_ss += defect * defect;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> z_row{&z.values[(m * N + j) * n * d + i * d], d};
        const double g = p.generator[i].eval_scalar(t, xj, yj, z_row);
        double defect = y.at(m, j, i) - y.at(m, j + 1, i) - g * grid.dt;
        for (std::size_t l = 0; l < d; ++l) defect += z_row[l] * dw[l];
        rep.backward_max = std::max(rep.backward_max, std::fabs(defect));
        bwd_ss += defect * defect;
      }
    }
    p.terminal.eval(0.0, x.row(m, N), {}, {}, h);
    for (std::size_t i = 0; i < n; ++i)
      rep.terminal_max = std::max(rep.terminal_max, std::fabs(y.at(m, N, i) - h[i]));
  }
  const double cells = static_cast<double>(M * N * n);
  rep.forward_rms = std::sqrt(fwd_ss / cells);
  rep.backward_rms = std::sqrt(bwd_ss / cells);
  return rep;
}

}  // namespace fbsde
