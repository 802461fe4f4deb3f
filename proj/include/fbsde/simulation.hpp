#pragma once

// Time grid, Brownian increment generation with common random numbers, and
// explicit Euler-Maruyama forward solves.  One BrownianBundle is generated
// per experiment and reused across all outer iterations (and across both
// problems of a comparison run): the pathwise orderings the tests verify
// only hold under shared noise.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/model.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

struct TimeGrid {
  double horizon = 0.0;        // T
  std::size_t steps = 0;       // N
  double dt = 0.0;             // T / N
  std::vector<double> nodes;   // t_0 = 0 < ... < t_N = T, uniform
};

inline TimeGrid make_grid(double horizon, std::size_t steps) {
  if (!(horizon > 0.0)) throw std::invalid_argument("make_grid: horizon must be > 0");
  if (steps < 1) throw std::invalid_argument("make_grid: step count must be >= 1");
  TimeGrid g;
  g.horizon = horizon;
  g.steps = steps;
  g.dt = horizon / static_cast<double>(steps);
  g.nodes.resize(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j)
    g.nodes[j] = horizon * (static_cast<double>(j) / static_cast<double>(steps));
  return g;
}

// Increments dW[m][j] in R^d, i.i.d. N(0, dt * I_d).  Path m draws from
// RandomStream::substream(seed, m), step-major then component, so
// regeneration from the same seed is bit-identical.
struct BrownianBundle {
  std::size_t paths = 0;   // M
  std::size_t steps = 0;   // N
  std::size_t dim = 0;     // d
  std::uint64_t seed = 0;
  std::vector<double> increments;  // [m][j][c]

  double dw(std::size_t m, std::size_t j, std::size_t c) const {
    return increments[(m * steps + j) * dim + c];
  }
  std::span<const double> dw_row(std::size_t m, std::size_t j) const {
    return {increments.data() + (m * steps + j) * dim, dim};
  }
};

inline BrownianBundle sample_brownian(std::size_t paths, const TimeGrid& grid, std::size_t dim,
                                      std::uint64_t seed) {
  if (paths < 1) throw std::invalid_argument("sample_brownian: need at least one path");
  if (dim < 1) throw std::invalid_argument("sample_brownian: dimension must be >= 1");
  BrownianBundle b;
  b.paths = paths;
  b.steps = grid.steps;
  b.dim = dim;
  b.seed = seed;
  b.increments.resize(paths * grid.steps * dim);
  const double scale = std::sqrt(grid.dt);
  for (std::size_t m = 0; m < paths; ++m) {
    RandomStream rs = RandomStream::substream(seed, m);
    double* row = b.increments.data() + m * grid.steps * dim;
    for (std::size_t k = 0; k < grid.steps * dim; ++k) row[k] = scale * rs.normal();
  }
  return b;
}

// A simulated process on the grid across paths: values[m][j] in R^dim with
// m in 0..paths-1, j in 0..nodes-1.  X/Y/S/U live on N+1 nodes with dim n;
// Z lives on N nodes with dim n*d flattened row-major.
struct PathArray {
  std::size_t paths = 0;
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // [m][j][c]

  static PathArray zeros(std::size_t paths, std::size_t nodes, std::size_t dim) {
    PathArray a;
    a.paths = paths;
    a.nodes = nodes;
    a.dim = dim;
    a.values.assign(paths * nodes * dim, 0.0);
    return a;
  }
  static PathArray constant(std::size_t paths, std::size_t nodes, std::span<const double> value) {
    PathArray a = zeros(paths, nodes, value.size());
    for (std::size_t m = 0; m < paths; ++m)
      for (std::size_t j = 0; j < nodes; ++j)
        for (std::size_t c = 0; c < value.size(); ++c) a.at(m, j, c) = value[c];
    return a;
  }

  double& at(std::size_t m, std::size_t j, std::size_t c) {
    return values[(m * nodes + j) * dim + c];
  }
  double at(std::size_t m, std::size_t j, std::size_t c) const {
    return values[(m * nodes + j) * dim + c];
  }
  std::span<double> row(std::size_t m, std::size_t j) {
    return {values.data() + (m * nodes + j) * dim, dim};
  }
  std::span<const double> row(std::size_t m, std::size_t j) const {
    return {values.data() + (m * nodes + j) * dim, dim};
  }

  // max over paths/nodes of the componentwise absolute value
  double sup_abs() const { return sup_norm(values); }
};

// max over all (path, node, component) of |a - b|
inline double sup_difference(const PathArray& a, const PathArray& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    s = std::max(s, std::fabs(a.values[k] - b.values[k]));
  return s;
}

// Forward Euler for X_{j+1} = X_j + b(t_j, X_j, Y_j) dt + sigma(t_j, X_j) dW_j,
// X_0 = x0.  Y is read at the left endpoint (adapted scheme).
inline PathArray euler_forward(const FBSDEProblem& p, const PathArray& y_path,
                               const BrownianBundle& bundle, const TimeGrid& grid) {
  const std::size_t n = p.n, d = p.d, N = grid.steps, M = bundle.paths;
  if (y_path.paths != M || y_path.nodes != N + 1)
    throw std::invalid_argument("euler_forward: y_path not on the bundle's grid/paths");
  PathArray x = PathArray::zeros(M, N + 1, n);
  std::vector<double> b(n), sigma(n * d);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t c = 0; c < n; ++c) x.at(m, 0, c) = p.x0[c];
    for (std::size_t j = 0; j < N; ++j) {
      const double t = grid.nodes[j];
      const auto xj = x.row(m, j);
      p.drift.eval(t, xj, y_path.row(m, j), {}, b);
      p.diffusion.eval(t, xj, {}, {}, sigma);
      const auto dw = bundle.dw_row(m, j);
      for (std::size_t c = 0; c < n; ++c) {
        double v = xj[c] + b[c] * grid.dt;
        const double* srow = sigma.data() + c * d;
        for (std::size_t l = 0; l < d; ++l) v += srow[l] * dw[l];
        if (!std::isfinite(v))
          throw SimulationError("euler_forward: non-finite state", m, j + 1);
        x.at(m, j + 1, c) = v;
      }
    }
  }
  return x;
}

// Euler scheme for the dominating SDE: every drift component is
// C(1 + |S_s| + |U_s|), diffusion sigma(s, S_s), S_0 = x0.
inline PathArray simulate_bounding_S(const FBSDEProblem& p, const PathArray& u_path,
                                     const BrownianBundle& bundle, const TimeGrid& grid) {
  const std::size_t n = p.n, d = p.d, N = grid.steps, M = bundle.paths;
  if (u_path.paths != M || u_path.nodes != N + 1)
    throw std::invalid_argument("simulate_bounding_S: u_path not on the bundle's grid/paths");
  PathArray s = PathArray::zeros(M, N + 1, n);
  std::vector<double> sigma(n * d);
  const double C = p.growth_c;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t c = 0; c < n; ++c) s.at(m, 0, c) = p.x0[c];
    for (std::size_t j = 0; j < N; ++j) {
      const double t = grid.nodes[j];
      const auto sj = s.row(m, j);
      const double drift = C * (1.0 + euclidean_norm(sj) + euclidean_norm(u_path.row(m, j)));
      p.diffusion.eval(t, sj, {}, {}, sigma);
      const auto dw = bundle.dw_row(m, j);
      for (std::size_t c = 0; c < n; ++c) {
        double v = sj[c] + drift * grid.dt;
        const double* srow = sigma.data() + c * d;
        for (std::size_t l = 0; l < d; ++l) v += srow[l] * dw[l];
        if (!std::isfinite(v))
          throw SimulationError("simulate_bounding_S: non-finite state", m, j + 1);
        s.at(m, j + 1, c) = v;
      }
    }
  }
  return s;
}

}  // namespace fbsde
