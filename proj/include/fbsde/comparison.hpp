#pragma once

// Comparison harness: solve two ordered problems on shared noise and verify
// the componentwise ordering of the minimal solutions (X <= X_bar, Y <= Y_bar
// at every node).  Z is deliberately excluded from the ordering checks.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/model.hpp"
#include "fbsde/picard.hpp"

namespace fbsde {

struct OrderingHypothesisReport {
  bool x0_ordered = false;
  double x0_worst = 0.0;      // max over components of x0 - x0_bar
  AssumptionReport cone;      // cross-problem coefficient inequalities (H5/H6/H7)
  std::size_t num_probes = 0;
  std::uint64_t seed = 0;

  bool pass() const { return x0_ordered && cone.all_pass(); }
};

// Probes the ordering hypotheses between pA (small) and pB (large):
// x0 <= x0_bar, b^i(t,x,y) <= b_bar^i(t,x_bar,y_bar), h <= h_bar,
// g^i <= g_bar^i on the same ordered cones as (A5)-(A7).  Throws
// HypothesisError when the two problems are structurally incomparable
// (dimension/horizon mismatch or different diffusion coefficients).
inline OrderingHypothesisReport verify_ordering_hypotheses(const FBSDEProblem& pA,
                                                           const FBSDEProblem& pB,
                                                           std::size_t num_probes,
                                                           std::uint64_t seed, double radius = 5.0,
                                                           const ProbeTolerances& tol = {}) {
  if (pA.n != pB.n || pA.d != pB.d)
    throw HypothesisError("verify_ordering_hypotheses: dimension mismatch");
  if (pA.horizon != pB.horizon)
    throw HypothesisError("verify_ordering_hypotheses: horizon mismatch");
  if (!pA.diffusion.structurally_equal(pB.diffusion))
    throw HypothesisError(
        "verify_ordering_hypotheses: the two problems must share the same diffusion (got '" +
        pA.diffusion.signature() + "' vs '" + pB.diffusion.signature() + "')");

  OrderingHypothesisReport rep;
  rep.num_probes = num_probes;
  rep.seed = seed;
  rep.x0_worst = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < pA.n; ++c)
    rep.x0_worst = std::max(rep.x0_worst, pA.x0[c] - pB.x0[c]);
  rep.x0_ordered = rep.x0_worst <= tol.inequality;
  rep.cone =
      probe_detail::OrderedConeProbe{pA, pB}.run(num_probes, radius, seed, tol.inequality, "H");
  return rep;
}

struct NodeGap {
  double t = 0.0;
  double mean_gap_x = 0.0, mean_gap_y = 0.0;  // mean over paths/components of (bar - plain)
  double se_gap_x = 0.0, se_gap_y = 0.0;      // cross-path standard errors
  double viol_frac_x = 0.0, viol_frac_y = 0.0;
};

struct ComparisonReport {
  OrderingHypothesisReport hypotheses;
  ConvergenceReport run_a, run_b;
  double eps_mono = 0.0;          // max of the two runs' values
  ViolationStat x_order, y_order; // violations of A <= B + eps_mono over all triples
  std::vector<NodeGap> nodes;
  double gap_y0 = 0.0;            // Y_bar - Y at node 0
  double gap_y0_se = 0.0;         // from the two solvers' node-0 estimates

  bool ordering_ok(double alarm_threshold) const {
    return x_order.fraction <= alarm_threshold && y_order.fraction <= alarm_threshold;
  }
};

namespace comparison_detail {

inline void order_stats(const PathArray& a, const PathArray& b, double eps, ViolationStat& out,
                        std::vector<NodeGap>& nodes, bool is_y) {
  const double inv_total = 1.0 / static_cast<double>(a.paths * a.nodes * a.dim);
  for (std::size_t j = 0; j < a.nodes; ++j) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t node_bad = 0;
    for (std::size_t m = 0; m < a.paths; ++m) {
      double path_gap = 0.0;
      for (std::size_t c = 0; c < a.dim; ++c) {
        const double gap = b.at(m, j, c) - a.at(m, j, c);
        path_gap += gap;
        const double viol = -gap;
        if (viol > eps) {
          out.fraction += inv_total;
          ++node_bad;
          if (viol > out.worst) {
            out.worst = viol;
            out.path = m;
            out.node = j;
            out.component = c;
          }
        }
      }
      path_gap /= static_cast<double>(a.dim);
      sum += path_gap;
      sum_sq += path_gap * path_gap;
    }
    const double mpaths = static_cast<double>(a.paths);
    const double mean = sum / mpaths;
    const double var = std::max(0.0, sum_sq / mpaths - mean * mean);
    NodeGap& ng = nodes[j];
    if (is_y) {
      ng.mean_gap_y = mean;
      ng.se_gap_y = std::sqrt(var / mpaths);
      ng.viol_frac_y = static_cast<double>(node_bad) / (mpaths * static_cast<double>(a.dim));
    } else {
      ng.mean_gap_x = mean;
      ng.se_gap_x = std::sqrt(var / mpaths);
      ng.viol_frac_x = static_cast<double>(node_bad) / (mpaths * static_cast<double>(a.dim));
    }
  }
}

}  // namespace comparison_detail

// Runs the monotone iteration on both problems with the identical bundle
// (same seed, paths, grid) and reports the ordering statistics.  Throws
// HypothesisError when the ordering hypotheses fail.
inline ComparisonReport run_comparison(const FBSDEProblem& pA, const FBSDEProblem& pB,
                                       const IterationConfig& cfg,
                                       std::size_t hypothesis_probes = 256,
                                       double hypothesis_radius = 5.0) {
  ComparisonReport rep;
  rep.hypotheses =
      verify_ordering_hypotheses(pA, pB, hypothesis_probes, cfg.seed, hypothesis_radius);
  if (!rep.hypotheses.pass())
    throw HypothesisError("run_comparison: ordering hypotheses fail (worst cone violation " +
                          std::to_string(std::max({rep.hypotheses.x0_worst,
                                                   rep.hypotheses.cone.checks[0].worst,
                                                   rep.hypotheses.cone.checks[1].worst,
                                                   rep.hypotheses.cone.checks[2].worst})) +
                          ")");

  PicardResult a = run(pA, cfg);
  PicardResult b = run(pB, cfg);
  rep.run_a = a.report;
  rep.run_b = b.report;
  rep.eps_mono = std::max(a.report.eps_mono, b.report.eps_mono);

  rep.nodes.resize(a.x.nodes);
  for (std::size_t j = 0; j < a.x.nodes; ++j) rep.nodes[j].t = a.grid.nodes[j];
  comparison_detail::order_stats(a.x, b.x, rep.eps_mono, rep.x_order, rep.nodes, false);
  comparison_detail::order_stats(a.y, b.y, rep.eps_mono, rep.y_order, rep.nodes, true);

  rep.gap_y0 = rep.nodes.front().mean_gap_y;
  rep.gap_y0_se = std::sqrt(a.report.y0_standard_error * a.report.y0_standard_error +
                            b.report.y0_standard_error * b.report.y0_standard_error);
  return rep;
}

}  // namespace fbsde
