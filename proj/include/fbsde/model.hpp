#pragma once

// Problem definition for the coupled system
//
//   X_t = x0 + int_0^t b(s, X_s, Y_s) ds + int_0^t sigma(s, X_s) dW_s
//   Y^i_t = h^i(X_T) + int_t^T g^i(s, X_s, Y_s, Z^i_s) ds - int_t^T Z^i_s dW_s
//
// together with sample-based checkers for the structural assumptions the
// solver relies on: linear growth and Lipschitz bounds on b, sigma, h
// (A1-A3), diagonal quadratic growth and local z-Lipschitz bounds on g (A4),
// and quasi-monotonicity of b, h, g (A5-A7).

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/expr.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

// Which of (t, x, y, z^i) a coefficient may read.
struct Arity {
  bool t = false, x = false, y = false, z = false;
};

enum class OutputShape { Scalar, VectorN, MatrixNxD };

// A deterministic coefficient map (t, x, y, z_row) -> out.  Backed either by
// a registry builtin (native lambda) or by one compiled DSL expression per
// output component.  Immutable and reentrant.
class CoefficientFn {
 public:
  using EvalFn = std::function<void(double, std::span<const double>, std::span<const double>,
                                    std::span<const double>, std::span<double>)>;

  CoefficientFn() = default;

  static CoefficientFn builtin(std::string signature, Arity arity, OutputShape shape,
                               std::size_t out_size, EvalFn fn) {
    CoefficientFn c;
    c.signature_ = "builtin:" + std::move(signature);
    c.arity_ = arity;
    c.shape_ = shape;
    c.out_size_ = out_size;
    c.fn_ = std::move(fn);
    return c;
  }

  // One expression per output component.  Rejects expressions reading
  // variables outside the declared arity.
  static CoefficientFn from_expressions(std::vector<ExprAst> components, Arity arity,
                                        OutputShape shape) {
    CoefficientFn c;
    std::string sig = "dsl:[";
    for (std::size_t i = 0; i < components.size(); ++i) {
      const VarUsage u = components[i].uses();
      if ((u.t && !arity.t) || (u.x && !arity.x) || (u.y && !arity.y) || (u.z && !arity.z))
        throw ConfigError("expression '" + components[i].to_string() +
                          "' reads a variable outside this coefficient's arguments");
      if (i) sig += "; ";
      sig += components[i].to_string();
    }
    sig += ']';
    c.signature_ = std::move(sig);
    c.arity_ = arity;
    c.shape_ = shape;
    c.out_size_ = components.size();
    c.exprs_ = std::move(components);
    return c;
  }

  bool defined() const noexcept { return fn_ || !exprs_.empty(); }
  const Arity& arity() const noexcept { return arity_; }
  OutputShape shape() const noexcept { return shape_; }
  std::size_t output_size() const noexcept { return out_size_; }
  const std::string& signature() const noexcept { return signature_; }

  bool structurally_equal(const CoefficientFn& other) const noexcept {
    return signature_ == other.signature_ && shape_ == other.shape_ &&
           out_size_ == other.out_size_;
  }

  void eval(double t, std::span<const double> x, std::span<const double> y,
            std::span<const double> z, std::span<double> out) const {
    if (fn_) {
      fn_(t, x, y, z, out);
      return;
    }
    const EvalEnv env{t, x, y, z};
    for (std::size_t i = 0; i < exprs_.size(); ++i) out[i] = exprs_[i].evaluate(env);
  }

  double eval_scalar(double t, std::span<const double> x, std::span<const double> y,
                     std::span<const double> z) const {
    double out = 0.0;
    eval(t, x, y, z, std::span<double>(&out, 1));
    return out;
  }

 private:
  std::string signature_;
  Arity arity_;
  OutputShape shape_ = OutputShape::Scalar;
  std::size_t out_size_ = 0;
  EvalFn fn_;                   // builtin path
  std::vector<ExprAst> exprs_;  // DSL path
};

// Full problem instance.  generator[i] is the scalar driver g^i reading only
// the i-th row of Z (the z argument passed in is always that row, so foreign
// rows are unreachable by construction).
struct FBSDEProblem {
  std::size_t n = 0;            // state / value dimension
  std::size_t d = 0;            // Brownian dimension
  double horizon = 0.0;         // T
  std::vector<double> x0;       // initial state, length n
  CoefficientFn drift;          // b : (t, x, y) -> R^n
  CoefficientFn diffusion;      // sigma : (t, x) -> R^{n x d}
  CoefficientFn terminal;       // h : (x) -> R^n
  std::vector<CoefficientFn> generator;  // g^i : (t, x, y, z^i) -> R
  double growth_c = 0.0;        // the growth/Lipschitz constant C
};

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> defects;
  void add(std::string msg) {
    ok = false;
    defects.push_back(std::move(msg));
  }
};

inline ValidationResult validate_problem(const FBSDEProblem& p) {
  ValidationResult r;
  if (p.n < 1) r.add("state dimension n must be >= 1");
  if (p.d < 1) r.add("Brownian dimension d must be >= 1");
  if (!(p.horizon > 0.0)) r.add("horizon T must be > 0");
  if (!(p.growth_c > 0.0)) r.add("growth constant C must be > 0");
  if (p.x0.size() != p.n) r.add("x0 length does not match n");
  if (!p.drift.defined()) {
    r.add("drift b is undefined");
  } else {
    if (p.drift.shape() != OutputShape::VectorN || p.drift.output_size() != p.n)
      r.add("drift b must output an n-vector");
    if (p.drift.arity().z) r.add("drift b must not read z");
  }
  if (!p.diffusion.defined()) {
    r.add("diffusion sigma is undefined");
  } else {
    if (p.diffusion.shape() != OutputShape::MatrixNxD || p.diffusion.output_size() != p.n * p.d)
      r.add("diffusion sigma must output an n x d matrix (declared " +
            std::to_string(p.diffusion.output_size()) + " entries, expected " +
            std::to_string(p.n * p.d) + ")");
    if (p.diffusion.arity().y || p.diffusion.arity().z) r.add("diffusion sigma reads only (t, x)");
  }
  if (!p.terminal.defined()) {
    r.add("terminal h is undefined");
  } else {
    if (p.terminal.shape() != OutputShape::VectorN || p.terminal.output_size() != p.n)
      r.add("terminal h must output an n-vector");
    if (p.terminal.arity().t || p.terminal.arity().y || p.terminal.arity().z)
      r.add("terminal h reads only x");
  }
  if (p.generator.size() != p.n) {
    r.add("generator must have exactly n components");
  } else {
    for (std::size_t i = 0; i < p.generator.size(); ++i) {
      if (!p.generator[i].defined()) {
        r.add("generator component " + std::to_string(i + 1) + " is undefined");
      } else if (p.generator[i].shape() != OutputShape::Scalar ||
                 p.generator[i].output_size() != 1) {
        r.add("generator component " + std::to_string(i + 1) + " must be scalar");
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Assumption probes
// ---------------------------------------------------------------------------

struct ProbeTolerances {
  double ratio = 1e-6;       // relative slack on the A1-A4 ratio bounds
  double inequality = 1e-9;  // absolute slack on the A5-A7 orderings
};

struct ProbeWitness {
  double t = 0.0;
  int component = -1;  // i for per-component checks, -1 otherwise
  std::vector<double> x, y, z;
  std::vector<double> x_bar, y_bar, z_bar;  // second point of the pair, when used
};

struct AssumptionCheck {
  std::string id;          // "A1" .. "A7"
  std::string worst_kind;  // which sub-bound produced the worst value
  std::size_t probes = 0;
  double worst = 0.0;      // worst ratio (A1-A4) or violation magnitude (A5-A7)
  double threshold = 0.0;  // pass iff worst <= threshold
  bool pass = true;
  ProbeWitness witness;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  std::size_t num_probes = 0;
  double radius = 0.0;
  std::uint64_t seed = 0;
  std::string sampled_region;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const AssumptionCheck* find(std::string_view id) const {
    for (const auto& c : checks)
      if (c.id == id) return &c;
    return nullptr;
  }
};

namespace probe_detail {

struct Tracker {
  AssumptionCheck check;
  explicit Tracker(std::string id, double threshold) {
    check.id = std::move(id);
    check.threshold = threshold;
  }
  void observe(double value, std::string_view kind, const ProbeWitness& w) {
    ++check.probes;
    if (!std::isfinite(value))
      throw EvaluationError("coefficient evaluation produced a non-finite value during " +
                            check.id + " probing (" + std::string(kind) + ")");
    if (value > check.worst || check.probes == 1) {
      check.worst = value;
      check.worst_kind = kind;
      check.witness = w;
    }
  }
  AssumptionCheck finish() {
    check.pass = check.worst <= check.threshold;
    return check;
  }
};

// ratio num/den with a guard for vanishing denominators
inline double guarded_ratio(double num, double den) {
  if (den <= 1e-14) return num <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

inline std::vector<double> eval_vec(const CoefficientFn& f, std::size_t out_size, double t,
                                    std::span<const double> x, std::span<const double> y,
                                    std::span<const double> z = {}) {
  std::vector<double> out(out_size);
  f.eval(t, x, y, z, out);
  return out;
}

inline std::vector<double> diff(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

}  // namespace probe_detail

// Probes (A1)-(A4): growth and Lipschitz ratio bounds with constant C,
// sampled on random pairs in the Euclidean ball of the given radius.
// A ratio check passes when the worst observed ratio is <= 1 + tol.ratio.
inline AssumptionReport probe_growth_lipschitz(const FBSDEProblem& p, std::size_t num_probes,
                                               double radius, std::uint64_t seed,
                                               const ProbeTolerances& tol = {}) {
  using probe_detail::Tracker;
  const double C = p.growth_c;
  const double thr = 1.0 + tol.ratio;
  Tracker a1("A1", thr), a2("A2", thr), a3("A3", thr), a4("A4", thr);
  RandomStream rs = RandomStream::substream(seed, 0x67726f77ull);  // probe stream

  std::vector<double> x(p.n), xb(p.n), y(p.n), yb(p.n), z(p.d), zb(p.d);
  for (std::size_t k = 0; k < num_probes; ++k) {
    const double t = rs.uniform(0.0, p.horizon);
    rs.ball_point(radius, x);
    rs.ball_point(radius, xb);
    rs.ball_point(radius, y);
    rs.ball_point(radius, yb);
    rs.ball_point(radius, z);
    rs.ball_point(radius, zb);
    ProbeWitness w{t, -1, x, y, z, xb, yb, zb};

    // A1: |b| <= C(1+|x|+|y|), |b(x,y)-b(xb,yb)| <= C(|x-xb|+|y-yb|)
    const auto b1 = probe_detail::eval_vec(p.drift, p.n, t, x, y);
    const auto b2 = probe_detail::eval_vec(p.drift, p.n, t, xb, yb);
    a1.observe(euclidean_norm(b1) / (C * (1.0 + euclidean_norm(x) + euclidean_norm(y))),
               "growth", w);
    a1.observe(probe_detail::guarded_ratio(
                   euclidean_norm(probe_detail::diff(b1, b2)),
                   C * (euclidean_norm(probe_detail::diff(x, xb)) +
                        euclidean_norm(probe_detail::diff(y, yb)))),
               "lipschitz", w);

    // A2: sigma reads (t, x) only
    const auto s1 = probe_detail::eval_vec(p.diffusion, p.n * p.d, t, x, {});
    const auto s2 = probe_detail::eval_vec(p.diffusion, p.n * p.d, t, xb, {});
    a2.observe(euclidean_norm(s1) / (C * (1.0 + euclidean_norm(x))), "growth", w);
    a2.observe(probe_detail::guarded_ratio(euclidean_norm(probe_detail::diff(s1, s2)),
                                           C * euclidean_norm(probe_detail::diff(x, xb))),
               "lipschitz", w);

    // A3: |h| <= C, |h(x)-h(xb)| <= C|x-xb|
    const auto h1 = probe_detail::eval_vec(p.terminal, p.n, 0.0, x, {});
    const auto h2 = probe_detail::eval_vec(p.terminal, p.n, 0.0, xb, {});
    a3.observe(euclidean_norm(h1) / C, "bound", w);
    a3.observe(probe_detail::guarded_ratio(euclidean_norm(probe_detail::diff(h1, h2)),
                                           C * euclidean_norm(probe_detail::diff(x, xb))),
               "lipschitz", w);

    // A4: |g^i| <= C(1+|y|+|z^i|^2) uniformly in x (scanned over both x draws),
    //     local Lipschitz with modulus C(1+|z^i|+|zb^i|) in z
    const double grow_den = C * (1.0 + euclidean_norm(y) + euclidean_norm(z) * euclidean_norm(z));
    for (std::size_t i = 0; i < p.n; ++i) {
      ProbeWitness wi = w;
      wi.component = static_cast<int>(i);
      const double g_x = p.generator[i].eval_scalar(t, x, y, z);
      const double g_xb = p.generator[i].eval_scalar(t, xb, y, z);
      a4.observe(std::fabs(g_x) / grow_den, "growth", wi);
      a4.observe(std::fabs(g_xb) / grow_den, "growth-x-scan", wi);
      const double g_b = p.generator[i].eval_scalar(t, xb, yb, zb);
      const double lip_den = C * euclidean_norm(probe_detail::diff(x, xb)) +
                             C * euclidean_norm(probe_detail::diff(y, yb)) +
                             C * (1.0 + euclidean_norm(z) + euclidean_norm(zb)) *
                                 euclidean_norm(probe_detail::diff(z, zb));
      a4.observe(probe_detail::guarded_ratio(std::fabs(g_x - g_b), lip_den), "lipschitz", wi);
    }
  }

  AssumptionReport rep;
  rep.checks = {a1.finish(), a2.finish(), a3.finish(), a4.finish()};
  rep.num_probes = num_probes;
  rep.radius = radius;
  rep.seed = seed;
  rep.sampled_region = "euclidean ball of radius " + std::to_string(radius) +
                       ", t uniform in [0, " + std::to_string(p.horizon) + "]";
  return rep;
}

namespace probe_detail {

// Shared cone prober for (A5)-(A7) and for the Theorem 2.2 cross-problem
// hypotheses: checks f_small evaluated at the small point against f_large at
// the large point.  With small == large this is quasi-monotonicity.
struct OrderedConeProbe {
  const FBSDEProblem& small;
  const FBSDEProblem& large;

  AssumptionReport run(std::size_t num_probes, double radius, std::uint64_t seed,
                       double threshold, std::string_view id_prefix) const {
    const std::size_t n = small.n;
    const std::size_t d = small.d;
    Tracker a5(std::string(id_prefix) + "5", threshold);
    Tracker a6(std::string(id_prefix) + "6", threshold);
    Tracker a7(std::string(id_prefix) + "7", threshold);
    RandomStream rs = RandomStream::substream(seed, 0x6d6f6e6full);

    std::vector<double> x(n), xb(n), y(n), yb(n), z(d);
    for (std::size_t k = 0; k < num_probes; ++k) {
      const double t = rs.uniform(0.0, small.horizon);
      rs.ball_point(radius, x);
      rs.ball_point(radius, y);
      rs.ball_point(radius, z);

      // A5 cone, per component i: x^i = xb^i, x^j <= xb^j (j != i), y <= yb
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          xb[j] = (j == i) ? x[j] : x[j] + rs.uniform(0.0, radius);
          yb[j] = y[j] + rs.uniform(0.0, radius);
        }
        std::vector<double> b_small(n), b_large(n);
        small.drift.eval(t, x, y, {}, b_small);
        large.drift.eval(t, xb, yb, {}, b_large);
        ProbeWitness w{t, static_cast<int>(i), x, y, {}, xb, yb, {}};
        a5.observe(b_small[i] - b_large[i], "drift-order", w);
      }

      // A6 cone: x <= xb componentwise
      for (std::size_t j = 0; j < n; ++j) xb[j] = x[j] + rs.uniform(0.0, radius);
      {
        std::vector<double> h_small(n), h_large(n);
        small.terminal.eval(0.0, x, {}, {}, h_small);
        large.terminal.eval(0.0, xb, {}, {}, h_large);
        double worst = -std::numeric_limits<double>::infinity();
        int worst_i = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double v = h_small[j] - h_large[j];
          if (v > worst) {
            worst = v;
            worst_i = static_cast<int>(j);
          }
        }
        ProbeWitness w{0.0, worst_i, x, {}, {}, xb, {}, {}};
        a6.observe(worst, "terminal-order", w);
      }

      // A7 cone, per component i: y^i = yb^i, y^j <= yb^j (j != i), x <= xb, same z^i
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          xb[j] = x[j] + rs.uniform(0.0, radius);
          yb[j] = (j == i) ? y[j] : y[j] + rs.uniform(0.0, radius);
        }
        const double g_small = small.generator[i].eval_scalar(t, x, y, z);
        const double g_large = large.generator[i].eval_scalar(t, xb, yb, z);
        ProbeWitness w{t, static_cast<int>(i), x, y, z, xb, yb, z};
        a7.observe(g_small - g_large, "generator-order", w);
      }
    }

    AssumptionReport rep;
    rep.checks = {a5.finish(), a6.finish(), a7.finish()};
    rep.num_probes = num_probes;
    rep.radius = radius;
    rep.seed = seed;
    rep.sampled_region = "base points in the euclidean ball of radius " + std::to_string(radius) +
                         ", ordered offsets uniform in [0, " + std::to_string(radius) + "]";
    return rep;
  }
};

}  // namespace probe_detail

// Probes (A5)-(A7): quasi-monotonicity of b, h, g on the ordered cones stated
// in the assumptions.  Violation magnitudes pass at tol.inequality.
inline AssumptionReport probe_quasi_monotonicity(const FBSDEProblem& p, std::size_t num_probes,
                                                 double radius, std::uint64_t seed,
                                                 const ProbeTolerances& tol = {}) {
  return probe_detail::OrderedConeProbe{p, p}.run(num_probes, radius, seed, tol.inequality, "A");
}

}  // namespace fbsde
