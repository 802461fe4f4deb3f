#pragma once

// Report serialization: JSON for reports, CSV for tabular outputs, raw
// little-endian doubles (with an M/N/n/d header) for path dumps.  Every
// writer has a matching reader so outputs round-trip; all formatting is
// deterministic so identical runs produce bit-identical files.

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fbsde/common.hpp"
#include "fbsde/comparison.hpp"
#include "fbsde/diagnostics.hpp"
#include "fbsde/model.hpp"
#include "fbsde/picard.hpp"
#include "fbsde/simulation.hpp"

namespace fbsde {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---- JSON -----------------------------------------------------------------

inline nlohmann::json to_json(const ProbeWitness& w) {
  nlohmann::json j;
  j["t"] = w.t;
  j["component"] = w.component;
  j["x"] = w.x;
  j["y"] = w.y;
  j["z"] = w.z;
  j["x_bar"] = w.x_bar;
  j["y_bar"] = w.y_bar;
  j["z_bar"] = w.z_bar;
  return j;
}

inline nlohmann::json to_json(const AssumptionReport& rep) {
  nlohmann::json j;
  j["num_probes"] = rep.num_probes;
  j["radius"] = rep.radius;
  j["seed"] = rep.seed;
  j["sampled_region"] = rep.sampled_region;
  j["all_pass"] = rep.all_pass();
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks) {
    nlohmann::json e;
    e["id"] = c.id;
    e["probes"] = c.probes;
    e["worst"] = c.worst;
    e["worst_kind"] = c.worst_kind;
    e["threshold"] = c.threshold;
    e["pass"] = c.pass;
    e["witness"] = to_json(c.witness);
    checks.push_back(std::move(e));
  }
  j["checks"] = std::move(checks);
  return j;
}

inline nlohmann::json to_json(const ViolationStat& v) {
  nlohmann::json j;
  j["fraction"] = v.fraction;
  j["worst"] = v.worst;
  j["path"] = v.path;
  j["node"] = v.node;
  j["component"] = v.component;
  return j;
}

inline nlohmann::json to_json(const EnvelopeStats& e) {
  nlohmann::json j;
  j["y_monotone"] = to_json(e.y_monotone);
  j["x_monotone"] = to_json(e.x_monotone);
  j["y_upper"] = to_json(e.y_upper);
  j["x_upper"] = to_json(e.x_upper);
  return j;
}

// runtime_seconds stays out of the serialized record (reruns must be
// bit-identical); it is logged to stderr instead.
inline nlohmann::json to_json(const IterationRecord& r) {
  nlohmann::json j;
  j["k"] = r.k;
  j["supdiff_x"] = r.supdiff_x;
  j["supdiff_y"] = r.supdiff_y;
  j["envelope"] = to_json(r.envelope);
  j["clips_y"] = r.clips_y;
  j["clips_x"] = r.clips_x;
  j["z_truncations"] = r.z_truncations;
  j["inner_residual_max"] = r.inner_residual_max;
  j["fit_standard_error"] = r.fit_standard_error;
  return j;
}

inline nlohmann::json to_json(const ResidualReport& r) {
  nlohmann::json j;
  j["forward_max"] = r.forward_max;
  j["forward_rms"] = r.forward_rms;
  j["backward_max"] = r.backward_max;
  j["backward_rms"] = r.backward_rms;
  j["terminal_max"] = r.terminal_max;
  return j;
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["fixed_point_k"] = r.fixed_point_k;
  j["final_supdiff_x"] = r.final_supdiff_x;
  j["final_supdiff_y"] = r.final_supdiff_y;
  j["eps_mono"] = r.eps_mono;
  j["y0_standard_error"] = r.y0_standard_error;
  j["seed"] = r.seed;
  j["paths"] = r.paths;
  j["steps"] = r.steps;
  j["basis_degree"] = r.basis_degree;
  j["projection"] = r.projection;
  j["norm_u_sinf"] = r.norm_u_sinf;
  j["norm_y0_sinf"] = r.norm_y0_sinf;
  j["bmo_v"] = r.bmo_v;
  j["bmo_z0"] = r.bmo_z0;
  j["bound_k"] = r.bound_k;
  j["seed_bound_exceeded"] = r.seed_bound_exceeded;
  j["residuals"] = to_json(r.residuals);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& rec : r.history) hist.push_back(to_json(rec));
  j["history"] = std::move(hist);
  return j;
}

inline nlohmann::json to_json(const NormReport& r) {
  nlohmann::json j;
  j["s_inf"] = r.s_inf;
  j["p"] = r.p_values;
  j["s_p"] = r.s_p;
  j["h_p"] = r.h_p;
  if (r.bmo2) j["bmo2"] = *r.bmo2;
  return j;
}

inline nlohmann::json to_json(const PhiBoundReport& r) {
  nlohmann::json j;
  j["k"] = r.k;
  j["phi_k"] = r.phi_k;
  j["phi_prime_k"] = r.phi_prime_k;
  j["ceiling"] = r.ceiling;
  j["bmo2"] = r.bmo2;
  j["left"] = r.left;
  j["pass"] = r.pass;
  return j;
}

inline nlohmann::json to_json(const OrderingHypothesisReport& r) {
  nlohmann::json j;
  j["pass"] = r.pass();
  j["x0_ordered"] = r.x0_ordered;
  j["x0_worst"] = r.x0_worst;
  j["num_probes"] = r.num_probes;
  j["seed"] = r.seed;
  j["cone"] = to_json(r.cone);
  return j;
}

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json j;
  j["hypotheses"] = to_json(r.hypotheses);
  j["eps_mono"] = r.eps_mono;
  j["x_order"] = to_json(r.x_order);
  j["y_order"] = to_json(r.y_order);
  j["gap_y0"] = r.gap_y0;
  j["gap_y0_se"] = r.gap_y0_se;
  j["run_a"] = to_json(r.run_a);
  j["run_b"] = to_json(r.run_b);
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  return nlohmann::json::parse(in);
}

// ---- history CSV ----------------------------------------------------------

inline constexpr const char* kHistoryHeader =
    "k,supdiff_x,supdiff_y,frac_y_monotone,frac_x_monotone,frac_y_upper,frac_x_upper,"
    "clips_y,clips_x,z_truncations,inner_residual_max,fit_standard_error";

inline std::string history_csv(const std::vector<IterationRecord>& history) {
  std::string out = kHistoryHeader;
  out += '\n';
  for (const auto& r : history) {
    out += std::to_string(r.k);
    out += ',' + format_double(r.supdiff_x);
    out += ',' + format_double(r.supdiff_y);
    out += ',' + format_double(r.envelope.y_monotone.fraction);
    out += ',' + format_double(r.envelope.x_monotone.fraction);
    out += ',' + format_double(r.envelope.y_upper.fraction);
    out += ',' + format_double(r.envelope.x_upper.fraction);
    out += ',' + std::to_string(r.clips_y);
    out += ',' + std::to_string(r.clips_x);
    out += ',' + std::to_string(r.z_truncations);
    out += ',' + format_double(r.inner_residual_max);
    out += ',' + format_double(r.fit_standard_error);
    out += '\n';
  }
  return out;
}

struct HistoryRow {
  std::size_t k = 0;
  double supdiff_x = 0, supdiff_y = 0;
  double frac_y_monotone = 0, frac_x_monotone = 0, frac_y_upper = 0, frac_x_upper = 0;
  std::size_t clips_y = 0, clips_x = 0, z_truncations = 0;
  double inner_residual_max = 0, fit_standard_error = 0;
};

inline std::vector<HistoryRow> parse_history_csv(const std::string& text) {
  std::vector<HistoryRow> rows;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader)
    throw ConfigError("history CSV: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 12) throw ConfigError("history CSV: bad column count");
    auto num = [&](std::size_t i) {
      double v = 0;
      const auto res = std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), v);
      if (res.ec != std::errc{}) throw ConfigError("history CSV: bad number '" + cells[i] + "'");
      return v;
    };
    HistoryRow r;
    r.k = static_cast<std::size_t>(num(0));
    r.supdiff_x = num(1);
    r.supdiff_y = num(2);
    r.frac_y_monotone = num(3);
    r.frac_x_monotone = num(4);
    r.frac_y_upper = num(5);
    r.frac_x_upper = num(6);
    r.clips_y = static_cast<std::size_t>(num(7));
    r.clips_x = static_cast<std::size_t>(num(8));
    r.z_truncations = static_cast<std::size_t>(num(9));
    r.inner_residual_max = num(10);
    r.fit_standard_error = num(11);
    rows.push_back(r);
  }
  return rows;
}

// ---- comparison gap CSV ---------------------------------------------------

inline constexpr const char* kGapHeader =
    "node,t,mean_gap_x,se_gap_x,viol_frac_x,mean_gap_y,se_gap_y,viol_frac_y";

inline std::string gap_csv(const ComparisonReport& rep) {
  std::string out = kGapHeader;
  out += '\n';
  for (std::size_t j = 0; j < rep.nodes.size(); ++j) {
    const NodeGap& g = rep.nodes[j];
    out += std::to_string(j);
    out += ',' + format_double(g.t);
    out += ',' + format_double(g.mean_gap_x);
    out += ',' + format_double(g.se_gap_x);
    out += ',' + format_double(g.viol_frac_x);
    out += ',' + format_double(g.mean_gap_y);
    out += ',' + format_double(g.se_gap_y);
    out += ',' + format_double(g.viol_frac_y);
    out += '\n';
  }
  return out;
}

// ---- binary path dumps ------------------------------------------------------
//
// Layout: header of four little-endian uint64 (M, N, n, d), then the array
// values as little-endian doubles, row-major [path][node][component].  The
// node count is implied by the process kind (N+1 for states/values, N for Z).

struct PathDumpHeader {
  std::uint64_t paths = 0, steps = 0, n = 0, d = 0;
};

inline void write_path_dump(const std::string& path, const PathArray& a,
                            const PathDumpHeader& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  const std::uint64_t head[4] = {header.paths, header.steps, header.n, header.d};
  out.write(reinterpret_cast<const char*>(head), sizeof(head));
  out.write(reinterpret_cast<const char*>(a.values.data()),
            static_cast<std::streamsize>(a.values.size() * sizeof(double)));
}

inline std::pair<PathDumpHeader, std::vector<double>> read_path_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::uint64_t head[4];
  in.read(reinterpret_cast<char*>(head), sizeof(head));
  if (!in) throw ConfigError("path dump '" + path + "': truncated header");
  std::vector<double> values;
  double v;
  while (in.read(reinterpret_cast<char*>(&v), sizeof(v))) values.push_back(v);
  return {{head[0], head[1], head[2], head[3]}, std::move(values)};
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fbsde
