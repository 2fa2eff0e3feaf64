#include "epower/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "epower/error.hpp"
#include "epower/text.hpp"

namespace epower::analysis {

double mean_power(std::span<const double> watts) {
  if (watts.empty()) fail(ErrorKind::insufficient_data, "no samples to average");
  std::vector<double> sorted(watts.begin(), watts.end());
  std::sort(sorted.begin(), sorted.end());
  // Offsets from the minimum keep a constant series exact and the sorted
  // order makes the sum independent of sample order.
  const double base = sorted.front();
  double excess = 0.0;
  for (double w : sorted) excess += w - base;
  const double mean = base + excess / static_cast<double>(sorted.size());
  return std::clamp(mean, sorted.front(), sorted.back());
}

PowerStats window_stats(const telemetry::Timeline& timeline, double t_start_ms, double t_end_ms) {
  std::vector<double> watts;
  for (const auto& s : timeline.samples()) {
    if (s.t_ms >= t_start_ms && s.t_ms <= t_end_ms) watts.push_back(s.watts);
  }
  if (watts.size() < kMinWindowSamples) {
    fail(ErrorKind::insufficient_data,
         "window [" + text::format_double(t_start_ms) + ", " + text::format_double(t_end_ms) +
             "] ms of '" + timeline.source() + "' holds " + std::to_string(watts.size()) +
             " samples; need at least " + std::to_string(kMinWindowSamples));
  }
  PowerStats st;
  st.mean_w = mean_power(watts);
  const auto [lo, hi] = std::minmax_element(watts.begin(), watts.end());
  st.min_w = *lo;
  st.max_w = *hi;
  st.sample_count = watts.size();
  st.t_start_ms = t_start_ms;
  st.t_end_ms = t_end_ms;
  return st;
}

PowerStats steady_state_window(const telemetry::Timeline& timeline, double start_ms,
                               double end_ms, double trim_fraction) {
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    fail(ErrorKind::config, "trim fraction must be in [0, 0.5)");
  }
  if (!(end_ms > start_ms)) {
    fail(ErrorKind::insufficient_data, "measured phase has no duration");
  }
  const double trim = (end_ms - start_ms) * trim_fraction;
  return window_stats(timeline, start_ms + trim, end_ms - trim);
}

PowerStats steady_state_window(const telemetry::Timeline& timeline, const gemm::RunRecord& record,
                               double trim_fraction) {
  return steady_state_window(timeline, record.measured_start_ms, record.measured_end_ms,
                             trim_fraction);
}

double percent_increase(double hi_w, double lo_w) {
  if (!(lo_w > 0.0)) fail(ErrorKind::config, "percent_increase needs a positive baseline");
  return 100.0 * (hi_w - lo_w) / lo_w;
}

double pj_per_flop(double delta_w, double flop_rate) {
  if (!(flop_rate > 0.0)) fail(ErrorKind::config, "pj_per_flop needs a positive FLOP rate");
  return 1e12 * delta_w / flop_rate;
}

double tdp_fraction(double mean_w, double tdp_w) {
  if (!(tdp_w > 0.0)) fail(ErrorKind::config, "tdp_fraction needs a positive TDP");
  return mean_w / tdp_w;
}

Aggregate aggregate_runs(std::span<const RunPower> runs) {
  if (runs.empty()) fail(ErrorKind::no_input, "no runs to aggregate");
  std::map<std::string, std::vector<double>> per_node;
  for (const auto& r : runs) per_node[r.node_id].push_back(r.stats.mean_w);

  Aggregate agg;
  std::vector<double> node_means;
  for (const auto& [node, means] : per_node) {
    const double m = mean_power(means);
    agg.node_means[node] = m;
    node_means.push_back(m);
  }
  agg.grand_mean = mean_power(node_means);
  const auto [lo, hi] = std::minmax_element(node_means.begin(), node_means.end());
  agg.spread = *lo > 0.0 ? (*hi - *lo) / *lo : 0.0;
  agg.spread_warning = agg.spread > kNodeSpreadLimit;
  return agg;
}

double aggregate_flop_rate(std::span<const gemm::RunRecord> per_core) {
  if (per_core.empty()) fail(ErrorKind::no_input, "no per-core records");
  double flops = 0.0;
  double slowest = 0.0;
  for (const auto& r : per_core) {
    flops += static_cast<double>(r.total_flops);
    slowest = std::max(slowest, r.measured.wall_seconds);
  }
  if (!(slowest > 0.0)) fail(ErrorKind::insufficient_data, "per-core records lack timings");
  return flops / slowest;
}

SweepSeries sweep_series(std::span<const SweepInput> inputs,
                         std::optional<double> baseline_random_w,
                         std::optional<double> baseline_fixed_w) {
  if (inputs.empty()) fail(ErrorKind::no_input, "no sweep points");
  const auto& first = inputs.front();
  SweepSeries out;
  out.family = first.spec.family;
  out.value_mode = first.spec.value_mode;
  out.n_dim = first.spec.n_dim;
  out.reference = {first.tdp_w, baseline_random_w, baseline_fixed_w};
  for (const auto& in : inputs) {
    if (in.spec.family != out.family || in.spec.value_mode != out.value_mode ||
        in.spec.n_dim != out.n_dim || in.tdp_w != first.tdp_w) {
      fail(ErrorKind::config, "sweep inputs mix family, value mode, N or TDP");
    }
    in.spec.validate();
    for (const auto& p : out.points) {
      if (p.level == in.spec.level) {
        fail(ErrorKind::ambiguity, "level " + std::to_string(p.level) + " appears twice in sweep");
      }
    }
    out.points.push_back({in.spec.level, in.mean_w});
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.level < b.level; });
  return out;
}

namespace {

std::string optional_number(const std::optional<double>& v) {
  return v ? text::format_double(*v) : std::string{};
}

}  // namespace

std::string format_summary(std::span<const SummaryRow> rows) {
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += patterns::to_string(r.spec.family);
    out += ',' + std::to_string(r.spec.level) + ',';
    out += patterns::to_string(r.spec.value_mode);
    out += ',' + text::format_double(r.mean_w);
    out += ',' + text::format_double(r.tdp_frac);
    out += ',' + text::format_double(r.flop_rate);
    out += ',' + optional_number(r.pj_per_flop_vs_fixed);
    out += '\n';
  }
  return out;
}

std::string format_series(const SweepSeries& s) {
  std::string out = "#series schema_version=" + std::to_string(kSeriesSchemaVersion);
  out += " family=" + std::string(patterns::to_string(s.family));
  out += " value_mode=" + std::string(patterns::to_string(s.value_mode));
  out += " n=" + std::to_string(s.n_dim);
  out += " tdp_w=" + text::format_double(s.reference.tdp_w);
  out += " baseline_random_w=" + optional_number(s.reference.baseline_random_w);
  out += " baseline_fixed_w=" + optional_number(s.reference.baseline_fixed_w);
  out += '\n';
  out += kSeriesHeader;
  out += '\n';
  for (const auto& p : s.points) {
    out += std::to_string(p.level) + ',' + text::format_double(p.mean_w) + '\n';
  }
  return out;
}

SweepSeries parse_series(std::string_view body) {
  const auto rows = text::lines(body);
  if (rows.size() < 2 || !rows[0].starts_with("#series ")) {
    fail(ErrorKind::format, "line 1: missing '#series' metadata line");
  }
  SweepSeries s;
  for (auto kv : text::split(rows[0].substr(8), ' ')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::format, "line 1: bad field");
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    if (key == "schema_version") {
      if (text::parse_i64(val, "schema_version") != kSeriesSchemaVersion) {
        fail(ErrorKind::schema, "unsupported series schema_version " + std::string(val));
      }
    } else if (key == "family") {
      s.family = patterns::parse_family(val);
    } else if (key == "value_mode") {
      s.value_mode = patterns::parse_value_mode(val);
    } else if (key == "n") {
      s.n_dim = text::parse_u64(val, "n");
    } else if (key == "tdp_w") {
      s.reference.tdp_w = text::parse_double(val, "tdp_w");
    } else if (key == "baseline_random_w" && !val.empty()) {
      s.reference.baseline_random_w = text::parse_double(val, "baseline_random_w");
    } else if (key == "baseline_fixed_w" && !val.empty()) {
      s.reference.baseline_fixed_w = text::parse_double(val, "baseline_fixed_w");
    }
  }
  if (rows[1] != kSeriesHeader) fail(ErrorKind::format, "line 2: unexpected series header");
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const auto f = text::split(rows[i], ',');
    if (f.size() != 2) fail(ErrorKind::format, "line " + std::to_string(i + 1) + ": expected 2 fields");
    s.points.push_back({static_cast<unsigned>(text::parse_u64(f[0], "level")),
                        text::parse_double(f[1], "mean_w")});
  }
  return s;
}

std::string series_file_name(const SweepSeries& s) {
  return "series-" + std::string(patterns::to_string(s.family)) + "-" +
         std::string(patterns::to_string(s.value_mode)) + ".csv";
}

}  // namespace epower::analysis
