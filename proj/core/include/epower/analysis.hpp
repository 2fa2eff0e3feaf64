#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epower/gemm.hpp"
#include "epower/patterns.hpp"
#include "epower/telemetry.hpp"

namespace epower::analysis {

/// Fraction of the measured phase dropped at each end before averaging.
inline constexpr double kDefaultTrimFraction = 0.05;
inline constexpr std::size_t kMinWindowSamples = 10;
/// Cross-node spread above which aggregate_runs raises a variability flag.
inline constexpr double kNodeSpreadLimit = 0.02;

struct PowerStats {
  double mean_w = 0.0;
  double min_w = 0.0;
  double max_w = 0.0;
  std::size_t sample_count = 0;
  double t_start_ms = 0.0;
  double t_end_ms = 0.0;
};

/// Mean that depends only on the multiset of values: the same samples in
/// any order give a bit-identical result, and a constant input returns the
/// constant exactly.
double mean_power(std::span<const double> watts);

/// Stats over samples with t in [t_start_ms, t_end_ms].
/// Throws Error{insufficient_data} below kMinWindowSamples.
PowerStats window_stats(const telemetry::Timeline& timeline, double t_start_ms, double t_end_ms);

/// Restricts to the measured phase [start, end], trims `trim_fraction` of
/// the span from each end, and reduces what remains.
PowerStats steady_state_window(const telemetry::Timeline& timeline, double start_ms,
                               double end_ms, double trim_fraction = kDefaultTrimFraction);
PowerStats steady_state_window(const telemetry::Timeline& timeline, const gemm::RunRecord& record,
                               double trim_fraction = kDefaultTrimFraction);

/// 100 * (hi - lo) / lo. Throws Error{config} unless lo > 0.
double percent_increase(double hi_w, double lo_w);

/// Energy per FLOP in picojoules: 1e12 * delta_w / flop_rate.
double pj_per_flop(double delta_w, double flop_rate);

double tdp_fraction(double mean_w, double tdp_w);

struct RunPower {
  std::string node_id;
  std::uint32_t run_index = 0;
  PowerStats stats;
};

struct Aggregate {
  std::map<std::string, double> node_means;
  double grand_mean = 0.0;
  /// (max node mean - min node mean) / min node mean.
  double spread = 0.0;
  bool spread_warning = false;
};

Aggregate aggregate_runs(std::span<const RunPower> runs);

/// Aggregate rate of concurrent per-core runs: total FLOPs over the slowest
/// run's measured time.
double aggregate_flop_rate(std::span<const gemm::RunRecord> per_core);

struct SweepPoint {
  unsigned level = 0;
  double mean_w = 0.0;
  bool operator==(const SweepPoint&) const = default;
};

struct ReferenceLines {
  double tdp_w = 0.0;
  std::optional<double> baseline_random_w;
  std::optional<double> baseline_fixed_w;
};

struct SweepSeries {
  patterns::Family family = patterns::Family::block_rowcol;
  patterns::ValueMode value_mode = patterns::ValueMode::independent;
  std::size_t n_dim = 0;
  std::vector<SweepPoint> points;  // sorted by level
  ReferenceLines reference;
};

struct SweepInput {
  patterns::PatternSpec spec;
  double mean_w = 0.0;
  double tdp_w = 0.0;
};

/// Orders per-level means into one series. All inputs must share family,
/// value mode, N and TDP; a repeated level throws Error{ambiguity}.
SweepSeries sweep_series(std::span<const SweepInput> inputs,
                         std::optional<double> baseline_random_w = std::nullopt,
                         std::optional<double> baseline_fixed_w = std::nullopt);

// ---------------------------------------------------------------------------
// Report emission

inline constexpr std::string_view kSummaryHeader =
    "family,level,value_mode,mean_w,tdp_frac,flop_rate,pj_per_flop_vs_fixed";

struct SummaryRow {
  patterns::PatternSpec spec;
  double mean_w = 0.0;
  double tdp_frac = 0.0;
  double flop_rate = 0.0;
  std::optional<double> pj_per_flop_vs_fixed;
};

std::string format_summary(std::span<const SummaryRow> rows);

inline constexpr int kSeriesSchemaVersion = 1;
inline constexpr std::string_view kSeriesHeader = "level,mean_w";

/// `#series schema_version=1 ...` metadata line with the reference lines,
/// then `level,mean_w` rows.
std::string format_series(const SweepSeries& series);
SweepSeries parse_series(std::string_view text);

/// File name `series-<family>-<mode>.csv`.
std::string series_file_name(const SweepSeries& series);

}  // namespace epower::analysis
