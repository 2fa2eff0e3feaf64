#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epower/analysis.hpp"
#include "epower/error.hpp"
#include "epower/gemm.hpp"
#include "epower/manifest.hpp"
#include "epower/model.hpp"
#include "epower/records.hpp"

namespace epower::commands {

inline constexpr std::string_view kReportFile = "report.txt";
inline constexpr std::string_view kFailedLevelsFile = "failed-levels.csv";
inline constexpr std::string_view kScoreFile = "score.csv";
inline constexpr std::string_view kRankingFile = "ranking.csv";
inline constexpr std::string_view kScoreHeader =
    "family,level,value_mode,score_per_flop,mul_toggles,acc_toggles,flops";

/// Command-line values that take precedence over the manifest.
struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> interval_ms;
  std::optional<std::size_t> max_n;
};

/// Applies overrides and validates. `out` replaces run.output_dir.
manifest::ExperimentManifest apply_overrides(manifest::ExperimentManifest m, const Overrides& o);

/// Output directory for a manifest: run.output_dir resolved against base_dir.
std::filesystem::path output_dir(const manifest::ExperimentManifest& m);

/// Defaults plus the manifest's out-of-process backend, if any.
gemm::BackendRegistry registry_for(const manifest::ExperimentManifest& m);

/// One aggregated summary group: all runs sharing family, level, mode and N.
struct Group {
  patterns::PatternSpec spec;
  analysis::Aggregate aggregate;
  std::size_t runs = 0;
  double flop_rate = 0.0;
  double tdp_w = 0.0;
};

struct Report {
  std::vector<Group> groups;
  std::vector<analysis::SummaryRow> rows;
  std::vector<analysis::SweepSeries> series;
  std::vector<std::string> lines;
};

/// The shared post-processing pipeline: steady-state windows on each run's
/// first timeline, per-group aggregation across nodes and repetitions,
/// baseline reference lines, series and headline metrics.
Report build_report(std::span<const records::LoadedRun> runs);

/// Writes summary.csv, one series CSV per series, and report.txt.
void write_report(const std::filesystem::path& dir, const Report& report);

/// Specs a sweep covers: levels x value modes, plus baselines if requested.
std::vector<patterns::PatternSpec> plan_sweep(const manifest::ExperimentManifest& m);

/// Human-readable execution plan; validates the manifest and backend first.
std::string describe_plan(const manifest::ExperimentManifest& m, const gemm::BackendRegistry& registry);

struct RunOutput {
  std::vector<std::filesystem::path> run_dirs;
  Report report;
};

/// Runs run.repetitions experiments of [pattern] and persists each in its
/// own run directory under the output directory, then the root summary.
RunOutput cmd_run(const manifest::ExperimentManifest& m, const gemm::BackendRegistry& registry);

struct FailedLevel {
  patterns::PatternSpec spec;
  ErrorKind kind;
  std::string message;
};

struct SweepOutput {
  std::vector<std::filesystem::path> run_dirs;
  std::vector<FailedLevel> failed;
  std::optional<Report> report;
};

/// Runs every planned spec in sequence; failed levels are recorded in
/// failed-levels.csv and the sweep continues.
SweepOutput cmd_sweep(const manifest::ExperimentManifest& m, const gemm::BackendRegistry& registry);

/// Rebuilds the report from run directories found under `inputs`.
/// Throws Error{no_input} when no run directory is found.
Report cmd_replay(std::span<const std::filesystem::path> inputs, const std::filesystem::path& out_dir);

/// Specs requested for scoring: model.specs, else the sweep plan, else [pattern].
std::vector<patterns::PatternSpec> score_specs(const manifest::ExperimentManifest& m);

struct ScoreOutput {
  std::vector<patterns::PatternSpec> specs;
  std::vector<model::ToggleReport> reports;  // parallel to specs
  std::vector<model::RankedSpec> ranking;
};

/// Throws Error{config} if N exceeds model.max_n.
ScoreOutput cmd_score(const manifest::ExperimentManifest& m, const std::filesystem::path& out_dir);

std::string format_scores(const ScoreOutput& scores);
std::string format_ranking(const ScoreOutput& scores);

/// Writes the embedded published measurements as run directories.
std::size_t cmd_fixtures(const std::filesystem::path& out_dir);

}  // namespace epower::commands
