#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epower/gemm.hpp"
#include "epower/model.hpp"
#include "epower/patterns.hpp"

namespace epower::manifest {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr std::size_t kDefaultMaxN = 1024;
inline constexpr std::uint32_t kDefaultRepetitions = 3;
inline constexpr double kDefaultTdpW = 400.0;
inline constexpr std::string_view kDefaultPmCountersMemoryPath = "/sys/cray/pm_counters/memory_power";
inline constexpr std::string_view kDefaultRaplPath = "/sys/class/powercap/intel-rapl:0/energy_uj";

/// Telemetry source kinds accepted in `[telemetry] sources`.
inline constexpr std::string_view kSourceKinds[] = {"replay", "gpu", "pm_counters",
                                                    "pm_counters_memory", "rapl"};

struct TelemetrySection {
  double interval_ms = telemetry::kDefaultIntervalMs;
  std::vector<std::string> sources;
  std::string replay_path;
  /// Empty means the default query with `{interval}` expanded.
  std::string gpu_command;
  std::string pm_counters_path{telemetry::kDefaultPmCountersPath};
  std::string pm_counters_memory_path{kDefaultPmCountersMemoryPath};
  std::string rapl_path{kDefaultRaplPath};
  double rapl_joules_per_unit = 1e-6;

  bool operator==(const TelemetrySection&) const = default;
};

struct SweepSection {
  unsigned level_min = 0;
  /// Defaults to log2(N).
  std::optional<unsigned> level_max;
  std::vector<patterns::ValueMode> value_modes{patterns::ValueMode::independent,
                                               patterns::ValueMode::fixed_common};
  /// Also run baseline_random and baseline_fixed for the reference lines.
  bool baselines = false;

  bool operator==(const SweepSection&) const = default;
};

struct ModelSection {
  std::size_t lanes = 1;
  std::size_t tile_m = 1;
  std::size_t tile_n = 1;
  double w_mul = 1.0;
  double w_acc = 1.0;
  std::size_t max_n = kDefaultMaxN;
  /// Entries of the form `family[/value_mode[/level]]`; N and seed come from [pattern].
  std::vector<std::string> specs;

  model::Schedule schedule() const;
  model::Weights weights() const { return {w_mul, w_acc}; }
  bool operator==(const ModelSection&) const = default;
};

struct RunSection {
  std::string node = "local";
  std::uint32_t repetitions = kDefaultRepetitions;
  double tdp_w = kDefaultTdpW;
  std::string output_dir = "out";

  bool operator==(const RunSection&) const = default;
};

struct ExperimentManifest {
  int schema_version = kManifestSchemaVersion;
  patterns::PatternSpec pattern;
  std::uint64_t reps = gemm::kDefaultReps;
  double alpha = 1.0;
  double beta = 1.0;
  std::string backend = "reference";
  /// Out-of-process backend command; registers `backend` when set.
  std::string backend_command;
  bool backend_gpu = false;
  double warmup_seconds = gemm::kDefaultWarmupSeconds;
  TelemetrySection telemetry;
  std::optional<SweepSection> sweep;
  ModelSection model;
  RunSection run;

  /// Directory relative paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  /// Structural checks only; backend registration is checked by the commands.
  void validate() const;
  gemm::GemmConfig gemm_config() const;
  std::filesystem::path resolve(const std::string& path) const;

  bool operator==(const ExperimentManifest& other) const;
};

/// Canonical text: every key in fixed order, defaults included.
std::string format_manifest(const ExperimentManifest& manifest);

/// Throws Error{config} on unknown sections or keys and Error{schema} on an
/// unsupported schema_version.
ExperimentManifest parse_manifest(std::string_view text);

/// Reads and parses a manifest, setting base_dir to its directory.
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// FNV-1a of the canonical text, as 0x-prefixed hex.
std::string digest(const ExperimentManifest& manifest);

/// Parses a `family[/value_mode[/level]]` model spec entry.
patterns::PatternSpec parse_spec_entry(std::string_view entry, std::size_t n_dim,
                                       std::uint64_t seed);

}  // namespace epower::manifest
