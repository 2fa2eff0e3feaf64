#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epower/patterns.hpp"
#include "epower/telemetry.hpp"

namespace epower::gemm {

using patterns::Matrix;

/// C <- alpha * A * B + beta * C for square row-major operands. Each output
/// cell sums its products in ascending k, so results are bit-reproducible.
/// Throws Error{dimension} on mismatched sizes.
void reference_gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t n_dim, double alpha, double beta);
void reference_gemm(const Matrix& a, const Matrix& b, Matrix& c, double alpha, double beta);

/// reps * 2 * n^3, checked for 64-bit overflow.
std::uint64_t flop_count(std::uint64_t n_dim, std::uint64_t reps);

struct Checksum {
  double sum = 0.0;
  std::uint64_t bits = 0;
  bool operator==(const Checksum&) const = default;
};

/// Sum of all elements in ascending row-major order.
Checksum checksum(const Matrix& c);

inline constexpr std::uint64_t kDefaultReps = 100;
inline constexpr double kDefaultWarmupSeconds = 60.0;

struct GemmConfig {
  std::size_t n_dim = 0;
  std::uint64_t reps = kDefaultReps;
  double alpha = 1.0;
  double beta = 1.0;
  std::string backend_id = "reference";
  double warmup_seconds = kDefaultWarmupSeconds;
  patterns::PatternSpec pattern;

  void validate() const;
  bool operator==(const GemmConfig&) const = default;
};

/// Initial C: 1.0 for baseline_fixed, 0.0 otherwise.
double initial_c(patterns::Family family);

struct PhaseTiming {
  double wall_seconds = 0.0;
  std::uint64_t iterations = 0;
  bool operator==(const PhaseTiming&) const = default;
};

struct RunRecord {
  GemmConfig config;
  PhaseTiming warmup;
  PhaseTiming measured;
  std::uint64_t total_flops = 0;
  double flop_rate = 0.0;
  Checksum c_checksum;
  std::vector<std::string> timeline_ids;
  std::string node_id = "local";
  std::uint32_t run_index = 0;
  /// Set when a telemetry source failed and its timeline was dropped.
  bool telemetry_warning = false;
  std::vector<std::string> warnings;
  /// Measured-phase bounds in the timelines' epoch frame.
  double measured_start_ms = 0.0;
  double measured_end_ms = 0.0;
  std::int64_t epoch_unix_ms = 0;
  double tdp_w = 0.0;
  std::string manifest_digest;

  bool operator==(const RunRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Backends

struct BackendCapabilities {
  bool supports_gpu = false;
  bool in_process = true;
  /// e.g. "dfma" or "dmma" when known.
  std::optional<std::string> fpu_path;
};

using GemmFn = std::function<void(const Matrix& a, const Matrix& b, Matrix& c, double alpha,
                                  double beta)>;

struct Backend {
  std::string id;
  BackendCapabilities caps;
  /// In-process backends: one GEMM per call.
  GemmFn fn;
  /// Out-of-process backends: shell command run once per experiment with
  /// the request manifest path appended.
  std::string command;
};

class BackendRegistry {
 public:
  /// Registry holding the `reference` backend.
  static BackendRegistry with_defaults();

  void add(Backend backend);
  /// Registers an out-of-process backend speaking the request/result protocol.
  void add_external(std::string id, std::string command, BackendCapabilities caps = {false, false, {}});
  bool contains(const std::string& id) const;
  const Backend& get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, Backend> backends_;
};

// ---------------------------------------------------------------------------
// Experiment runner

struct RunContext {
  telemetry::Clock::time_point epoch = telemetry::Clock::now();
  std::int64_t epoch_unix_ms = 0;
  /// Started before warm-up and stopped after the measured phase.
  std::vector<std::unique_ptr<telemetry::PowerSource>> sources;
  double interval_ms = telemetry::kDefaultIntervalMs;
  /// Scratch directory for out-of-process backends.
  std::filesystem::path work_dir = std::filesystem::temp_directory_path();
  std::string node_id = "local";
  std::uint32_t run_index = 0;
};

struct Experiment {
  RunRecord record;
  std::vector<telemetry::Timeline> timelines;
};

/// Generates the pattern once, warms up on a scratch copy of C until
/// warmup_seconds elapse, then runs `reps` timed GEMMs on C back-to-back.
/// Telemetry sources sample concurrently; a failing source is dropped and
/// flagged instead of failing the run.
Experiment run_experiment(const GemmConfig& config, const BackendRegistry& registry,
                          RunContext context = {});

/// Out-of-process protocol file names inside the work directory.
inline constexpr std::string_view kRequestFile = "backend-request.ini";
inline constexpr std::string_view kResultFile = "backend-result.ini";

}  // namespace epower::gemm
