#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace epower::telemetry {

inline constexpr double kDefaultIntervalMs = 100.0;
inline constexpr std::string_view kDefaultPmCountersPath = "/sys/cray/pm_counters/power";
/// Streams `timestamp, power.draw [W]` rows every `{interval}` milliseconds.
inline constexpr std::string_view kDefaultGpuCommand =
    "nvidia-smi --query-gpu=timestamp,power.draw --format=csv -lms {interval}";
/// Consecutive failed polls tolerated before sample_loop gives up.
inline constexpr int kMaxConsecutiveFailures = 10;

struct PowerSample {
  double t_ms = 0.0;
  double watts = 0.0;
  std::string source;

  bool operator==(const PowerSample&) const = default;
};

/// Strictly time-ordered power samples from one source.
class Timeline {
 public:
  Timeline() = default;
  Timeline(std::string source, double interval_ms, std::int64_t epoch_unix_ms = 0);

  /// Throws Error{ordering} unless sample.t_ms is later than the last sample,
  /// Error{format} for negative/non-finite values.
  void append(PowerSample sample);

  /// Marks a missing sample. Gaps are counted, never filled.
  void note_gap() { ++gaps_; }

  const std::string& source() const noexcept { return source_; }
  double interval_ms() const noexcept { return interval_ms_; }
  std::int64_t epoch_unix_ms() const noexcept { return epoch_unix_ms_; }
  const std::vector<PowerSample>& samples() const noexcept { return samples_; }
  std::size_t gaps() const noexcept { return gaps_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }

  /// Samples and metadata; the gap counter is bookkeeping and not compared.
  bool operator==(const Timeline& other) const {
    return source_ == other.source_ && interval_ms_ == other.interval_ms_ &&
           epoch_unix_ms_ == other.epoch_unix_ms_ && samples_ == other.samples_;
  }

 private:
  std::string source_;
  double interval_ms_ = kDefaultIntervalMs;
  std::int64_t epoch_unix_ms_ = 0;
  std::vector<PowerSample> samples_;
  std::size_t gaps_ = 0;
};

double mean_watts(const Timeline& timeline);

// ---------------------------------------------------------------------------
// Parsers

struct ParsedCsv {
  Timeline timeline;
  std::size_t skipped = 0;  // rows reporting N/A or [Not Supported]
};

/// GPU management-tool query CSV: a header naming `timestamp` and
/// `power.draw`, then rows like `2022/09/01 10:00:00.123, 238.51 W`.
ParsedCsv parse_power_csv(std::string_view text, double interval_ms = kDefaultIntervalMs,
                          std::string source = "gpu");

/// Milliseconds since the Unix epoch for `YYYY/MM/DD HH:MM:SS(.fff)`, read as UTC.
double parse_tool_timestamp(std::string_view s);

/// One pm_counters line: `<value> W <timestamp_us>`.
PowerSample parse_pm_counters(std::string_view line, std::string source = "pm_counters");

/// Timeline CSV. First line `#timeline schema_version=1 ...` carries the
/// epoch, interval and source; then the header `t_ms,watts,source` and one
/// LF-terminated row per sample with round-trip decimal precision.
inline constexpr int kTimelineSchemaVersion = 1;
inline constexpr std::string_view kTimelineHeader = "t_ms,watts,source";

std::string format_timeline(const Timeline& timeline);
Timeline parse_timeline(std::string_view text);
void write_timeline(const std::filesystem::path& path, const Timeline& timeline);
Timeline read_timeline(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sources

/// One poll result. Power sources report watts; counter sources report
/// cumulative joules and are differenced by the sampler.
struct Reading {
  enum class Kind { power, energy };
  Kind kind = Kind::power;
  double value = 0.0;
  /// Source-supplied timestamp (replay); otherwise the poll time is used.
  std::optional<double> t_ms;
};

class PowerSource {
 public:
  virtual ~PowerSource() = default;
  virtual std::string label() const = 0;
  /// `now_ms` is the poll time on the sampler's clock. nullopt (or a thrown
  /// exception) marks a failed poll.
  virtual std::optional<Reading> read(double now_ms) = 0;
  /// True once a finite source has nothing left to deliver.
  virtual bool exhausted() const { return false; }
};

/// Replays a recorded timeline one sample per poll. `recorded` timing keeps
/// the stored offsets and stops at the end; `paced` stamps each value with
/// the poll time and cycles through the recording, which is how a replay
/// source drives a live run.
class ReplaySource final : public PowerSource {
 public:
  enum class Timing { recorded, paced };
  explicit ReplaySource(Timeline recorded, Timing timing = Timing::recorded);
  std::string label() const override { return label_; }
  std::optional<Reading> read(double now_ms) override;
  bool exhausted() const override;

 private:
  Timeline recorded_;
  std::string label_;
  Timing timing_;
  std::size_t next_ = 0;
};

/// Re-reads a pm_counters style file each poll.
class PmCountersSource final : public PowerSource {
 public:
  explicit PmCountersSource(std::filesystem::path path, std::string label = "pm_counters");
  std::string label() const override { return label_; }
  std::optional<Reading> read(double now_ms) override;

 private:
  std::filesystem::path path_;
  std::string label_;
};

/// Cumulative energy counter file (RAPL `energy_uj` style): a bare number
/// scaled by `joules_per_unit`.
class EnergyCounterSource final : public PowerSource {
 public:
  EnergyCounterSource(std::filesystem::path path, double joules_per_unit = 1e-6,
                      std::string label = "rapl");
  std::string label() const override { return label_; }
  std::optional<Reading> read(double now_ms) override;

 private:
  std::filesystem::path path_;
  double scale_;
  std::string label_;
};

/// Streams the GPU management tool in its looping CSV query mode and takes
/// the newest row at each poll.
class GpuToolSource final : public PowerSource {
 public:
  explicit GpuToolSource(std::string command, std::string label = "gpu");
  ~GpuToolSource() override;
  std::string label() const override { return label_; }
  std::optional<Reading> read(double now_ms) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string label_;
};

/// Expands `{interval}` in the default GPU command.
std::string gpu_command_for(double interval_ms, std::string_view pattern = kDefaultGpuCommand);

/// Converts successive cumulative-energy readings to power. The first
/// reading only primes the state; a decreasing counter (wrap or reset)
/// yields no sample and is reported as a gap.
class EnergyDifferencer {
 public:
  struct Result {
    std::optional<PowerSample> sample;
    bool gap = false;
  };
  Result push(double t_ms, double joules, const std::string& source);

 private:
  std::optional<std::pair<double, double>> last_;
};

// ---------------------------------------------------------------------------
// Sampling

using Clock = std::chrono::steady_clock;

/// Polls `source` every `interval_ms` until `stop` fires or a finite source
/// runs dry. Timestamps are actual poll times relative to `epoch` (or the
/// source's own timestamps for replay). Failed polls become gaps; more than
/// kMaxConsecutiveFailures in a row throws Error{source}.
Timeline sample_loop(PowerSource& source, double interval_ms, std::stop_token stop,
                     Clock::time_point epoch = Clock::now(),
                     std::int64_t epoch_unix_ms = 0);

/// Runs sample_loop on its own thread. stop() joins and hands over the
/// timeline, rethrowing any source error.
class Sampler {
 public:
  Sampler(std::unique_ptr<PowerSource> source, double interval_ms, Clock::time_point epoch,
          std::int64_t epoch_unix_ms);
  ~Sampler();

  Sampler(const Sampler&) = delete;
  Sampler& operator=(const Sampler&) = delete;

  Timeline stop();
  std::string label() const { return label_; }

 private:
  std::unique_ptr<PowerSource> source_;
  std::string label_;
  Timeline result_;
  std::exception_ptr error_;
  std::jthread thread_;
};

std::int64_t unix_now_ms();

}  // namespace epower::telemetry
