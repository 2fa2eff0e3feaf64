#include <cmath>
#include <condition_variable>
#include <mutex>

#include "epower/error.hpp"
#include "epower/process.hpp"
#include "epower/telemetry.hpp"
#include "epower/text.hpp"

namespace epower::telemetry {

ReplaySource::ReplaySource(Timeline recorded, Timing timing)
    : recorded_(std::move(recorded)), label_(recorded_.source()), timing_(timing) {}

bool ReplaySource::exhausted() const {
  if (recorded_.empty()) return true;
  return timing_ == Timing::recorded && next_ >= recorded_.size();
}

std::optional<Reading> ReplaySource::read(double) {
  if (exhausted()) return std::nullopt;
  if (timing_ == Timing::paced) {
    const auto& s = recorded_.samples()[next_++ % recorded_.size()];
    return Reading{Reading::Kind::power, s.watts, std::nullopt};
  }
  const auto& s = recorded_.samples()[next_++];
  return Reading{Reading::Kind::power, s.watts, s.t_ms};
}

PmCountersSource::PmCountersSource(std::filesystem::path path, std::string label)
    : path_(std::move(path)), label_(std::move(label)) {}

std::optional<Reading> PmCountersSource::read(double) {
  const auto contents = text::read_file(path_);
  const auto rows = text::lines(contents);
  if (rows.empty()) return std::nullopt;
  const auto sample = parse_pm_counters(rows.front(), label_);
  return Reading{Reading::Kind::power, sample.watts, std::nullopt};
}

EnergyCounterSource::EnergyCounterSource(std::filesystem::path path, double joules_per_unit,
                                         std::string label)
    : path_(std::move(path)), scale_(joules_per_unit), label_(std::move(label)) {}

std::optional<Reading> EnergyCounterSource::read(double) {
  const auto contents = text::read_file(path_);
  const auto raw = text::parse_double(text::trim(contents), "energy counter");
  return Reading{Reading::Kind::energy, raw * scale_, std::nullopt};
}

struct GpuToolSource::Impl {
  explicit Impl(const std::string& command) : proc(command) {}
  process::StreamingProcess proc;
};

GpuToolSource::GpuToolSource(std::string command, std::string label)
    : impl_(std::make_unique<Impl>(command)), label_(std::move(label)) {}

GpuToolSource::~GpuToolSource() = default;

std::optional<Reading> GpuToolSource::read(double) {
  std::optional<double> newest;
  for (const auto& line : impl_->proc.read_lines()) {
    const auto fields = text::split(line, ',');
    if (fields.size() != 2) continue;
    if (text::trim(fields[0]) == "timestamp") continue;
    auto power = text::trim(fields[1]);
    if (power.ends_with('W')) {
      power.remove_suffix(1);
      power = text::trim(power);
    }
    try {
      newest = text::parse_double(power, "power.draw");
    } catch (const Error&) {
      // N/A rows count as a missed poll unless a later row parses.
    }
  }
  if (!newest) return std::nullopt;
  return Reading{Reading::Kind::power, *newest, std::nullopt};
}

std::string gpu_command_for(double interval_ms, std::string_view pattern) {
  std::string out(pattern);
  const std::string key = "{interval}";
  const auto interval = std::to_string(static_cast<long long>(std::llround(interval_ms)));
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos)) {
    out.replace(pos, key.size(), interval);
    pos += interval.size();
  }
  return out;
}

EnergyDifferencer::Result EnergyDifferencer::push(double t_ms, double joules,
                                                  const std::string& source) {
  Result result;
  if (last_) {
    const auto [t0, e0] = *last_;
    if (joules < e0 || t_ms <= t0) {
      result.gap = true;
    } else {
      result.sample = PowerSample{t_ms, (joules - e0) / (t_ms - t0) * 1000.0, source};
    }
  }
  last_ = {t_ms, joules};
  return result;
}

Timeline sample_loop(PowerSource& source, double interval_ms, std::stop_token stop,
                     Clock::time_point epoch, std::int64_t epoch_unix_ms) {
  if (!(interval_ms >= 1.0)) fail(ErrorKind::config, "sampling interval must be >= 1 ms");
  const auto label = source.label();
  Timeline timeline(label, interval_ms, epoch_unix_ms);
  EnergyDifferencer differencer;
  int consecutive_failures = 0;

  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double, std::milli>(interval_ms));
  auto next = Clock::now();
  std::mutex mu;
  std::condition_variable_any cv;

  auto record_gap = [&] {
    timeline.note_gap();
    if (++consecutive_failures > kMaxConsecutiveFailures) {
      fail(ErrorKind::source, "source '" + label + "' failed " +
                                  std::to_string(consecutive_failures) + " consecutive polls");
    }
  };

  while (!stop.stop_requested() && !source.exhausted()) {
    const auto now = Clock::now();
    const double now_ms = std::chrono::duration<double, std::milli>(now - epoch).count();
    std::optional<Reading> reading;
    try {
      reading = source.read(now_ms);
    } catch (const std::exception&) {
      reading.reset();
    }

    if (!reading) {
      record_gap();
    } else {
      const double t = reading->t_ms.value_or(now_ms);
      std::optional<PowerSample> sample;
      bool gap = false;
      if (reading->kind == Reading::Kind::energy) {
        auto r = differencer.push(t, reading->value, label);
        sample = std::move(r.sample);
        gap = r.gap;
      } else if (std::isfinite(reading->value) && reading->value >= 0.0 && t >= 0.0) {
        sample = PowerSample{t, reading->value, label};
      } else {
        gap = true;
      }
      if (sample && !timeline.empty() && sample->t_ms <= timeline.samples().back().t_ms) {
        sample.reset();
        gap = true;
      }
      if (gap) {
        record_gap();
      } else {
        consecutive_failures = 0;
      }
      if (sample) timeline.append(std::move(*sample));
    }

    next += period;
    if (next < Clock::now()) next = Clock::now();
    std::unique_lock lock(mu);
    cv.wait_until(lock, stop, next, [] { return false; });
  }
  return timeline;
}

Sampler::Sampler(std::unique_ptr<PowerSource> source, double interval_ms,
                 Clock::time_point epoch, std::int64_t epoch_unix_ms)
    : source_(std::move(source)), label_(source_->label()) {
  thread_ = std::jthread([this, interval_ms, epoch, epoch_unix_ms](std::stop_token stop) {
    try {
      result_ = sample_loop(*source_, interval_ms, stop, epoch, epoch_unix_ms);
    } catch (...) {
      error_ = std::current_exception();
    }
  });
}

Sampler::~Sampler() = default;

Timeline Sampler::stop() {
  if (thread_.joinable()) {
    thread_.request_stop();
    thread_.join();
  }
  if (error_) std::rethrow_exception(error_);
  return std::move(result_);
}

}  // namespace epower::telemetry
