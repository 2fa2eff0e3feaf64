#include "epower/gemm.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>

#include "epower/error.hpp"
#include "epower/process.hpp"
#include "epower/text.hpp"

namespace epower::gemm {

void reference_gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t n, double alpha, double beta) {
  const std::size_t cells = n * n;
  if (a.size() != cells || b.size() != cells || c.size() != cells) {
    fail(ErrorKind::dimension, "gemm operands must all be " + std::to_string(n) + "x" +
                                   std::to_string(n));
  }
  // Row-at-a-time accumulation: acc[j] sees k in ascending order, which is
  // the same per-cell summation as the textbook triple loop.
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const double* a_row = a.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a_row[k];
      const double* b_row = b.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += aik * b_row[j];
    }
    double* c_row = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] = alpha * acc[j] + beta * c_row[j];
  }
}

void reference_gemm(const Matrix& a, const Matrix& b, Matrix& c, double alpha, double beta) {
  if (a.n_dim() != b.n_dim() || a.n_dim() != c.n_dim()) {
    fail(ErrorKind::dimension, "gemm operand dimensions differ: " + std::to_string(a.n_dim()) +
                                   ", " + std::to_string(b.n_dim()) + ", " +
                                   std::to_string(c.n_dim()));
  }
  reference_gemm(a.values(), b.values(), c.values(), a.n_dim(), alpha, beta);
}

std::uint64_t flop_count(std::uint64_t n, std::uint64_t reps) {
  if (n == 0 || reps == 0) fail(ErrorKind::config, "flop_count needs positive n and reps");
  constexpr auto max = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 2 * reps;
  if (reps > max / 2) fail(ErrorKind::overflow, "flop count overflows 64 bits");
  for (int i = 0; i < 3; ++i) {
    if (total > max / n) fail(ErrorKind::overflow, "flop count overflows 64 bits");
    total *= n;
  }
  return total;
}

Checksum checksum(const Matrix& c) {
  double sum = 0.0;
  for (double v : c.values()) sum += v;
  return {sum, std::bit_cast<std::uint64_t>(sum)};
}

void GemmConfig::validate() const {
  pattern.validate();
  if (reps < 1) fail(ErrorKind::config, "reps must be >= 1");
  if (n_dim != pattern.n_dim) {
    fail(ErrorKind::config, "gemm n=" + std::to_string(n_dim) + " does not match pattern n=" +
                                std::to_string(pattern.n_dim));
  }
  if (!(warmup_seconds >= 0.0) || !std::isfinite(warmup_seconds)) {
    fail(ErrorKind::config, "warmup_seconds must be a nonnegative number");
  }
  if (backend_id.empty()) fail(ErrorKind::config, "backend id is empty");
}

double initial_c(patterns::Family family) {
  return family == patterns::Family::baseline_fixed ? 1.0 : 0.0;
}

BackendRegistry BackendRegistry::with_defaults() {
  BackendRegistry r;
  r.add({"reference",
         {false, true, std::nullopt},
         [](const Matrix& a, const Matrix& b, Matrix& c, double alpha, double beta) {
           reference_gemm(a, b, c, alpha, beta);
         },
         {}});
  return r;
}

void BackendRegistry::add(Backend backend) {
  if (backend.id.empty()) fail(ErrorKind::config, "backend id is empty");
  if (!backend.fn && backend.command.empty()) {
    fail(ErrorKind::config, "backend '" + backend.id + "' has neither a function nor a command");
  }
  const auto id = backend.id;
  backends_.insert_or_assign(id, std::move(backend));
}

void BackendRegistry::add_external(std::string id, std::string command, BackendCapabilities caps) {
  caps.in_process = false;
  add({std::move(id), std::move(caps), {}, std::move(command)});
}

bool BackendRegistry::contains(const std::string& id) const { return backends_.contains(id); }

const Backend& BackendRegistry::get(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) fail(ErrorKind::config, "backend '" + id + "' is not registered");
  return it->second;
}

std::vector<std::string> BackendRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : backends_) out.push_back(id);
  return out;
}

namespace {

using Seconds = std::chrono::duration<double>;
using Millis = std::chrono::duration<double, std::milli>;

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  const auto contents = text::read_file(path);
  for (auto line : text::lines(contents)) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::backend, path.string() + ": expected key=value, got '" + std::string(line) + "'");
    }
    out[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out += "'\\''";
    else out += ch;
  }
  return out + "'";
}

struct Phases {
  PhaseTiming warmup;
  PhaseTiming measured;
  double measured_start_ms = 0.0;
  double measured_end_ms = 0.0;
};

Phases run_in_process(const Backend& backend, const GemmConfig& config,
                      const patterns::MatrixPair& pair, Matrix& c,
                      telemetry::Clock::time_point epoch) {
  using Clock = telemetry::Clock;
  auto call = [&](Matrix& target) {
    try {
      backend.fn(pair.a, pair.b, target, config.alpha, config.beta);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::backend, "backend '" + backend.id + "' failed: " + e.what());
    }
  };

  Phases p;
  // Warm-up works on a scratch C so the measured result does not depend on
  // how many warm-up iterations fit in the time budget.
  const auto warm_start = Clock::now();
  if (config.warmup_seconds > 0.0) {
    Matrix scratch = c;
    while (Seconds(Clock::now() - warm_start).count() < config.warmup_seconds) {
      call(scratch);
      ++p.warmup.iterations;
    }
  }
  const auto start = Clock::now();
  p.warmup.wall_seconds = Seconds(start - warm_start).count();
  for (std::uint64_t r = 0; r < config.reps; ++r) call(c);
  const auto end = Clock::now();
  p.measured.iterations = config.reps;
  p.measured.wall_seconds = Seconds(end - start).count();
  p.measured_start_ms = Millis(start - epoch).count();
  p.measured_end_ms = Millis(end - epoch).count();
  return p;
}

Phases run_external(const Backend& backend, const GemmConfig& config,
                    const patterns::MatrixPair& pair, Matrix& c,
                    const std::filesystem::path& work_dir, telemetry::Clock::time_point epoch) {
  using Clock = telemetry::Clock;
  std::error_code ec;
  std::filesystem::create_directories(work_dir, ec);
  const auto a_path = work_dir / "a.bin";
  const auto b_path = work_dir / "b.bin";
  const auto c_path = work_dir / "c.bin";
  const auto request = work_dir / kRequestFile;
  const auto result = work_dir / kResultFile;
  std::filesystem::remove(result, ec);
  std::filesystem::remove(c_path, ec);
  patterns::write_raw(a_path, pair.a);
  patterns::write_raw(b_path, pair.b);

  std::string req;
  req += "n=" + std::to_string(config.n_dim) + "\n";
  req += "reps=" + std::to_string(config.reps) + "\n";
  req += "alpha=" + text::format_double(config.alpha) + "\n";
  req += "beta=" + text::format_double(config.beta) + "\n";
  req += "c_init=" + text::format_double(initial_c(config.pattern.family)) + "\n";
  req += "warmup_seconds=" + text::format_double(config.warmup_seconds) + "\n";
  req += "a_path=" + a_path.string() + "\n";
  req += "b_path=" + b_path.string() + "\n";
  req += "c_path=" + c_path.string() + "\n";
  req += "result_path=" + result.string() + "\n";
  text::write_file(request, req);

  const auto launch = Clock::now();
  const int status = process::run_shell(backend.command + " " + shell_quote(request.string()));
  const auto done = Clock::now();
  if (status != 0) {
    fail(ErrorKind::backend, "backend '" + backend.id + "' exited with status " +
                                 std::to_string(status));
  }
  if (!std::filesystem::exists(result)) {
    fail(ErrorKind::backend, "backend '" + backend.id + "' wrote no result manifest");
  }
  const auto kv = read_key_values(result);
  auto it = kv.find("wall_seconds");
  if (it == kv.end()) {
    fail(ErrorKind::backend, "backend result manifest lacks wall_seconds");
  }
  Phases p;
  p.measured.wall_seconds = text::parse_double(it->second, "wall_seconds");
  if (!(p.measured.wall_seconds > 0.0)) {
    fail(ErrorKind::backend, "backend reported nonpositive wall_seconds");
  }
  p.measured.iterations = config.reps;
  if (auto w = kv.find("warmup_seconds"); w != kv.end()) {
    p.warmup.wall_seconds = text::parse_double(w->second, "warmup_seconds");
  }
  if (auto w = kv.find("warmup_iterations"); w != kv.end()) {
    p.warmup.iterations = text::parse_u64(w->second, "warmup_iterations");
  }
  p.measured_end_ms = Millis(done - epoch).count();
  p.measured_start_ms = std::max(Millis(launch - epoch).count(),
                                 p.measured_end_ms - p.measured.wall_seconds * 1000.0);
  if (std::filesystem::exists(c_path)) c = patterns::read_raw(c_path, config.n_dim);
  return p;
}

}  // namespace

Experiment run_experiment(const GemmConfig& config, const BackendRegistry& registry,
                          RunContext context) {
  config.validate();
  const Backend& backend = registry.get(config.backend_id);

  const auto pair = patterns::generate(config.pattern);
  Matrix c(config.n_dim, initial_c(config.pattern.family));

  std::vector<std::unique_ptr<telemetry::Sampler>> samplers;
  for (auto& source : context.sources) {
    samplers.push_back(std::make_unique<telemetry::Sampler>(
        std::move(source), context.interval_ms, context.epoch, context.epoch_unix_ms));
  }

  Phases phases;
  try {
    phases = backend.fn ? run_in_process(backend, config, pair, c, context.epoch)
                        : run_external(backend, config, pair, c, context.work_dir, context.epoch);
  } catch (...) {
    for (auto& s : samplers) {
      try {
        s->stop();
      } catch (...) {
      }
    }
    throw;
  }

  Experiment out;
  RunRecord& rec = out.record;
  for (auto& s : samplers) {
    try {
      auto timeline = s->stop();
      std::string id = timeline.source();
      for (int suffix = 2; std::find(rec.timeline_ids.begin(), rec.timeline_ids.end(), id) !=
                           rec.timeline_ids.end();
           ++suffix) {
        id = timeline.source() + "-" + std::to_string(suffix);
      }
      rec.timeline_ids.push_back(id);
      out.timelines.push_back(std::move(timeline));
    } catch (const std::exception& e) {
      rec.telemetry_warning = true;
      rec.warnings.push_back("telemetry source '" + s->label() + "' dropped: " + e.what());
    }
  }

  rec.config = config;
  rec.warmup = phases.warmup;
  rec.measured = phases.measured;
  rec.total_flops = flop_count(config.n_dim, config.reps);
  const double seconds = std::max(phases.measured.wall_seconds, 1e-9);
  rec.measured.wall_seconds = seconds;
  rec.flop_rate = static_cast<double>(rec.total_flops) / seconds;
  rec.c_checksum = checksum(c);
  rec.node_id = context.node_id;
  rec.run_index = context.run_index;
  rec.measured_start_ms = phases.measured_start_ms;
  rec.measured_end_ms = phases.measured_end_ms;
  rec.epoch_unix_ms = context.epoch_unix_ms;
  return out;
}

}  // namespace epower::gemm
