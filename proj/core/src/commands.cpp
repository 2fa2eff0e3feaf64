#include "epower/commands.hpp"

#include <algorithm>
#include <map>
#include <new>
#include <tuple>

#include "epower/fixtures.hpp"
#include "epower/text.hpp"

namespace epower::commands {

namespace fs = std::filesystem;
using manifest::ExperimentManifest;
using patterns::PatternSpec;

namespace {

bool has_source(const ExperimentManifest& m, std::string_view kind) {
  const auto& s = m.telemetry.sources;
  return std::find(s.begin(), s.end(), kind) != s.end();
}

void check_backend(const ExperimentManifest& m, const gemm::BackendRegistry& registry) {
  if (!registry.contains(m.backend)) {
    std::string known;
    for (const auto& id : registry.ids()) known += (known.empty() ? "" : ", ") + id;
    fail(ErrorKind::config, "backend '" + m.backend + "' is not registered (known: " + known + ")");
  }
  if (has_source(m, "gpu") && !registry.get(m.backend).caps.supports_gpu) {
    fail(ErrorKind::config, "gpu telemetry requested but backend '" + m.backend + "' does not run on a GPU");
  }
  if (m.telemetry.sources.empty()) {
    fail(ErrorKind::config, "at least one telemetry source is required in [telemetry] sources");
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::resource, "cannot create " + dir.string() + ": " + ec.message());
}

telemetry::Timeline load_replay(const fs::path& path, double interval_ms) {
  const auto body = text::read_file(path);
  if (body.starts_with("#timeline")) return telemetry::parse_timeline(body);
  return telemetry::parse_power_csv(body, interval_ms).timeline;
}

std::vector<std::unique_ptr<telemetry::PowerSource>> build_sources(const ExperimentManifest& m) {
  const auto& t = m.telemetry;
  std::vector<std::unique_ptr<telemetry::PowerSource>> out;
  for (const auto& kind : t.sources) {
    if (kind == "replay") {
      out.push_back(std::make_unique<telemetry::ReplaySource>(
          load_replay(m.resolve(t.replay_path), t.interval_ms), telemetry::ReplaySource::Timing::paced));
    } else if (kind == "gpu") {
      const auto cmd = t.gpu_command.empty() ? telemetry::gpu_command_for(t.interval_ms)
                                             : telemetry::gpu_command_for(t.interval_ms, t.gpu_command);
      out.push_back(std::make_unique<telemetry::GpuToolSource>(cmd, "gpu"));
    } else if (kind == "pm_counters") {
      out.push_back(std::make_unique<telemetry::PmCountersSource>(m.resolve(t.pm_counters_path), "pm_counters"));
    } else if (kind == "pm_counters_memory") {
      out.push_back(std::make_unique<telemetry::PmCountersSource>(m.resolve(t.pm_counters_memory_path),
                                                                  "pm_counters_memory"));
    } else if (kind == "rapl") {
      out.push_back(std::make_unique<telemetry::EnergyCounterSource>(m.resolve(t.rapl_path),
                                                                     t.rapl_joules_per_unit, "rapl"));
    }
  }
  return out;
}

/// Runs and persists one experiment. On failure the partial directory gets
/// a `failed` marker naming the phase, and the error is rethrown with it.
records::LoadedRun run_one(const ExperimentManifest& base, const PatternSpec& spec,
                           const gemm::BackendRegistry& registry, const fs::path& parent,
                           std::uint32_t run_index) {
  ExperimentManifest m = base;
  m.pattern = spec;
  const fs::path dir = parent / records::run_dir_name(spec, m.run.node, run_index);
  std::string phase = "setup";
  try {
    make_dir(dir);
    std::error_code ec;
    fs::remove(dir / records::kFailedMarker, ec);
    const auto manifest_text = manifest::format_manifest(m);
    text::write_file(dir / records::kManifestFile, manifest_text);

    phase = "telemetry";
    gemm::RunContext ctx;
    ctx.epoch = telemetry::Clock::now();
    ctx.epoch_unix_ms = telemetry::unix_now_ms();
    ctx.sources = build_sources(m);
    ctx.interval_ms = m.telemetry.interval_ms;
    ctx.work_dir = dir / "backend";
    ctx.node_id = m.run.node;
    ctx.run_index = run_index;

    phase = "experiment";
    auto ex = gemm::run_experiment(m.gemm_config(), registry, std::move(ctx));
    ex.record.tdp_w = m.run.tdp_w;
    ex.record.manifest_digest = manifest::digest(m);

    phase = "persist";
    records::write_run_dir(dir, ex);

    phase = "analysis";
    std::vector<records::LoadedRun> one{{dir, std::move(ex.record), std::move(ex.timelines)}};
    write_report(dir, build_report(one));
    return std::move(one.front());
  } catch (const std::exception& e) {
    ErrorKind kind = ErrorKind::backend;
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
      kind = err->kind();
    } else if (dynamic_cast<const std::bad_alloc*>(&e)) {
      kind = ErrorKind::resource;
    }
    const std::string message = e.what();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!ec) {
      try {
        text::write_file(dir / records::kFailedMarker, "phase=" + phase + "\nkind=" +
                                                           std::string(to_string(kind)) +
                                                           "\nmessage=" + message + "\n");
      } catch (const Error&) {
      }
    }
    fail(kind, dir.filename().string() + ": phase " + phase + ": " + message);
  }
}

using GroupKey = std::tuple<int, std::size_t, int, unsigned>;

GroupKey key_of(const PatternSpec& s) {
  return {static_cast<int>(s.family), s.n_dim, static_cast<int>(s.value_mode), s.level};
}

std::string fixed2(double v) { return text::format_fixed(v, 2); }
std::string fixed3(double v) { return text::format_fixed(v, 3); }

}  // namespace

ExperimentManifest apply_overrides(ExperimentManifest m, const Overrides& o) {
  if (o.out) m.run.output_dir = fs::absolute(*o.out).lexically_normal().string();
  if (o.seed) m.pattern.seed = *o.seed;
  if (o.interval_ms) m.telemetry.interval_ms = *o.interval_ms;
  if (o.max_n) m.model.max_n = *o.max_n;
  m.validate();
  return m;
}

fs::path output_dir(const ExperimentManifest& m) { return m.resolve(m.run.output_dir); }

gemm::BackendRegistry registry_for(const ExperimentManifest& m) {
  auto registry = gemm::BackendRegistry::with_defaults();
  if (!m.backend_command.empty()) {
    if (registry.contains(m.backend)) {
      fail(ErrorKind::config, "backend_command cannot redefine built-in backend '" + m.backend + "'");
    }
    registry.add_external(m.backend, m.backend_command, {m.backend_gpu, false, std::nullopt});
  }
  return registry;
}

Report build_report(std::span<const records::LoadedRun> runs) {
  if (runs.empty()) fail(ErrorKind::no_input, "no runs to report");

  struct Acc {
    PatternSpec spec;
    std::vector<analysis::RunPower> power;
    std::vector<double> rates;
    double tdp_w = 0.0;
  };
  std::map<GroupKey, Acc> acc;
  std::size_t warned = 0;
  for (const auto& run : runs) {
    const auto& rec = run.record;
    if (run.timelines.empty()) {
      fail(ErrorKind::insufficient_data, run.dir.string() + ": run has no telemetry timeline");
    }
    analysis::PowerStats stats;
    try {
      stats = analysis::steady_state_window(run.timelines.front(), rec);
    } catch (const Error& e) {
      fail(e.kind(), run.dir.string() + ": " + e.what());
    }
    PatternSpec spec = rec.config.pattern;
    spec.seed = 0;
    if (patterns::is_baseline(spec.family)) {
      spec.level = 0;
      spec.value_mode = patterns::ValueMode::independent;
    }
    auto& a = acc[key_of(spec)];
    if (a.power.empty()) {
      a.spec = spec;
      a.tdp_w = rec.tdp_w;
    } else if (a.tdp_w != rec.tdp_w) {
      fail(ErrorKind::config, run.dir.string() + ": tdp_w differs from other runs of the same pattern");
    }
    a.power.push_back({rec.node_id, rec.run_index, stats});
    a.rates.push_back(rec.flop_rate);
    if (rec.telemetry_warning) ++warned;
  }

  Report report;
  for (auto& [key, a] : acc) {
    Group g;
    g.spec = a.spec;
    g.aggregate = analysis::aggregate_runs(a.power);
    g.runs = a.power.size();
    g.flop_rate = analysis::mean_power(a.rates);
    g.tdp_w = a.tdp_w;
    report.groups.push_back(std::move(g));
  }

  auto baseline = [&report](patterns::Family f, std::size_t n) -> const Group* {
    for (const auto& g : report.groups) {
      if (g.spec.family == f && g.spec.n_dim == n) return &g;
    }
    return nullptr;
  };

  for (const auto& g : report.groups) {
    analysis::SummaryRow row;
    row.spec = g.spec;
    row.mean_w = g.aggregate.grand_mean;
    row.tdp_frac = analysis::tdp_fraction(row.mean_w, g.tdp_w);
    row.flop_rate = g.flop_rate;
    if (const auto* fixed = baseline(patterns::Family::baseline_fixed, g.spec.n_dim)) {
      row.pj_per_flop_vs_fixed =
          analysis::pj_per_flop(row.mean_w - fixed->aggregate.grand_mean, row.flop_rate);
    }
    report.rows.push_back(row);
  }

  std::map<std::tuple<int, int, std::size_t>, std::vector<analysis::SweepInput>> sweeps;
  for (const auto& g : report.groups) {
    if (patterns::is_baseline(g.spec.family)) continue;
    sweeps[{static_cast<int>(g.spec.family), static_cast<int>(g.spec.value_mode), g.spec.n_dim}].push_back(
        {g.spec, g.aggregate.grand_mean, g.tdp_w});
  }
  for (const auto& [key, inputs] : sweeps) {
    const std::size_t n = std::get<2>(key);
    std::optional<double> random_w, fixed_w;
    if (const auto* r = baseline(patterns::Family::baseline_random, n)) random_w = r->aggregate.grand_mean;
    if (const auto* f = baseline(patterns::Family::baseline_fixed, n)) fixed_w = f->aggregate.grand_mean;
    report.series.push_back(analysis::sweep_series(inputs, random_w, fixed_w));
  }

  auto& L = report.lines;
  L.push_back("runs=" + std::to_string(runs.size()));
  L.push_back("groups=" + std::to_string(report.groups.size()));
  L.push_back("telemetry_warnings=" + std::to_string(warned));
  for (const auto& g : report.groups) {
    L.push_back("group family=" + std::string(patterns::to_string(g.spec.family)) +
                " level=" + std::to_string(g.spec.level) +
                " value_mode=" + std::string(patterns::to_string(g.spec.value_mode)) +
                " n=" + std::to_string(g.spec.n_dim) + " runs=" + std::to_string(g.runs) +
                " nodes=" + std::to_string(g.aggregate.node_means.size()) +
                " mean_w=" + text::format_double(g.aggregate.grand_mean) +
                " spread=" + text::format_fixed(100.0 * g.aggregate.spread, 2) + "%" +
                (g.aggregate.spread_warning ? " spread_warning" : ""));
  }
  for (const auto& g : report.groups) {
    if (g.spec.family != patterns::Family::baseline_random) continue;
    const auto* fixed = baseline(patterns::Family::baseline_fixed, g.spec.n_dim);
    if (!fixed) continue;
    const double hi = g.aggregate.grand_mean;
    const double lo = fixed->aggregate.grand_mean;
    L.push_back("headline n=" + std::to_string(g.spec.n_dim));
    L.push_back("baseline_random_w=" + text::format_double(hi));
    L.push_back("baseline_fixed_w=" + text::format_double(lo));
    L.push_back("delta_w=" + fixed2(hi - lo));
    L.push_back("percent_increase=" + fixed2(analysis::percent_increase(hi, lo)));
    L.push_back("pj_per_flop_upper_bound=" + fixed2(analysis::pj_per_flop(hi - lo, fixed->flop_rate)));
    L.push_back("tdp_fraction_random=" + fixed3(analysis::tdp_fraction(hi, g.tdp_w)));
    L.push_back("tdp_fraction_fixed=" + fixed3(analysis::tdp_fraction(lo, fixed->tdp_w)));
  }
  return report;
}

void write_report(const fs::path& dir, const Report& report) {
  make_dir(dir);
  text::write_file(dir / records::kSummaryFile, analysis::format_summary(report.rows));
  for (const auto& s : report.series) {
    text::write_file(dir / analysis::series_file_name(s), analysis::format_series(s));
  }
  std::string body;
  for (const auto& line : report.lines) body += line + '\n';
  text::write_file(dir / kReportFile, body);
}

std::vector<PatternSpec> plan_sweep(const ExperimentManifest& m) {
  const auto sweep = m.sweep.value_or(manifest::SweepSection{});
  const auto& p = m.pattern;
  if (patterns::is_baseline(p.family)) {
    fail(ErrorKind::config, "sweep needs a pattern family, not " + std::string(patterns::to_string(p.family)));
  }
  const unsigned hi = sweep.level_max.value_or(patterns::log2_exact(p.n_dim));
  std::vector<PatternSpec> out;
  if (sweep.baselines) {
    out.push_back({patterns::Family::baseline_random, p.n_dim, 0, patterns::ValueMode::independent, p.seed});
    out.push_back({patterns::Family::baseline_fixed, p.n_dim, 0, patterns::ValueMode::independent, p.seed});
  }
  for (auto mode : sweep.value_modes) {
    for (unsigned level = sweep.level_min; level <= hi; ++level) {
      PatternSpec s{p.family, p.n_dim, level, mode, p.seed};
      s.validate();
      out.push_back(s);
    }
  }
  return out;
}

std::string describe_plan(const ExperimentManifest& m, const gemm::BackendRegistry& registry) {
  m.validate();
  check_backend(m, registry);
  const auto specs = m.sweep ? plan_sweep(m) : std::vector<PatternSpec>{m.pattern};
  const auto flops = gemm::flop_count(m.pattern.n_dim, m.reps);
  std::string sources;
  for (const auto& s : m.telemetry.sources) sources += (sources.empty() ? "" : ",") + s;
  std::string out;
  out += "backend=" + m.backend + "\n";
  out += "n=" + std::to_string(m.pattern.n_dim) + "\n";
  out += "reps=" + std::to_string(m.reps) + "\n";
  out += "warmup_seconds=" + text::format_double(m.warmup_seconds) + "\n";
  out += "flops_per_run=" + std::to_string(flops) + "\n";
  out += "patterns=" + std::to_string(specs.size()) + "\n";
  out += "repetitions=" + std::to_string(m.run.repetitions) + "\n";
  out += "runs=" + std::to_string(specs.size() * m.run.repetitions) + "\n";
  out += "sources=" + sources + "\n";
  out += "interval_ms=" + text::format_double(m.telemetry.interval_ms) + "\n";
  out += "tdp_w=" + text::format_double(m.run.tdp_w) + "\n";
  out += "output_dir=" + output_dir(m).string() + "\n";
  out += "manifest_digest=" + manifest::digest(m) + "\n";
  return out;
}

RunOutput cmd_run(const ExperimentManifest& m, const gemm::BackendRegistry& registry) {
  m.validate();
  check_backend(m, registry);
  const auto out = output_dir(m);
  make_dir(out);
  text::write_file(out / records::kManifestFile, manifest::format_manifest(m));

  RunOutput result;
  std::vector<records::LoadedRun> loaded;
  for (std::uint32_t rep = 0; rep < m.run.repetitions; ++rep) {
    loaded.push_back(run_one(m, m.pattern, registry, out, rep));
    result.run_dirs.push_back(loaded.back().dir);
  }
  result.report = build_report(loaded);
  write_report(out, result.report);
  return result;
}

SweepOutput cmd_sweep(const ExperimentManifest& m, const gemm::BackendRegistry& registry) {
  m.validate();
  check_backend(m, registry);
  const auto specs = plan_sweep(m);
  const auto out = output_dir(m);
  make_dir(out);
  text::write_file(out / records::kManifestFile, manifest::format_manifest(m));

  SweepOutput result;
  std::vector<records::LoadedRun> loaded;
  for (const auto& spec : specs) {
    for (std::uint32_t rep = 0; rep < m.run.repetitions; ++rep) {
      try {
        loaded.push_back(run_one(m, spec, registry, out, rep));
        result.run_dirs.push_back(loaded.back().dir);
      } catch (const Error& e) {
        result.failed.push_back({spec, e.kind(), e.what()});
      }
    }
  }
  if (!result.failed.empty()) {
    std::string body = "family,level,value_mode,kind,message\n";
    for (const auto& f : result.failed) {
      std::string msg = f.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      body += std::string(patterns::to_string(f.spec.family)) + ',' + std::to_string(f.spec.level) + ',' +
              std::string(patterns::to_string(f.spec.value_mode)) + ',' +
              std::string(to_string(f.kind)) + ',' + msg + '\n';
    }
    text::write_file(out / kFailedLevelsFile, body);
  }
  if (!loaded.empty()) {
    result.report = build_report(loaded);
    write_report(out, *result.report);
  }
  return result;
}

Report cmd_replay(std::span<const fs::path> inputs, const fs::path& out_dir) {
  if (inputs.empty()) fail(ErrorKind::no_input, "no input directories given");
  const auto dirs = records::find_run_dirs(inputs);
  if (dirs.empty()) fail(ErrorKind::no_input, "no run records found under the given inputs");
  std::vector<records::LoadedRun> runs;
  runs.reserve(dirs.size());
  for (const auto& d : dirs) runs.push_back(records::read_run_dir(d));
  auto report = build_report(runs);
  write_report(out_dir, report);
  return report;
}

std::vector<PatternSpec> score_specs(const ExperimentManifest& m) {
  if (!m.model.specs.empty()) {
    std::vector<PatternSpec> out;
    for (const auto& e : m.model.specs) out.push_back(manifest::parse_spec_entry(e, m.pattern.n_dim, m.pattern.seed));
    return out;
  }
  if (m.sweep) return plan_sweep(m);
  return {m.pattern};
}

ScoreOutput cmd_score(const ExperimentManifest& m, const fs::path& out_dir) {
  m.validate();
  if (m.pattern.n_dim > m.model.max_n) {
    fail(ErrorKind::config, "N=" + std::to_string(m.pattern.n_dim) + " exceeds the simulation budget max_n=" +
                                std::to_string(m.model.max_n) + " (raise [model] max_n or pass --max-n)");
  }
  const auto schedule = m.model.schedule();
  schedule.validate(m.pattern.n_dim);

  ScoreOutput out;
  out.specs = score_specs(m);
  out.ranking = model::predict_ordering(out.specs, schedule, m.model.weights());
  out.reports.resize(out.specs.size());
  for (const auto& r : out.ranking) out.reports[r.input_index] = r.report;

  make_dir(out_dir);
  text::write_file(out_dir / records::kManifestFile, manifest::format_manifest(m));
  text::write_file(out_dir / kScoreFile, format_scores(out));
  text::write_file(out_dir / kRankingFile, format_ranking(out));
  return out;
}

std::string format_scores(const ScoreOutput& s) {
  std::string out(kScoreHeader);
  out += '\n';
  for (std::size_t i = 0; i < s.specs.size(); ++i) {
    const auto& spec = s.specs[i];
    const auto& r = s.reports[i];
    out += std::string(patterns::to_string(spec.family)) + ',' + std::to_string(spec.level) + ',' +
           std::string(patterns::to_string(spec.value_mode)) + ',' + text::format_double(r.score_per_flop) +
           ',' + std::to_string(r.mul_input_toggles) + ',' + std::to_string(r.acc_toggles) + ',' +
           std::to_string(r.flops) + '\n';
  }
  return out;
}

std::string format_ranking(const ScoreOutput& s) {
  std::string out = "rank,family,level,value_mode,score_per_flop\n";
  for (std::size_t i = 0; i < s.ranking.size(); ++i) {
    const auto& r = s.ranking[i];
    out += std::to_string(i + 1) + ',' + std::string(patterns::to_string(r.spec.family)) + ',' +
           std::to_string(r.spec.level) + ',' + std::string(patterns::to_string(r.spec.value_mode)) + ',' +
           text::format_double(r.report.score_per_flop) + '\n';
  }
  return out;
}

std::size_t cmd_fixtures(const fs::path& out_dir) {
  make_dir(out_dir);
  return fixtures::write_fixture_set(out_dir);
}

}  // namespace epower::commands
