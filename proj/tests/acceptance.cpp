// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "epower/analysis.hpp"
#include "epower/commands.hpp"
#include "epower/error.hpp"
#include "epower/fixtures.hpp"
#include "epower/gemm.hpp"
#include "epower/manifest.hpp"
#include "epower/model.hpp"
#include "epower/patterns.hpp"
#include "epower/records.hpp"
#include "epower/telemetry.hpp"
#include "epower/text.hpp"

namespace fs = std::filesystem;
using namespace epower;
using patterns::Family;
using patterns::PatternSpec;
using patterns::ValueMode;

namespace {

/// Collects failed checks for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failed_ == 0; }
  std::string detail() const {
    std::string out = std::to_string(count_ - failed_) + "/" + std::to_string(count_) + " checks";
    for (const auto& f : failures_) out += "; " + f;
    if (failed_ > failures_.size()) out += "; ...";
    for (const auto& n : notes_) out += "; " + n;
    return out;
  }

 private:
  std::size_t count_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v, int decimals = 4) { return text::format_fixed(v, decimals); }

class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : path_(fs::temp_directory_path() / ("epower-acceptance-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// 1. Golden masks and random fractions

void golden_masks(Check& c) {
  const auto body = text::read_file(fs::path(EPOWER_GOLDEN_DIR) / "masks_n8.txt");
  const auto rows = text::lines(body);
  std::size_t blocks = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].empty() || rows[i].front() == '#') continue;
    const auto head = text::split(rows[i], ' ');
    const auto family = patterns::parse_family(head.at(0));
    const bool is_a = head.at(1) == "A";
    const auto level = static_cast<unsigned>(text::parse_u64(head.at(2), "level"));
    const auto [a, b] = patterns::masks({family, 8, level, ValueMode::independent, 0});
    const auto got = (is_a ? a : b).rows();
    for (std::size_t r = 0; r < 8; ++r) {
      c.expect(got.at(r) == rows.at(i + 1 + r),
               std::string(head.at(0)) + " " + std::string(head.at(1)) + " level " +
                   std::to_string(level) + " row " + std::to_string(r));
    }
    i += 8;
    ++blocks;
  }
  c.expect(blocks == 32, "expected 32 golden masks, found " + std::to_string(blocks));

  for (std::size_t n : {8u, 16u, 64u, 256u}) {
    for (auto f : {Family::block_rowcol, Family::block_diagonal, Family::sparse_rowcol, Family::sparse_diagonal}) {
      const bool block = patterns::is_block(f);
      for (unsigned level = block ? 1 : 0; level <= patterns::log2_exact(n); ++level) {
        const auto [a, b] = patterns::masks({f, n, level, ValueMode::independent, 0});
        const double want = block ? 0.5 : std::ldexp(1.0, static_cast<int>(level)) / static_cast<double>(n);
        c.expect(patterns::random_fraction(a) == want && patterns::random_fraction(b) == want,
                 std::string(patterns::to_string(f)) + " n=" + std::to_string(n) + " level=" +
                     std::to_string(level) + " fraction");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 2. Published headline numbers

void headline_numbers(Check& c) {
  auto within = [&](double got, double want, double tol, const std::string& what) {
    c.expect(std::fabs(got - want) <= tol, what + "=" + fmt(got) + " want " + fmt(want) + "+-" + fmt(tol, 3));
  };
  within(analysis::percent_increase(398.2, 238.5), 66.96, 0.05, "percent_increase(398.2,238.5)");
  within(analysis::pj_per_flop(159.0, 19.4e12), 8.20, 0.05, "pj_per_flop(159,19.4e12)");
  within(analysis::pj_per_flop(30.7, 2.0e12), 15.35, 0.05, "pj_per_flop(30.7,2.0e12)");
  within(analysis::pj_per_flop(30.0, 2.0e12), 15.00, 0.05, "pj_per_flop(30.0,2.0e12)");
  within(analysis::tdp_fraction(188.4, 280.0), 0.673, 0.005, "tdp_fraction(188.4,280)");
}

// ---------------------------------------------------------------------------
// 3. Figure fixture replay

void fixture_replay(Check& c) {
  Scratch dir("fixtures");
  commands::cmd_fixtures(dir.path() / "fx");
  const std::vector<fs::path> roots{dir.path() / "fx"};
  commands::cmd_replay(roots, dir.path() / "rp");

  std::size_t points = 0;
  double worst = 0.0;
  for (const auto& curve : fixtures::gpu_sweep_curves()) {
    const analysis::SweepSeries probe{curve.family, curve.value_mode, fixtures::kGpuN, {}, {}};
    const auto file = dir.path() / "rp" / analysis::series_file_name(probe);
    if (!fs::exists(file)) {
      c.expect(false, "missing " + file.filename().string());
      continue;
    }
    const auto series = analysis::parse_series(text::read_file(file));
    const std::string name = file.filename().string();
    c.expect(series.points.size() == fixtures::kSweepLevels, name + " has " + std::to_string(series.points.size()) + " points");
    for (const auto& p : series.points) {
      const double want = curve.watts.at(p.level);
      const double err = std::fabs(p.mean_w - want);
      worst = std::max(worst, err);
      c.expect(err <= 0.01, name + " level " + std::to_string(p.level) + " off by " + fmt(err));
      ++points;
    }
    c.expect(series.reference.tdp_w == 400.0, name + " tdp line");
    c.expect(series.reference.baseline_random_w == 398.2, name + " random line");
    c.expect(series.reference.baseline_fixed_w == 238.5, name + " fixed line");
  }
  c.expect(points == 120, "expected 120 plotted points, replayed " + std::to_string(points));
  c.note(std::to_string(points) + " points, max error " + fmt(worst) + " W");
}

// ---------------------------------------------------------------------------
// 4. GEMM oracle

void naive_gemm(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c,
                std::size_t n, double alpha, double beta) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += a[i * n + k] * b[k * n + j];
      c[i * n + j] = alpha * sum + beta * c[i * n + j];
    }
  }
}

void gemm_oracle(Check& c) {
  std::mt19937_64 rng(0x5eed);
  std::uniform_int_distribution<std::size_t> dim(2, 64);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::size_t mismatched = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = dim(rng);
    const double alpha = value(rng) * 4.0;
    const double beta = value(rng) * 4.0;
    std::vector<double> a(n * n), b(n * n), c0(n * n);
    for (auto* m : {&a, &b, &c0}) {
      for (auto& x : *m) x = value(rng);
    }
    auto want = c0;
    auto got = c0;
    naive_gemm(a, b, want, n, alpha, beta);
    gemm::reference_gemm(a, b, got, n, alpha, beta);
    bool same = true;
    for (std::size_t i = 0; i < n * n; ++i) same &= model::bits64(want[i]) == model::bits64(got[i]);
    if (!same) ++mismatched;
    c.expect(same, "instance " + std::to_string(t) + " n=" + std::to_string(n) + " differs");
  }
  c.note("200 instances, " + std::to_string(mismatched) + " mismatched");
  for (std::size_t n : {4u, 64u, 256u}) {
    const auto p = patterns::generate({Family::baseline_fixed, n, 0, ValueMode::independent, 0});
    patterns::Matrix out(n, gemm::initial_c(Family::baseline_fixed));
    gemm::reference_gemm(p.a, p.b, out, 1.0, 1.0);
    const double want = static_cast<double>(n + 1);
    c.expect(std::all_of(out.values().begin(), out.values().end(), [&](double v) { return v == want; }),
             "baseline_fixed closed form at n=" + std::to_string(n));
  }
}

// ---------------------------------------------------------------------------
// 5. Toggle-model ordering

struct OracleCounts {
  std::uint64_t cycles = 0;
  std::uint64_t mul = 0;
  std::uint64_t acc = 0;
  double per_flop() const { return static_cast<double>(mul + acc) / static_cast<double>(2 * cycles); }
};

int bit_flips(double x, double y) {
  std::uint64_t p, q;
  std::memcpy(&p, &x, sizeof p);
  std::memcpy(&q, &y, sizeof q);
  int flips = 0;
  for (int bit = 0; bit < 64; ++bit) flips += static_cast<int>(((p >> bit) ^ (q >> bit)) & 1U);
  return flips;
}

/// Enumerates the FMA port stream directly: output cells are dealt
/// round-robin to lanes, each lane walks its cells with k innermost, and the
/// port takes one FMA from each unfinished lane in turn.
OracleCounts enumerate_toggles(const patterns::MatrixPair& pair, std::size_t lanes) {
  const std::size_t n = pair.a.n_dim();
  std::vector<std::vector<std::size_t>> cells(lanes);
  for (std::size_t cell = 0; cell < n * n; ++cell) cells[cell % lanes].push_back(cell);
  struct LaneState {
    std::size_t cell_pos = 0;
    std::size_t k = 0;
    double acc = 0.0;
  };
  std::vector<LaneState> state(lanes);
  OracleCounts out;
  double pa = 0.0, pb = 0.0, pacc = 0.0;
  std::size_t live = lanes;
  std::vector<bool> done(lanes, false);
  while (live > 0) {
    for (std::size_t l = 0; l < lanes; ++l) {
      if (done[l]) continue;
      auto& s = state[l];
      if (s.cell_pos == cells[l].size()) {
        done[l] = true;
        --live;
        continue;
      }
      const std::size_t i = cells[l][s.cell_pos] / n;
      const std::size_t j = cells[l][s.cell_pos] % n;
      const double a = pair.a(i, s.k);
      const double b = pair.b(s.k, j);
      const double acc_in = s.acc;
      if (out.cycles > 0) {
        out.mul += static_cast<std::uint64_t>(bit_flips(pa, a) + bit_flips(pb, b));
        out.acc += static_cast<std::uint64_t>(bit_flips(pacc, acc_in));
      }
      pa = a;
      pb = b;
      pacc = acc_in;
      ++out.cycles;
      s.acc = std::fma(a, b, s.acc);
      if (++s.k == n) {
        s.k = 0;
        s.acc = 0.0;
        ++s.cell_pos;
      }
    }
  }
  return out;
}

void toggle_ordering(Check& c) {
  constexpr std::size_t n = 64;
  for (std::size_t lanes : {1u, 4u}) {
    const model::Schedule schedule{lanes, 1, 1};
    const std::string tag = "lanes=" + std::to_string(lanes);
    auto scored = [&](const PatternSpec& spec) {
      const auto pair = patterns::generate(spec);
      const auto oracle = enumerate_toggles(pair, lanes);
      const auto r = model::score_pattern(pair, schedule);
      c.expect(r.mul_input_toggles == oracle.mul && r.acc_toggles == oracle.acc && r.cycles == oracle.cycles,
               tag + " model disagrees with enumeration for " + std::string(patterns::to_string(spec.family)));
      return oracle;
    };
    const auto fixed = scored({Family::baseline_fixed, n, 0, ValueMode::independent, 0});
    const auto random = scored({Family::baseline_random, n, 0, ValueMode::independent, 0});
    c.expect(fixed.mul == 0, tag + " baseline_fixed mul toggles " + std::to_string(fixed.mul));
    c.expect(random.per_flop() > fixed.per_flop(), tag + " random not above fixed");

    std::map<std::pair<ValueMode, unsigned>, double> rowcol;
    for (auto family : {Family::block_rowcol, Family::block_diagonal}) {
      for (auto mode : {ValueMode::independent, ValueMode::fixed_common}) {
        for (unsigned level = 1; level <= patterns::log2_exact(n); ++level) {
          const double s = scored({family, n, level, mode, 0}).per_flop();
          if (family == Family::block_rowcol) rowcol[{mode, level}] = s;
          const std::string label = tag + " " + std::string(patterns::to_string(family)) + "/" +
                                    std::string(patterns::to_string(mode)) + "/" + std::to_string(level);
          c.expect(s < random.per_flop(),
                   label + " scores " + fmt(s, 3) + " >= random " + fmt(random.per_flop(), 3));
          c.expect(s > fixed.per_flop(), label + " scores " + fmt(s, 3) + " <= fixed " + fmt(fixed.per_flop(), 3));
        }
      }
    }
    const double l6 = rowcol[{ValueMode::fixed_common, 6}];
    const double l1 = rowcol[{ValueMode::fixed_common, 1}];
    c.expect(l6 > l1, tag + " block_rowcol fixed_common level 6 (" + fmt(l6, 3) + ") not above level 1 (" +
                          fmt(l1, 3) + ")");
  }
}

// ---------------------------------------------------------------------------
// 6 and 7 share a small live run driven by a replayed trace.

void write_trace(const fs::path& path) {
  telemetry::Timeline tl("trace", 1.0);
  for (int i = 0; i < 64; ++i) tl.append({i * 1.0, 238.5 + (i % 4) * 0.5, "trace"});
  telemetry::write_timeline(path, tl);
}

/// Repetitions giving roughly `seconds` of reference GEMM work at size n.
std::uint64_t reps_for(std::size_t n, double seconds) {
  const auto p = patterns::generate({Family::baseline_random, n, 0, ValueMode::independent, 1});
  patterns::Matrix c(n, 0.0);
  const auto t0 = std::chrono::steady_clock::now();
  gemm::reference_gemm(p.a, p.b, c, 1.0, 1.0);
  const double once = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(seconds / std::max(once, 1e-6))), 10, 100000);
}

manifest::ExperimentManifest live_manifest(const fs::path& dir, double interval_ms, double seconds) {
  write_trace(dir / "trace.csv");
  manifest::ExperimentManifest m;
  m.pattern = {Family::block_diagonal, 128, 2, ValueMode::independent, 11};
  m.reps = reps_for(128, seconds);
  m.warmup_seconds = 0.05;
  m.telemetry.interval_ms = interval_ms;
  m.telemetry.sources = {"replay"};
  m.telemetry.replay_path = "trace.csv";
  m.run.output_dir = "out";
  m.base_dir = dir;
  return m;
}

void determinism(Check& c) {
  const PatternSpec spec{Family::sparse_diagonal, 256, 5, ValueMode::independent, 77};
  const auto p1 = patterns::generate(spec);
  const auto p2 = patterns::generate(spec);
  c.expect(p1.a == p2.a && p1.b == p2.b, "generate is not bit-identical");

  telemetry::Timeline tl("gpu", 100.0, 1662026400000);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> w(60.0, 400.0);
  for (int i = 0; i < 5000; ++i) tl.append({i * 100.0 + 0.25, w(rng), "gpu"});
  const auto tl_text = telemetry::format_timeline(tl);
  c.expect(telemetry::format_timeline(telemetry::parse_timeline(tl_text)) == tl_text,
           "timeline CSV round-trip not byte-identical");

  Scratch dir("determinism");
  auto m = live_manifest(dir.path(), 1.0, 0.15);
  m.sweep = manifest::SweepSection{1, 3, {ValueMode::fixed_common}, true};
  m.model.specs = {"baseline_random", "block_rowcol/fixed_common/6"};
  const auto m_text = manifest::format_manifest(m);
  c.expect(manifest::format_manifest(manifest::parse_manifest(m_text)) == m_text,
           "manifest round-trip not byte-identical");
  m.sweep.reset();
  m.model.specs.clear();

  const auto run = commands::cmd_run(m, commands::registry_for(m));
  const std::vector<fs::path> roots{dir.path() / "out"};
  const auto replayed = commands::cmd_replay(roots, dir.path() / "rp");
  c.expect(replayed.lines == run.report.lines, "replay report differs from run report");
  c.expect(text::read_file(dir.path() / "rp" / "summary.csv") == text::read_file(dir.path() / "out" / "summary.csv"),
           "replay summary.csv differs from run summary.csv");
  const auto again = commands::cmd_replay(roots, dir.path() / "rp2");
  c.expect(text::read_file(dir.path() / "rp" / "summary.csv") == text::read_file(dir.path() / "rp2" / "summary.csv"),
           "replay is not deterministic");
}

void protocol(Check& c) {
  c.expect(gemm::GemmConfig{}.reps == 100, "default GEMM reps is not 100");
  const manifest::ExperimentManifest defaults;
  c.expect(defaults.reps == 100, "default manifest reps is not 100");
  c.expect(defaults.telemetry.interval_ms == 100.0, "default sampling interval is not 100 ms");
  c.expect(defaults.run.repetitions == 3, "default repetitions per node is not 3");
  c.expect(defaults.warmup_seconds > 0.0, "warm-up is disabled by default");

  Scratch dir("protocol");
  const double interval = 10.0;
  auto m = live_manifest(dir.path(), interval, 0.3);
  const auto run = commands::cmd_run(m, commands::registry_for(m));
  c.expect(run.run_dirs.size() == 3, "expected 3 run directories, got " + std::to_string(run.run_dirs.size()));

  std::vector<analysis::RunPower> powers;
  for (const auto& d : run.run_dirs) {
    const auto loaded = records::read_run_dir(d);
    const auto& r = loaded.record;
    c.expect(r.warmup.iterations > 0 && r.warmup.wall_seconds >= m.warmup_seconds,
             d.filename().string() + " has no recorded warm-up");
    c.expect(r.measured.iterations == m.reps, d.filename().string() + " measured iteration count");
    c.expect(r.total_flops == gemm::flop_count(m.pattern.n_dim, m.reps), d.filename().string() + " flop count");
    c.expect(!loaded.timelines.empty(), d.filename().string() + " has no timeline");
    if (loaded.timelines.empty()) continue;
    const auto& samples = loaded.timelines.front().samples();
    c.expect(loaded.timelines.front().interval_ms() == interval, "timeline interval not recorded");
    std::vector<double> gaps;
    for (std::size_t i = 1; i < samples.size(); ++i) gaps.push_back(samples[i].t_ms - samples[i - 1].t_ms);
    std::sort(gaps.begin(), gaps.end());
    const double median = gaps.empty() ? 0.0 : gaps[gaps.size() / 2];
    c.expect(median >= interval * 0.9 && median <= interval * 1.5,
             "median sample spacing " + fmt(median, 2) + " ms for a " + fmt(interval, 0) + " ms interval");
    c.expect(samples.front().t_ms < r.measured_start_ms,
             "sampling starts " + fmt(samples.front().t_ms, 1) + " ms, after warm-up ended at " +
                 fmt(r.measured_start_ms, 1) + " ms");
    c.expect(samples.back().t_ms >= r.measured_end_ms - interval,
             "sampling stops " + fmt(samples.back().t_ms, 1) + " ms, before the measured phase ended at " +
                 fmt(r.measured_end_ms, 1) + " ms");
    powers.push_back({r.node_id, r.run_index, analysis::steady_state_window(loaded.timelines.front(), r)});
  }
  if (powers.size() == 3 && run.report.groups.size() == 1) {
    const auto& g = run.report.groups.front();
    std::vector<double> means;
    for (const auto& p : powers) means.push_back(p.stats.mean_w);
    c.expect(g.runs == 3, "group does not aggregate 3 runs");
    c.expect(g.aggregate.grand_mean == analysis::mean_power(means), "group mean is not the mean of 3 runs");
  } else {
    c.expect(false, "expected a single group of 3 runs");
  }

  const std::vector<analysis::RunPower> close{{"nid001", 0, {398.0}}, {"nid002", 0, {401.0}}};
  const std::vector<analysis::RunPower> wide{{"nid001", 0, {398.0}}, {"nid002", 0, {406.0}}};
  c.expect(!analysis::aggregate_runs(close).spread_warning, "0.75% spread flagged");
  c.expect(analysis::aggregate_runs(wide).spread_warning, "2.01% spread not flagged");
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<void(Check&)> body;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "pattern golden masks", 5.0, golden_masks},
      {2, "published headline numbers", 1.0, headline_numbers},
      {3, "figure fixture replay", 5.0, fixture_replay},
      {4, "gemm oracle equivalence", 30.0, gemm_oracle},
      {5, "toggle-model ordering", 60.0, toggle_ordering},
      {6, "determinism and round-trips", 10.0, determinism},
      {7, "protocol conformance", 60.0, protocol},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(secs <= cr.budget_s, "runtime " + fmt(secs, 2) + " s over " + fmt(cr.budget_s, 0) + " s budget");
    const bool ok = check.ok();
    if (!ok) ++failed;
    std::cout << "criterion " << cr.id << ": " << (ok ? "PASS" : "FAIL") << " " << cr.title << " ("
              << fmt(secs, 2) << " s) " << check.detail() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
