#include "epower/fixtures.hpp"

#include <cmath>

#include "epower/records.hpp"

namespace epower::fixtures {

namespace {

using patterns::Family;
using patterns::ValueMode;

// Plotted coordinates, levels 0..14, verbatim.
constexpr std::array<PlottedCurve, 8> kCurves{{
    {Family::block_rowcol, ValueMode::independent,
     {397.7619797979798, 367.05400039018855, 366.4409515474556, 368.4516669624022,
      369.9570964360587, 369.328523712047, 368.5147659922209, 369.4372450052578,
      367.0423095186136, 367.4017505241091, 367.98909914946313, 373.39964552374505,
      373.71134291325006, 378.5723911605791, 390.8911433683268}},
    {Family::block_rowcol, ValueMode::fixed_common,
     {256.96765509989467, 256.5506769107657, 253.14830918112511, 255.25163117840728,
      255.07423322032398, 255.19309655547588, 255.4943248417754, 256.27922646800124,
      256.6016067165895, 257.3227672955973, 257.998135782023, 264.6394200626958,
      268.9404685898325, 280.92651991614247, 304.56256674536576}},
    {Family::block_diagonal, ValueMode::independent,
     {398.4254609929078, 334.67878558815977, 337.6056924681323, 339.6100446526389,
      339.8847949857482, 339.9311481025888, 338.92486005491673, 338.899019767342,
      339.51660879346235, 340.7514405888537, 345.1066183097152, 353.3892522410718,
      353.6164657139825, 389.9899794299534, 397.89062379309604}},
    {Family::block_diagonal, ValueMode::fixed_common,
     {256.69062329678843, 253.12879146047348, 252.40521585923398, 253.53782095125783,
      254.2340077961218, 254.22988203439726, 255.74747448459865, 255.5148696792254,
      255.54490493290726, 259.16483565958896, 264.96845921807557, 279.92750271090875,
      281.49524446296186, 346.7355832687596, 395.4594016821138}},
    {Family::sparse_rowcol, ValueMode::independent,
     {271.95153625249674, 272.3092848164171, 272.49049590302155, 275.94117770767616,
      270.17193421183987, 270.18522544954357, 269.845251572327, 271.2928696494026,
      272.5724791506477, 275.02801094067405, 280.6385570396647, 294.37294496141664,
      317.4964257035553, 367.4591140944076, 398.29110321023455}},
    {Family::sparse_rowcol, ValueMode::fixed_common,
     {239.34223911200488, 239.6075017033542, 239.82366771159877, 240.1326752822613,
      237.88757381886526, 237.76539979146534, 237.67900843174752, 238.81389089331807,
      238.74597403983432, 239.55906082569587, 241.5773914605643, 244.4184259971215,
      250.61876593911617, 256.6217770784863, 256.2804638118332}},
    {Family::sparse_diagonal, ValueMode::independent,
     {225.8550933022161, 226.13175604626704, 226.31965226937555, 226.449395845245,
      226.80720284081875, 226.7399833402338, 227.59352750011487, 229.45069973952937,
      232.5979337289616, 239.3360236415881, 252.48740055031453, 276.4483762447591,
      320.11632055568833, 398.298434239159, 398.5338000407737}},
    {Family::sparse_diagonal, ValueMode::fixed_common,
     {225.57733926103603, 225.73500251307792, 225.55118662224064, 225.9628940769045,
      226.1342251191032, 227.21047318611977, 228.35011308013534, 229.03404094601686,
      232.6805861148898, 240.2681453196742, 254.5054334182524, 278.804199750015,
      319.8487721630325, 394.48046162560144, 256.6622386211853}},
}};

constexpr double kIntervalMs = 100.0;
constexpr double kIdleW = 60.0;
constexpr double kWarmupMs = 60'000.0;
constexpr double kTailMs = 3'000.0;
constexpr double kDipW = 40.0;
constexpr std::int64_t kFixtureEpochUnixMs = 1'662'026'400'000;  // 2022-09-01T10:00:00Z

}  // namespace

std::span<const PlottedCurve> gpu_sweep_curves() { return kCurves; }

gemm::Experiment synthesize_run(const patterns::PatternSpec& spec, std::uint64_t reps,
                                double mean_w, double flop_rate, double tdp_w, bool ripple,
                                std::string node_id, std::uint32_t run_index) {
  gemm::Experiment ex;
  auto& rec = ex.record;
  rec.config.pattern = spec;
  rec.config.n_dim = spec.n_dim;
  rec.config.reps = reps;
  rec.config.backend_id = "vendor-blas";
  rec.config.warmup_seconds = kWarmupMs / 1000.0;
  rec.total_flops = gemm::flop_count(spec.n_dim, reps);

  const double duration_ms = static_cast<double>(rec.total_flops) / flop_rate * 1000.0;
  const double start_ms = kWarmupMs + kIntervalMs / 2;
  const double end_ms = start_ms + duration_ms;
  const double trim_ms = duration_ms * 0.05;

  rec.warmup.wall_seconds = start_ms / 1000.0;
  rec.warmup.iterations =
      static_cast<std::uint64_t>(std::floor(kWarmupMs / (duration_ms / static_cast<double>(reps))));
  rec.measured.wall_seconds = duration_ms / 1000.0;
  rec.measured.iterations = reps;
  rec.flop_rate = static_cast<double>(rec.total_flops) / rec.measured.wall_seconds;
  rec.node_id = std::move(node_id);
  rec.run_index = run_index;
  rec.measured_start_ms = start_ms;
  rec.measured_end_ms = end_ms;
  rec.epoch_unix_ms = kFixtureEpochUnixMs;
  rec.tdp_w = tdp_w;
  rec.manifest_digest = "fixture";
  rec.timeline_ids = {"gpu"};

  telemetry::Timeline tl("gpu", kIntervalMs, kFixtureEpochUnixMs);
  const auto last = static_cast<std::size_t>(std::ceil((end_ms + kTailMs) / kIntervalMs));
  for (std::size_t k = 0; k <= last; ++k) {
    const double t = static_cast<double>(k) * kIntervalMs;
    double w = kIdleW;
    if (t < start_ms) {
      w = kIdleW + (mean_w - kIdleW) * (t / start_ms);
    } else if (t <= end_ms) {
      if (t < start_ms + trim_ms || t > end_ms - trim_ms) {
        w = mean_w - kDipW;
      } else if (ripple) {
        w = mean_w + (k % 2 == 0 ? 0.5 : -0.5);
      } else {
        w = mean_w;
      }
    }
    tl.append({t, w, "gpu"});
  }
  ex.timelines.push_back(std::move(tl));
  return ex;
}

std::vector<gemm::Experiment> published_experiments() {
  std::vector<gemm::Experiment> out;
  patterns::PatternSpec random{Family::baseline_random, kGpuN, 0, ValueMode::independent, 0};
  patterns::PatternSpec fixed{Family::baseline_fixed, kGpuN, 0, ValueMode::independent, 0};
  out.push_back(synthesize_run(random, kGpuReps, kGpuRandomW, kGpuRandomFlopRate, kGpuTdpW, false));
  out.push_back(synthesize_run(fixed, kGpuReps, kGpuFixedW, kGpuFixedFlopRate, kGpuTdpW, false));
  for (const auto& curve : kCurves) {
    const double rate = curve.value_mode == ValueMode::fixed_common ? kGpuFixedFlopRate
                                                                    : kGpuRandomFlopRate;
    for (unsigned level = 0; level < kSweepLevels; ++level) {
      patterns::PatternSpec spec{curve.family, kGpuN, level, curve.value_mode, 0};
      out.push_back(synthesize_run(spec, kGpuReps, curve.watts[level], rate, kGpuTdpW, true));
    }
  }
  return out;
}

std::size_t write_fixture_set(const std::filesystem::path& dir) {
  const auto experiments = published_experiments();
  for (const auto& ex : experiments) {
    const auto& r = ex.record;
    records::write_run_dir(dir / records::run_dir_name(r.config.pattern, r.node_id, r.run_index), ex);
  }
  return experiments.size();
}

}  // namespace epower::fixtures
