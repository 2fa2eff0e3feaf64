#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "epower/gemm.hpp"
#include "epower/patterns.hpp"

namespace epower::fixtures {

// Published A100 measurements: 16384x16384 DGEMM, 100 repetitions.
inline constexpr std::size_t kGpuN = 16384;
inline constexpr std::uint64_t kGpuReps = 100;
inline constexpr double kGpuTdpW = 400.0;
inline constexpr double kGpuRandomW = 398.2;
inline constexpr double kGpuFixedW = 238.5;
inline constexpr double kGpuRandomFlopRate = 18.6e12;
inline constexpr double kGpuFixedFlopRate = 19.4e12;

// Published EPYC 7763 measurements: 64 cores, 3344x3344 per core, 30 repetitions.
inline constexpr std::size_t kCpuN = 3344;
inline constexpr std::uint64_t kCpuReps = 30;
inline constexpr std::size_t kCpuCores = 64;
inline constexpr double kCpuTdpW = 280.0;
inline constexpr double kCpuRandomW = 188.4;
inline constexpr double kCpuFixedW = 157.7;
inline constexpr double kCpuRandomSeconds = 73.0;
inline constexpr double kCpuFixedSeconds = 72.9;
inline constexpr double kCpuRandomMemoryW = 114.9;
inline constexpr double kCpuFixedMemoryW = 114.6;

inline constexpr std::size_t kSweepLevels = 15;  // n = 0..log2(16384)

/// One plotted power-vs-level curve of the GPU sweep figures.
struct PlottedCurve {
  patterns::Family family;
  patterns::ValueMode value_mode;
  std::array<double, kSweepLevels> watts;
};

/// The eight published sweep curves (4 families x 2 value modes).
std::span<const PlottedCurve> gpu_sweep_curves();

/// Synthesizes a telemetry run whose steady-state mean is `mean_w`: an idle
/// lead-in, a warm-up ramp, a measured plateau with dips inside the trimmed
/// head and tail, and an idle tail. With `ripple`, the plateau alternates
/// +/-0.5 W around the target instead of holding it exactly.
gemm::Experiment synthesize_run(const patterns::PatternSpec& spec, std::uint64_t reps,
                                double mean_w, double flop_rate, double tdp_w, bool ripple,
                                std::string node_id = "nid001", std::uint32_t run_index = 0);

/// Sweep curves plus the fixed/random GPU baselines as synthesized runs.
std::vector<gemm::Experiment> published_experiments();

/// Writes published_experiments() as run directories under `dir`.
std::size_t write_fixture_set(const std::filesystem::path& dir);

}  // namespace epower::fixtures
