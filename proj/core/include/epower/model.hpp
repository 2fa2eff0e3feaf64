#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "epower/patterns.hpp"

namespace epower::model {

/// IEEE-754 binary64 bit pattern.
constexpr std::uint64_t bits64(double x) noexcept { return std::bit_cast<std::uint64_t>(x); }

constexpr int hamming(std::uint64_t p, std::uint64_t q) noexcept { return std::popcount(p ^ q); }

enum class Traversal { k_inner_row_major };

/// How output cells are mapped onto one time-multiplexed FMA port.
///
/// Output tiles of tile_m x tile_n cells are dealt round-robin to `lanes`
/// logical threads (tile t goes to lane t mod lanes). Each lane walks its
/// tiles in row-major order and, inside a tile, each cell in row-major order
/// with k innermost. The port then issues one FMA per cycle, taking lanes in
/// turn and skipping lanes that have finished.
struct Schedule {
  std::size_t lanes = 1;
  std::size_t tile_m = 1;
  std::size_t tile_n = 1;
  Traversal traversal = Traversal::k_inner_row_major;

  /// Throws Error{config} if lanes == 0 or the tile does not divide n_dim.
  void validate(std::size_t n_dim) const;
};

/// One FMA issue: acc_out = fma(a, b, acc_in).
struct FmaCycle {
  std::uint32_t lane = 0;
  double a = 0.0;
  double b = 0.0;
  double acc_in = 0.0;
};

/// Per-lane operand sequences: lane L's k-inner walk over its tiles.
std::vector<std::vector<FmaCycle>> lane_streams(const patterns::MatrixPair& pair,
                                                const Schedule& schedule);

/// Lane sequences interleaved round-robin into the single port stream.
std::vector<FmaCycle> operand_stream(const patterns::MatrixPair& pair, const Schedule& schedule);

struct Weights {
  double mul = 1.0;
  double acc = 1.0;
};

struct ToggleReport {
  std::uint64_t cycles = 0;
  std::uint64_t flops = 0;  // 2 per FMA
  std::uint64_t mul_input_toggles = 0;
  std::uint64_t acc_toggles = 0;
  double score_per_flop = 0.0;
};

/// Streaming toggle accumulator over consecutive port cycles.
class ToggleCounter {
 public:
  explicit ToggleCounter(Weights weights = {}) : weights_(weights) {}
  void push(const FmaCycle& cycle);
  ToggleReport report() const;

 private:
  Weights weights_;
  std::uint64_t cycles_ = 0;
  std::uint64_t mul_ = 0;
  std::uint64_t acc_ = 0;
  std::uint64_t prev_a_ = 0;
  std::uint64_t prev_b_ = 0;
  std::uint64_t prev_acc_ = 0;
};

/// Hamming distance between consecutive cycles, summed separately over the
/// two multiplier operand words and the accumulator word. Throws
/// Error{config} on an empty stream.
ToggleReport toggle_score(std::span<const FmaCycle> stream, Weights weights = {});

/// Same as toggle_score(operand_stream(...)) without materializing the stream.
ToggleReport score_pattern(const patterns::MatrixPair& pair, const Schedule& schedule,
                           Weights weights = {});

struct RankedSpec {
  patterns::PatternSpec spec;
  std::size_t input_index = 0;
  ToggleReport report;
};

/// Scores each spec and sorts by score_per_flop, highest first; ties keep
/// input order. Throws Error{config} if the specs disagree on N.
std::vector<RankedSpec> predict_ordering(std::span<const patterns::PatternSpec> specs,
                                         const Schedule& schedule, Weights weights = {});

}  // namespace epower::model
