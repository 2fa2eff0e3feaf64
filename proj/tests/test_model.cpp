#include <gtest/gtest.h>

#include <random>

#include "epower/error.hpp"
#include "epower/model.hpp"

using namespace epower;
using namespace epower::model;
using patterns::Family;
using patterns::PatternSpec;
using patterns::ValueMode;

namespace {

int slow_hamming(std::uint64_t p, std::uint64_t q) {
  int d = 0;
  for (int bit = 0; bit < 64; ++bit) d += ((p >> bit) & 1U) != ((q >> bit) & 1U);
  return d;
}

ToggleReport score(const PatternSpec& spec, std::size_t lanes = 1) {
  return score_pattern(patterns::generate(spec), Schedule{lanes, 1, 1});
}

}  // namespace

TEST(Bits, KnownPatterns) {
  EXPECT_EQ(bits64(0.0), 0u);
  EXPECT_EQ(bits64(1.0), 0x3FF0000000000000ULL);
  EXPECT_EQ(bits64(2.0), 0x4000000000000000ULL);
  EXPECT_EQ(bits64(0.5), 0x3FE0000000000000ULL);
}

TEST(Hamming, ExamplesAgainstBitLoop) {
  EXPECT_EQ(hamming(0x0, ~0ULL), 64);
  // 0x4000... vs 0x3FE0...: the exponent fields 0x400 and 0x3FE differ in ten bits.
  EXPECT_EQ(slow_hamming(bits64(2.0), bits64(0.5)), 10);
  EXPECT_EQ(hamming(bits64(2.0), bits64(0.5)), 10);
}

TEST(Hamming, IsAMetric) {
  std::mt19937_64 rng(2022);
  for (int i = 0; i < 2000; ++i) {
    const auto x = rng(), y = rng(), z = rng();
    ASSERT_EQ(hamming(x, x), 0);
    ASSERT_EQ(hamming(x, y), hamming(y, x));
    ASSERT_EQ(hamming(x, y), slow_hamming(x, y));
    ASSERT_LE(hamming(x, z), hamming(x, y) + hamming(y, z));
    if (x != y) ASSERT_GT(hamming(x, y), 0);
  }
}

TEST(OperandStream, DotProductOrderForFirstOutput) {
  const auto pair = patterns::generate({Family::baseline_random, 4, 0, ValueMode::independent, 1});
  const auto stream = operand_stream(pair, Schedule{});
  ASSERT_EQ(stream.size(), 64u);
  double acc = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(stream[k].a, pair.a(0, k));
    EXPECT_EQ(stream[k].b, pair.b(k, 0));
    EXPECT_EQ(stream[k].acc_in, acc);
    acc = std::fma(pair.a(0, k), pair.b(k, 0), acc);
  }
  EXPECT_EQ(stream[4].b, pair.b(0, 1));
  EXPECT_EQ(stream[4].acc_in, 0.0);
}

TEST(OperandStream, BaselineFixedPairsAreConstant) {
  const auto pair = patterns::generate({Family::baseline_fixed, 16, 0, ValueMode::independent, 0});
  for (const auto& c : operand_stream(pair, Schedule{})) {
    ASSERT_EQ(c.a, 2.0);
    ASSERT_EQ(c.b, 0.5);
  }
  EXPECT_EQ(score({Family::baseline_fixed, 16, 0, ValueMode::independent, 0}).mul_input_toggles, 0u);
}

TEST(OperandStream, BlockRowColLevelOneFollowsTheMasks) {
  // Level 1 keeps the top half of A's rows and the left half of B's columns random.
  const auto pair = patterns::generate({Family::block_rowcol, 8, 1, ValueMode::independent, 4});
  const auto stream = operand_stream(pair, Schedule{});
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_GT(stream[k].a, 0.0);
    EXPECT_GT(stream[k].b, 0.0);
    EXPECT_EQ(stream[4 * 8 + k].b, 0.0);
    EXPECT_EQ(stream[32 * 8 + k].a, 0.0);
  }
}

TEST(OperandStream, LanesInterleaveRoundRobin) {
  const auto pair = patterns::generate({Family::baseline_random, 4, 0, ValueMode::independent, 2});
  const Schedule s{4, 1, 1};
  const auto lanes = lane_streams(pair, s);
  const auto port = operand_stream(pair, s);
  ASSERT_EQ(port.size(), 64u);
  for (std::size_t c = 0; c < port.size(); ++c) {
    const auto& expected = lanes[c % 4][c / 4];
    ASSERT_EQ(port[c].lane, c % 4);
    ASSERT_EQ(port[c].a, expected.a);
    ASSERT_EQ(port[c].b, expected.b);
    ASSERT_EQ(port[c].acc_in, expected.acc_in);
  }
  EXPECT_THROW(operand_stream(pair, Schedule{1, 3, 1}), Error);
  EXPECT_THROW(operand_stream(pair, Schedule{0, 1, 1}), Error);
}

TEST(ToggleScore, AlternatingSwapFlipsBothWords) {
  std::vector<FmaCycle> stream;
  for (int i = 0; i < 10; ++i) stream.push_back(i % 2 ? FmaCycle{0, 0.5, 2.0, 0.0} : FmaCycle{0, 2.0, 0.5, 0.0});
  const auto per_cycle = static_cast<std::uint64_t>(2 * slow_hamming(bits64(2.0), bits64(0.5)));
  const auto r = toggle_score(stream);
  EXPECT_EQ(per_cycle, 20u);
  EXPECT_EQ(r.mul_input_toggles, per_cycle * 9u);
  EXPECT_EQ(r.acc_toggles, 0u);
  EXPECT_EQ(r.flops, 20u);
  EXPECT_EQ(r.score_per_flop, 180.0 / 20.0);
  EXPECT_EQ(toggle_score(stream, {2.0, 0.0}).score_per_flop, 360.0 / 20.0);
  EXPECT_THROW(toggle_score(std::span<const FmaCycle>{}), Error);
}

TEST(ToggleScore, StreamingMatchesMaterialized) {
  for (std::size_t lanes : {1u, 3u, 4u}) {
    const auto pair = patterns::generate({Family::sparse_diagonal, 16, 2, ValueMode::independent, 6});
    const Schedule s{lanes, 2, 4};
    const auto a = score_pattern(pair, s);
    const auto b = toggle_score(operand_stream(pair, s));
    EXPECT_EQ(a.mul_input_toggles, b.mul_input_toggles);
    EXPECT_EQ(a.acc_toggles, b.acc_toggles);
    EXPECT_EQ(a.score_per_flop, b.score_per_flop);
  }
}

TEST(ToggleScore, LaneRelabelingDoesNotChangeTheScore) {
  const auto pair = patterns::generate({Family::block_diagonal, 16, 2, ValueMode::independent, 3});
  auto stream = operand_stream(pair, Schedule{4, 1, 1});
  const auto before = toggle_score(stream);
  const std::uint32_t relabel[] = {2, 0, 3, 1};
  for (auto& c : stream) c.lane = relabel[c.lane];
  const auto after = toggle_score(stream);
  EXPECT_EQ(before.score_per_flop, after.score_per_flop);
}

TEST(ToggleScore, RandomExceedsFixed) {
  const auto random = score({Family::baseline_random, 64, 0, ValueMode::independent, 0});
  EXPECT_GT(random.mul_input_toggles, 0u);
  EXPECT_EQ(score({Family::baseline_fixed, 64, 0, ValueMode::independent, 0}).mul_input_toggles, 0u);
}

TEST(PredictOrdering, Examples) {
  const std::vector<PatternSpec> baselines{{Family::baseline_fixed, 64, 0, ValueMode::independent, 0},
                                           {Family::baseline_random, 64, 0, ValueMode::independent, 0}};
  auto ranked = predict_ordering(baselines, Schedule{});
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].spec.family, Family::baseline_random);
  EXPECT_EQ(ranked[0].input_index, 1u);

  const std::vector<PatternSpec> levels{{Family::block_rowcol, 64, 1, ValueMode::fixed_common, 0},
                                        {Family::block_rowcol, 64, 6, ValueMode::fixed_common, 0}};
  ranked = predict_ordering(levels, Schedule{});
  EXPECT_EQ(ranked[0].spec.level, 6u);

  ranked = predict_ordering(std::span(levels).first(1), Schedule{});
  ASSERT_EQ(ranked.size(), 1u);

  const std::vector<PatternSpec> mixed{{Family::baseline_fixed, 64, 0, ValueMode::independent, 0},
                                       {Family::baseline_fixed, 32, 0, ValueMode::independent, 0}};
  try {
    predict_ordering(mixed, Schedule{});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(PredictOrdering, TiesKeepInputOrder) {
  const std::vector<PatternSpec> same(3, {Family::baseline_fixed, 8, 0, ValueMode::independent, 0});
  const auto ranked = predict_ordering(same, Schedule{});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ranked[i].input_index, i);
}

TEST(ModelOrdering, SingleLaneBlockPatternsSitBetweenBaselines) {
  for (std::size_t n : {16u, 32u, 64u}) {
    const double hi = score({Family::baseline_random, n, 0, ValueMode::independent, 0}).score_per_flop;
    const double lo = score({Family::baseline_fixed, n, 0, ValueMode::independent, 0}).score_per_flop;
    for (auto family : {Family::block_rowcol, Family::block_diagonal}) {
      for (auto mode : {ValueMode::independent, ValueMode::fixed_common}) {
        for (unsigned level = 1; level <= patterns::log2_exact(n); ++level) {
          const double s = score({family, n, level, mode, 0}).score_per_flop;
          EXPECT_GT(s, lo) << patterns::to_string(family) << " n=" << n << " level=" << level;
          EXPECT_LT(s, hi) << patterns::to_string(family) << " n=" << n << " level=" << level;
        }
      }
    }
  }
}

TEST(ModelOrdering, SparseScoreIsNondecreasingInLevel) {
  for (std::size_t n : {16u, 32u, 64u}) {
    for (auto family : {Family::sparse_rowcol, Family::sparse_diagonal}) {
      double prev = -1.0;
      for (unsigned level = 0; level <= patterns::log2_exact(n); ++level) {
        const double s = score({family, n, level, ValueMode::independent, 0}).score_per_flop;
        EXPECT_GE(s, prev) << patterns::to_string(family) << " n=" << n << " level=" << level;
        prev = s;
      }
    }
  }
}
