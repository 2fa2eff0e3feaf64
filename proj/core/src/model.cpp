#include "epower/model.hpp"

#include <algorithm>
#include <cmath>

#include "epower/error.hpp"

namespace epower::model {

void Schedule::validate(std::size_t n_dim) const {
  if (lanes == 0) fail(ErrorKind::config, "schedule needs at least one lane");
  if (tile_m == 0 || tile_n == 0 || n_dim % tile_m != 0 || n_dim % tile_n != 0) {
    fail(ErrorKind::config, "tile " + std::to_string(tile_m) + "x" + std::to_string(tile_n) +
                                " does not divide N=" + std::to_string(n_dim));
  }
}

namespace {

/// Walks one lane's share of the output tiles, producing FMA issues.
class LaneCursor {
 public:
  LaneCursor(const patterns::MatrixPair& pair, const Schedule& s, std::size_t lane)
      : a_(pair.a),
        b_(pair.b),
        n_(pair.a.n_dim()),
        tm_(s.tile_m),
        tn_(s.tile_n),
        tiles_per_row_(n_ / s.tile_n),
        tile_count_((n_ / s.tile_m) * (n_ / s.tile_n)),
        stride_(s.lanes),
        lane_(static_cast<std::uint32_t>(lane)),
        tile_(lane) {}

  bool next(FmaCycle& out) {
    if (tile_ >= tile_count_) return false;
    const std::size_t i = (tile_ / tiles_per_row_) * tm_ + cell_ / tn_;
    const std::size_t j = (tile_ % tiles_per_row_) * tn_ + cell_ % tn_;
    out.lane = lane_;
    out.a = a_(i, k_);
    out.b = b_(k_, j);
    out.acc_in = acc_;
    acc_ = std::fma(out.a, out.b, acc_);
    if (++k_ == n_) {
      k_ = 0;
      acc_ = 0.0;
      if (++cell_ == tm_ * tn_) {
        cell_ = 0;
        tile_ += stride_;
      }
    }
    return true;
  }

 private:
  const patterns::Matrix& a_;
  const patterns::Matrix& b_;
  std::size_t n_, tm_, tn_, tiles_per_row_, tile_count_, stride_;
  std::uint32_t lane_;
  std::size_t tile_;
  std::size_t cell_ = 0;
  std::size_t k_ = 0;
  double acc_ = 0.0;
};

template <typename Sink>
void for_each_cycle(const patterns::MatrixPair& pair, const Schedule& schedule, Sink&& sink) {
  const std::size_t n = pair.a.n_dim();
  if (pair.b.n_dim() != n) fail(ErrorKind::dimension, "operand dimensions differ");
  schedule.validate(n);
  std::vector<LaneCursor> lanes;
  lanes.reserve(schedule.lanes);
  for (std::size_t l = 0; l < schedule.lanes; ++l) lanes.emplace_back(pair, schedule, l);
  std::vector<bool> done(schedule.lanes, false);
  std::size_t live = schedule.lanes;
  FmaCycle cycle;
  while (live > 0) {
    for (std::size_t l = 0; l < lanes.size(); ++l) {
      if (done[l]) continue;
      if (lanes[l].next(cycle)) {
        sink(cycle);
      } else {
        done[l] = true;
        --live;
      }
    }
  }
}

}  // namespace

std::vector<std::vector<FmaCycle>> lane_streams(const patterns::MatrixPair& pair,
                                                const Schedule& schedule) {
  schedule.validate(pair.a.n_dim());
  std::vector<std::vector<FmaCycle>> out(schedule.lanes);
  for (std::size_t l = 0; l < schedule.lanes; ++l) {
    LaneCursor cursor(pair, schedule, l);
    FmaCycle c;
    while (cursor.next(c)) out[l].push_back(c);
  }
  return out;
}

std::vector<FmaCycle> operand_stream(const patterns::MatrixPair& pair, const Schedule& schedule) {
  std::vector<FmaCycle> out;
  const auto n = pair.a.n_dim();
  out.reserve(n * n * n);
  for_each_cycle(pair, schedule, [&](const FmaCycle& c) { out.push_back(c); });
  return out;
}

void ToggleCounter::push(const FmaCycle& cycle) {
  const auto a = bits64(cycle.a);
  const auto b = bits64(cycle.b);
  const auto acc = bits64(cycle.acc_in);
  if (cycles_ > 0) {
    mul_ += static_cast<std::uint64_t>(hamming(prev_a_, a) + hamming(prev_b_, b));
    acc_ += static_cast<std::uint64_t>(hamming(prev_acc_, acc));
  }
  prev_a_ = a;
  prev_b_ = b;
  prev_acc_ = acc;
  ++cycles_;
}

ToggleReport ToggleCounter::report() const {
  ToggleReport r;
  r.cycles = cycles_;
  r.flops = 2 * cycles_;
  r.mul_input_toggles = mul_;
  r.acc_toggles = acc_;
  if (r.flops > 0) {
    r.score_per_flop = (weights_.mul * static_cast<double>(mul_) +
                        weights_.acc * static_cast<double>(acc_)) /
                       static_cast<double>(r.flops);
  }
  return r;
}

ToggleReport toggle_score(std::span<const FmaCycle> stream, Weights weights) {
  if (stream.empty()) fail(ErrorKind::config, "cannot score an empty operand stream");
  ToggleCounter counter(weights);
  for (const auto& c : stream) counter.push(c);
  return counter.report();
}

ToggleReport score_pattern(const patterns::MatrixPair& pair, const Schedule& schedule,
                           Weights weights) {
  ToggleCounter counter(weights);
  for_each_cycle(pair, schedule, [&](const FmaCycle& c) { counter.push(c); });
  return counter.report();
}

std::vector<RankedSpec> predict_ordering(std::span<const patterns::PatternSpec> specs,
                                         const Schedule& schedule, Weights weights) {
  std::vector<RankedSpec> ranked;
  if (specs.empty()) return ranked;
  const auto n = specs.front().n_dim;
  for (const auto& s : specs) {
    if (s.n_dim != n) {
      fail(ErrorKind::config, "cannot rank specs of mixed N (" + std::to_string(n) + " and " +
                                  std::to_string(s.n_dim) + ")");
    }
  }
  schedule.validate(n);
  for (std::size_t idx = 0; idx < specs.size(); ++idx) {
    const auto pair = patterns::generate(specs[idx]);
    ranked.push_back({specs[idx], idx, score_pattern(pair, schedule, weights)});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedSpec& x, const RankedSpec& y) {
    return x.report.score_per_flop > y.report.score_per_flop;
  });
  return ranked;
}

}  // namespace epower::model
