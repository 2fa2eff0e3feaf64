#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace epower::patterns {

enum class Family {
  baseline_random,
  baseline_fixed,
  block_rowcol,
  block_diagonal,
  sparse_rowcol,
  sparse_diagonal,
};

enum class ValueMode { independent, fixed_common };

std::string_view to_string(Family family);
std::string_view to_string(ValueMode mode);
Family parse_family(std::string_view name);
ValueMode parse_value_mode(std::string_view name);

bool is_baseline(Family family);
bool is_block(Family family);
bool is_sparse(Family family);

/// Identifier of the generator behind every random draw. A fixed identifier
/// pins the exact value sequence for a given seed.
inline constexpr std::string_view kPrngId = "mt19937_64/u53-open-closed";

/// XOR'ed into the user seed to derive B's stream from A's.
inline constexpr std::uint64_t kSeedSplitB = 0x9E3779B97F4A7C15ULL;

/// Declarative description of one entropy-controlled input pattern.
struct PatternSpec {
  Family family = Family::baseline_random;
  std::size_t n_dim = 2;
  unsigned level = 0;
  ValueMode value_mode = ValueMode::independent;
  std::uint64_t seed = 0;

  /// Throws Error{config} unless n_dim is a power of two >= 2 and
  /// 0 <= level <= log2(n_dim).
  void validate() const;

  bool operator==(const PatternSpec&) const = default;
};

unsigned log2_exact(std::size_t n);
bool is_power_of_two(std::size_t n);

/// N x N designation grid: true marks a random-designated cell.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t n_dim, bool fill);

  std::size_t n_dim() const noexcept { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { cells_[i * n_ + j] = v ? 1 : 0; }
  std::size_t random_count() const;

  /// One string per row, '1' for random-designated cells.
  std::vector<std::string> rows() const;

  bool operator==(const Mask&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Masks for a non-baseline pattern. Throws Error{config} for baselines or
/// an invalid level.
std::pair<Mask, Mask> masks(const PatternSpec& spec);

/// Number of random-designated cells each mask of `spec` must contain.
std::size_t expected_random_count(const PatternSpec& spec);

double random_fraction(const Mask& mask);

/// Dense row-major square matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t n_dim, double fill);

  std::size_t n_dim() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

struct MatrixPair {
  Matrix a;
  Matrix b;
  PatternSpec spec;
};

/// Pure function of `spec`: identical specs give bit-identical matrices.
/// Throws Error{resource} when the matrices cannot be allocated.
MatrixPair generate(const PatternSpec& spec);

/// Seeded uniform draws on (0, 1] from the documented generator.
class UnitStream {
 public:
  explicit UnitStream(std::uint64_t seed);
  double next();

 private:
  std::mt19937_64 engine_;
};

/// Raw little-endian float64 dump, row-major, no header.
void write_raw(const std::filesystem::path& path, const Matrix& m);
Matrix read_raw(const std::filesystem::path& path, std::size_t n_dim);

}  // namespace epower::patterns
