#include "epower/patterns.hpp"

#include <bit>
#include <fstream>
#include <limits>
#include <new>

#include "epower/error.hpp"

namespace epower::patterns {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::baseline_random: return "baseline_random";
    case Family::baseline_fixed: return "baseline_fixed";
    case Family::block_rowcol: return "block_rowcol";
    case Family::block_diagonal: return "block_diagonal";
    case Family::sparse_rowcol: return "sparse_rowcol";
    case Family::sparse_diagonal: return "sparse_diagonal";
  }
  return "?";
}

std::string_view to_string(ValueMode mode) {
  return mode == ValueMode::independent ? "independent" : "fixed_common";
}

Family parse_family(std::string_view name) {
  for (auto f : {Family::baseline_random, Family::baseline_fixed, Family::block_rowcol,
                 Family::block_diagonal, Family::sparse_rowcol, Family::sparse_diagonal}) {
    if (to_string(f) == name) return f;
  }
  fail(ErrorKind::config, "unknown pattern family '" + std::string(name) + "'");
}

ValueMode parse_value_mode(std::string_view name) {
  if (name == "independent") return ValueMode::independent;
  if (name == "fixed_common") return ValueMode::fixed_common;
  fail(ErrorKind::config, "unknown value mode '" + std::string(name) + "'");
}

bool is_baseline(Family f) {
  return f == Family::baseline_random || f == Family::baseline_fixed;
}
bool is_block(Family f) { return f == Family::block_rowcol || f == Family::block_diagonal; }
bool is_sparse(Family f) { return f == Family::sparse_rowcol || f == Family::sparse_diagonal; }

bool is_power_of_two(std::size_t n) { return std::has_single_bit(n); }

unsigned log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) {
    fail(ErrorKind::config, "n=" + std::to_string(n) + " is not a power of two");
  }
  return static_cast<unsigned>(std::countr_zero(n));
}

void PatternSpec::validate() const {
  if (n_dim < 2 || !is_power_of_two(n_dim)) {
    fail(ErrorKind::config,
         "pattern dimension must be a power of two >= 2, got " + std::to_string(n_dim));
  }
  if (level > log2_exact(n_dim)) {
    fail(ErrorKind::config, "level " + std::to_string(level) + " exceeds log2(N)=" +
                                std::to_string(log2_exact(n_dim)));
  }
}

Mask::Mask(std::size_t n_dim, bool fill) : n_(n_dim), cells_(n_dim * n_dim, fill ? 1 : 0) {}

std::size_t Mask::random_count() const {
  std::size_t count = 0;
  for (auto c : cells_) count += c;
  return count;
}

std::vector<std::string> Mask::rows() const {
  std::vector<std::string> out(n_, std::string(n_, '0'));
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if ((*this)(i, j)) out[i][j] = '1';
    }
  }
  return out;
}

std::pair<Mask, Mask> masks(const PatternSpec& spec) {
  spec.validate();
  if (is_baseline(spec.family)) {
    fail(ErrorKind::config, "baseline families have no mask");
  }
  const std::size_t n = spec.n_dim;
  const std::size_t blocks = std::size_t{1} << spec.level;
  const std::size_t stripe = n / blocks;  // also the diagonal stride
  Mask a(n, false);
  Mask b(n, false);

  switch (spec.family) {
    case Family::block_rowcol:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          a.set(i, j, spec.level == 0 || (i / stripe) % 2 == 0);
          b.set(i, j, spec.level == 0 || (j / stripe) % 2 == 0);
        }
      }
      break;
    case Family::block_diagonal:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const bool even = (i / stripe + j / stripe) % 2 == 0;
          a.set(i, j, spec.level == 0 || even);
          b.set(i, j, spec.level == 0 || !even);
        }
      }
      break;
    case Family::sparse_rowcol:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          a.set(i, j, i < blocks);
          b.set(i, j, j < blocks);
        }
      }
      break;
    case Family::sparse_diagonal:
      // Diagonals wrap modulo N, spaced `stride` apart.
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          a.set(i, j, ((j + n - i) % n) % stripe == 0);
          b.set(i, j, ((i + j) % n) % stripe == stripe - 1);
        }
      }
      break;
    default:
      break;
  }
  return {std::move(a), std::move(b)};
}

std::size_t expected_random_count(const PatternSpec& spec) {
  spec.validate();
  const std::size_t cells = spec.n_dim * spec.n_dim;
  if (is_baseline(spec.family)) return cells;
  if (is_block(spec.family)) return spec.level == 0 ? cells : cells / 2;
  // N^2 / 2^(log2 N - level)
  return cells >> (log2_exact(spec.n_dim) - spec.level);
}

double random_fraction(const Mask& mask) {
  const auto cells = mask.n_dim() * mask.n_dim();
  if (cells == 0) return 0.0;
  return static_cast<double>(mask.random_count()) / static_cast<double>(cells);
}

Matrix::Matrix(std::size_t n_dim, double fill) : n_(n_dim) {
  if (n_dim != 0 && n_dim > std::numeric_limits<std::size_t>::max() / n_dim / sizeof(double)) {
    fail(ErrorKind::resource, "matrix of dimension " + std::to_string(n_dim) + " is too large");
  }
  try {
    values_.assign(n_dim * n_dim, fill);
  } catch (const std::bad_alloc&) {
    fail(ErrorKind::resource,
         "cannot allocate " + std::to_string(n_dim) + "x" + std::to_string(n_dim) + " matrix");
  } catch (const std::length_error&) {
    fail(ErrorKind::resource, "matrix of dimension " + std::to_string(n_dim) + " is too large");
  }
}

UnitStream::UnitStream(std::uint64_t seed) : engine_(seed) {}

double UnitStream::next() {
  // Top 53 bits mapped to (0, 1]: k in [0, 2^53) -> (k + 1) / 2^53.
  const std::uint64_t k = engine_() >> 11;
  return static_cast<double>(k + 1) * 0x1.0p-53;
}

MatrixPair generate(const PatternSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_dim;

  if (spec.family == Family::baseline_fixed) {
    return {Matrix(n, 2.0), Matrix(n, 0.5), spec};
  }

  Matrix a(n, 0.0);
  Matrix b(n, 0.0);
  UnitStream stream_a(spec.seed);
  UnitStream stream_b(spec.seed ^ kSeedSplitB);

  if (spec.family == Family::baseline_random) {
    for (auto& v : a.values()) v = stream_a.next();
    for (auto& v : b.values()) v = stream_b.next();
    return {std::move(a), std::move(b), spec};
  }

  const auto [mask_a, mask_b] = masks(spec);
  if (spec.value_mode == ValueMode::fixed_common) {
    const double common = stream_a.next();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (mask_a(i, j)) a(i, j) = common;
        if (mask_b(i, j)) b(i, j) = common;
      }
    }
  } else {
    // Draws are consumed in row-major order over random-designated cells only.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (mask_a(i, j)) a(i, j) = stream_a.next();
        if (mask_b(i, j)) b(i, j) = stream_b.next();
      }
    }
  }
  return {std::move(a), std::move(b), spec};
}

void write_raw(const std::filesystem::path& path, const Matrix& m) {
  static_assert(std::endian::native == std::endian::little,
                "raw matrix dumps assume a little-endian host");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::resource, "cannot write " + path.string());
  const auto values = m.values();
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
  if (!out) fail(ErrorKind::resource, "short write to " + path.string());
}

Matrix read_raw(const std::filesystem::path& path, std::size_t n_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::resource, "cannot open " + path.string());
  Matrix m(n_dim, 0.0);
  auto values = m.values();
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (in.gcount() != static_cast<std::streamsize>(values.size_bytes())) {
    fail(ErrorKind::format, path.string() + " is shorter than a " + std::to_string(n_dim) + "x" +
                                std::to_string(n_dim) + " matrix");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorKind::format, path.string() + " is longer than a " + std::to_string(n_dim) + "x" +
                                std::to_string(n_dim) + " matrix");
  }
  return m;
}

}  // namespace epower::patterns
