#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace unimoco {

/// Dense row-major matrix of doubles. Shape is fixed at construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// log(sum(exp(v))) with the maximum factored out. Throws on empty input.
double log_sum_exp(std::span<const double> values);

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// 1 / (1 + exp(-x)), the derivative of softplus.
double sigmoid(double x);

/// Rows scaled to unit L2 norm. Rows with norm <= 1e-12 are rejected with
/// "degenerate vector".
Matrix l2_normalize_rows(const Matrix& m);

bool all_finite(std::span<const double> v);

/// Counter-based generator: draw i is a pure function of (key, i), so a
/// stream can be checkpointed as two integers and substreams are derived
/// by hashing a label into the key.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  /// Independent stream keyed by a purpose label ("init", "aug", ...).
  Rng substream(std::string_view label) const;
  /// Independent stream keyed by a position (step, sample index, ...).
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; consumes two draws.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  static Rng from_state(std::uint64_t key, std::uint64_t counter);

  bool operator==(const Rng&) const = default;

 private:
  Rng() = default;
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

/// 64-bit FNV-1a, used for digests and fingerprints.
std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::string_view text);

}  // namespace unimoco
