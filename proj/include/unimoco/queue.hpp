#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "unimoco/losses.hpp"
#include "unimoco/numerics.hpp"

namespace unimoco {

/// Label carried by samples whose class is hidden. Such keys are negatives
/// for every query, and such queries only have their augmented key positive.
inline constexpr int kUnlabeled = -1;

/// Fixed-capacity ring of key features with a label queue moving in lockstep.
/// Slot `cursor()` always holds the oldest entry once the ring has wrapped.
class PairQueue {
 public:
  PairQueue() = default;
  /// Random unit features drawn from `rng`, every label kUnlabeled.
  PairQueue(std::size_t capacity, std::size_t dim, Rng& rng);
  /// Restores a queue from raw state (checkpoint load).
  PairQueue(Matrix features, std::vector<int> labels, std::size_t cursor,
            std::uint64_t inserted);

  std::size_t capacity() const { return labels_.size(); }
  std::size_t dim() const { return features_.cols(); }
  std::size_t cursor() const { return cursor_; }
  /// Total keys ever pushed.
  std::uint64_t inserted() const { return inserted_; }
  /// Number of slots holding pushed keys (saturates at capacity).
  std::size_t occupancy() const;

  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  /// Replaces the oldest rows.size() entries, wrapping mid-batch if needed.
  /// Keys must be unit norm within 1e-8 and at most capacity() rows.
  void push_batch(const Matrix& keys, std::span<const int> labels);

  /// Slot indices ordered oldest to newest over the pushed entries.
  std::vector<std::size_t> logical_order() const;

  bool operator==(const PairQueue&) const = default;

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::size_t cursor_ = 0;
  std::uint64_t inserted_ = 0;
};

/// One target row per query: bit 0 is the augmented key; bit 1+j is set iff
/// the query is labeled and its label equals queue label j.
std::vector<TargetMask> build_target(std::span<const int> query_labels, const PairQueue& queue);

}  // namespace unimoco
