#include "unimoco/queue.hpp"

#include <algorithm>
#include <cmath>

#include "unimoco/error.hpp"

namespace unimoco {

PairQueue::PairQueue(std::size_t capacity, std::size_t dim, Rng& rng)
    : features_(capacity, dim), labels_(capacity, kUnlabeled) {
  if (capacity == 0 || dim == 0) throw Error("queue capacity and dim must be positive");
  for (std::size_t r = 0; r < capacity; ++r) {
    auto row = features_.row(r);
    double n = 0.0;
    do {
      for (double& v : row) v = rng.normal();
      n = l2_norm(row);
    } while (n <= 1e-12);
    for (double& v : row) v /= n;
  }
}

PairQueue::PairQueue(Matrix features, std::vector<int> labels, std::size_t cursor,
                     std::uint64_t inserted)
    : features_(std::move(features)), labels_(std::move(labels)), cursor_(cursor),
      inserted_(inserted) {
  if (features_.rows() != labels_.size() || labels_.empty()) {
    throw Error("queue features and labels disagree");
  }
  if (cursor_ >= labels_.size()) throw Error("queue cursor out of range");
}

std::size_t PairQueue::occupancy() const {
  return static_cast<std::size_t>(std::min<std::uint64_t>(inserted_, capacity()));
}

void PairQueue::push_batch(const Matrix& keys, std::span<const int> labels) {
  if (keys.rows() != labels.size()) throw Error("key and label counts differ");
  if (keys.rows() > capacity()) throw Error("batch larger than queue");
  if (keys.cols() != dim()) throw Error("key width differs from queue");
  for (std::size_t r = 0; r < keys.rows(); ++r) {
    if (std::abs(l2_norm(keys.row(r)) - 1.0) > 1e-8) throw Error("key not unit norm");
    if (labels[r] < kUnlabeled) throw Error("invalid label");
  }
  for (std::size_t r = 0; r < keys.rows(); ++r) {
    std::ranges::copy(keys.row(r), features_.row(cursor_).begin());
    labels_[cursor_] = labels[r];
    cursor_ = (cursor_ + 1) % capacity();
  }
  inserted_ += keys.rows();
}

std::vector<std::size_t> PairQueue::logical_order() const {
  const std::size_t n = occupancy();
  std::vector<std::size_t> order(n);
  // Before the first wrap the pushed entries sit in slots [0, n).
  const std::size_t start = (n < capacity()) ? 0 : cursor_;
  for (std::size_t i = 0; i < n; ++i) order[i] = (start + i) % capacity();
  return order;
}

std::vector<TargetMask> build_target(std::span<const int> query_labels, const PairQueue& queue) {
  const auto& queue_labels = queue.labels();
  std::vector<TargetMask> targets;
  targets.reserve(query_labels.size());
  for (int label : query_labels) {
    TargetMask mask(1 + queue_labels.size(), 0);
    mask[0] = 1;
    if (label != kUnlabeled) {
      for (std::size_t j = 0; j < queue_labels.size(); ++j) {
        mask[1 + j] = queue_labels[j] == label ? 1 : 0;
      }
    }
    targets.push_back(std::move(mask));
  }
  return targets;
}

}  // namespace unimoco
