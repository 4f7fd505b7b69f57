#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "unimoco/model.hpp"
#include "unimoco/numerics.hpp"

namespace unimoco {

struct ProbeConfig {
  std::size_t epochs = 100;
  double lr = 0.1;
  std::size_t batch_size = 64;
  std::size_t knn_k = 20;
  /// Per-coordinate standardization with train-split statistics.
  bool standardize = true;

  bool operator==(const ProbeConfig&) const = default;
};

void validate(const ProbeConfig& cfg);

/// Frozen trunk features (pre-projection, un-normalized) for every row.
Matrix extract_features(const EncoderParams& params, const Matrix& inputs);

/// Softmax-regression probe trained by plain minibatch SGD (no weight decay,
/// fixed epochs) on the train split; returns top-1 accuracy on the test
/// split. Labels must lie in [0, C) and the train split must hold >= 2 classes.
double linear_probe(const Matrix& train_features, std::span<const int> train_labels,
                    const Matrix& test_features, std::span<const int> test_labels,
                    const ProbeConfig& cfg, std::uint64_t seed);

/// Cosine-similarity k-nearest-neighbor vote; vote ties go to the smaller
/// class index, similarity ties to the earlier train row.
double knn_probe(const Matrix& train_features, std::span<const int> train_labels,
                 const Matrix& test_features, std::span<const int> test_labels, std::size_t k);

}  // namespace unimoco
