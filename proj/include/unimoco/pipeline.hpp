#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "unimoco/losses.hpp"
#include "unimoco/model.hpp"
#include "unimoco/numerics.hpp"
#include "unimoco/queue.hpp"

namespace unimoco {

/// Gaussian-cluster classification data: class means on a sphere of radius
/// `mean_radius`, isotropic noise of std `cluster_spread` around each mean.
struct DatasetSpec {
  std::size_t n_classes = 5;
  std::size_t input_dim = 64;
  std::size_t n_train = 5000;
  std::size_t n_test = 1000;
  double cluster_spread = 1.0;
  double mean_radius = 3.0;
  std::uint64_t seed = 0;

  bool operator==(const DatasetSpec&) const = default;
};

struct Dataset {
  DatasetSpec spec;
  Matrix train_inputs;
  std::vector<int> train_true;
  /// Labels visible to pretraining; kUnlabeled where masked.
  std::vector<int> train_labels;
  Matrix test_inputs;
  std::vector<int> test_labels;

  bool operator==(const Dataset&) const = default;
};

Dataset generate_dataset(const DatasetSpec& spec);

/// Keeps the true label for a class-stratified fraction alpha of the training
/// split and hides the rest. Each class is ranked once by `rng`, so the
/// labeled sets are nested in alpha.
Dataset mask_labels(const Dataset& dataset, double alpha, Rng rng);

/// Stream used to rank samples for masking; depends only on the dataset seed.
Rng mask_stream(const DatasetSpec& spec);

struct AugmentConfig {
  double noise_std = 0.3;
  double dropout_p = 0.1;

  bool operator==(const AugmentConfig&) const = default;
};

/// x + N(0, noise_std^2), then inverted dropout with rate dropout_p.
std::vector<double> augment(std::span<const double> x, Rng& rng, const AugmentConfig& cfg);

struct ModelConfig {
  std::vector<std::size_t> trunk = {64, 32};
  /// 0 selects the trunk output width.
  std::size_t proj_hidden = 0;
  std::size_t embed = 16;

  EncoderDims dims(std::size_t input_dim) const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double tau = 0.2;
  double momentum = 0.999;
  std::size_t queue_size = 512;
  double label_ratio = 1.0;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double lr = 0.06;
  bool cosine = true;
  double sgd_momentum = 0.9;
  double weight_decay = 5e-4;
  AugmentConfig aug;
  LossKind loss = LossKind::kUniCon;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

/// Throws Error naming the first violated range.
void validate(const TrainConfig& cfg);

/// Learning rate at `step` of `total_steps` (half-cosine decay when enabled).
double learning_rate(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

struct TrainState {
  EncoderParams query;
  EncoderParams key;
  EncoderParams velocity;
  PairQueue queue;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;

  bool operator==(const TrainState&) const = default;
};

/// Query params from init_params on the "init" substream; key params are a
/// copy; the queue holds random unit keys labeled kUnlabeled.
TrainState init_state(const TrainConfig& cfg, const EncoderDims& dims);

struct StepMetrics {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double loss = 0.0;
  double mean_positives = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;

  bool operator==(const StepMetrics&) const = default;
};

/// What one step saw, for callers that check invariants from outside.
struct StepTrace {
  std::uint64_t step = 0;
  const Matrix& logits;  // N x (1+K), already divided by tau
  const std::vector<TargetMask>& targets;
  double loss = 0.0;
};

using StepObserver = std::function<void(const StepTrace&)>;

/// One optimization step. On success the state advances by exactly one step;
/// on a non-finite loss DivergenceError is thrown and `state` is unchanged.
StepMetrics train_step(TrainState& state, const Matrix& inputs, std::span<const int> labels,
                       const TrainConfig& cfg, double lr, std::uint64_t epoch = 0,
                       const StepObserver& observer = {});

std::size_t steps_per_epoch(const TrainConfig& cfg, const Dataset& dataset);

/// Training-split indices of batch `step` (epoch order reshuffled per epoch).
std::vector<std::size_t> batch_indices(const TrainConfig& cfg, const Dataset& dataset,
                                       std::uint64_t seed, std::uint64_t step);

using MetricsSink = std::function<void(const StepMetrics&)>;

/// Runs steps until `state.step == until_step`. Batch order, augmentation and
/// learning rate are pure functions of (seed, step), so a run stopped and
/// resumed from a saved state continues identically.
void run_steps(TrainState& state, const TrainConfig& cfg, const Dataset& masked,
               std::uint64_t until_step, const MetricsSink& sink = {},
               const StepObserver& observer = {});

struct PretrainResult {
  TrainState state;
  std::vector<StepMetrics> metrics;
};

/// Masks labels with cfg.label_ratio and trains for cfg.epochs epochs.
/// `resume` continues from a saved state; `stop_after` caps the step count.
PretrainResult pretrain(const TrainConfig& cfg, const ModelConfig& model, const Dataset& dataset,
                        std::optional<TrainState> resume = std::nullopt,
                        std::optional<std::uint64_t> stop_after = std::nullopt,
                        const StepObserver& observer = {});

std::uint64_t total_steps(const TrainConfig& cfg, const Dataset& dataset);

}  // namespace unimoco
