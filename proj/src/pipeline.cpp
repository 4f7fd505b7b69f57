#include "unimoco/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "unimoco/error.hpp"

namespace unimoco {
namespace {

void fill_split(const DatasetSpec& spec, const Matrix& means, std::size_t n, Rng rng,
                Matrix& inputs, std::vector<int>& labels) {
  inputs = Matrix(n, spec.input_dim);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % spec.n_classes;
    labels[i] = static_cast<int>(c);
    auto row = inputs.row(i);
    const auto mean = means.row(c);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = mean[j] + spec.cluster_spread * rng.normal();
    }
  }
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.n_classes < 2) throw Error("dataset needs at least 2 classes");
  if (spec.input_dim < 2) throw Error("dataset needs input_dim >= 2");
  if (spec.n_train < spec.n_classes || spec.n_test < spec.n_classes) {
    throw Error("each split needs at least one sample per class");
  }
  if (!(spec.cluster_spread >= 0.0) || !(spec.mean_radius > 0.0)) {
    throw Error("invalid cluster geometry");
  }
  const Rng root(spec.seed);
  Rng mean_rng = root.substream("means");
  Matrix means(spec.n_classes, spec.input_dim);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    auto row = means.row(c);
    double n = 0.0;
    do {
      for (double& v : row) v = mean_rng.normal();
      n = l2_norm(row);
    } while (n <= 1e-12);
    for (double& v : row) v *= spec.mean_radius / n;
  }

  Dataset d;
  d.spec = spec;
  fill_split(spec, means, spec.n_train, root.substream("train"), d.train_inputs, d.train_true);
  fill_split(spec, means, spec.n_test, root.substream("test"), d.test_inputs, d.test_labels);
  d.train_labels = d.train_true;
  return d;
}

Rng mask_stream(const DatasetSpec& spec) { return Rng(spec.seed).substream("mask"); }

Dataset mask_labels(const Dataset& dataset, double alpha, Rng rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("label ratio must lie in [0, 1]");
  Dataset out = dataset;
  std::fill(out.train_labels.begin(), out.train_labels.end(), kUnlabeled);
  const auto n_classes = dataset.spec.n_classes;
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < dataset.train_true.size(); ++i) {
    const auto c = static_cast<std::size_t>(dataset.train_true[i]);
    if (c >= n_classes) throw Error("true label out of range");
    members[c].push_back(i);
  }
  for (auto& idx : members) {
    // Ranking depends on the stream only, never on alpha, which nests the
    // labeled subsets.
    const auto order = permutation(idx.size(), rng);
    const auto keep = static_cast<std::size_t>(
        std::floor(alpha * static_cast<double>(idx.size()) + 0.5));
    for (std::size_t r = 0; r < keep; ++r) {
      const auto i = idx[order[r]];
      out.train_labels[i] = dataset.train_true[i];
    }
  }
  return out;
}

std::vector<double> augment(std::span<const double> x, Rng& rng, const AugmentConfig& cfg) {
  if (!(cfg.noise_std >= 0.0) || !(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0)) {
    throw Error("invalid augmentation config");
  }
  std::vector<double> out(x.begin(), x.end());
  if (cfg.noise_std > 0.0) {
    for (double& v : out) v += cfg.noise_std * rng.normal();
  }
  if (cfg.dropout_p > 0.0) {
    const double scale = 1.0 / (1.0 - cfg.dropout_p);
    for (double& v : out) v = rng.uniform() < cfg.dropout_p ? 0.0 : v * scale;
  }
  return out;
}

EncoderDims ModelConfig::dims(std::size_t input_dim) const {
  EncoderDims d;
  d.input = input_dim;
  d.trunk = trunk;
  d.proj_hidden = proj_hidden != 0 ? proj_hidden : (trunk.empty() ? 0 : trunk.back());
  d.embed = embed;
  return d;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw Error("tau must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum <= 1.0)) throw Error("momentum must lie in [0, 1]");
  if (!(cfg.label_ratio >= 0.0 && cfg.label_ratio <= 1.0)) {
    throw Error("label_ratio must lie in [0, 1]");
  }
  if (cfg.batch_size == 0) throw Error("batch_size must be positive");
  if (cfg.queue_size < cfg.batch_size) throw Error("queue_size must be >= batch_size");
  if (!(cfg.lr > 0.0)) throw Error("lr must be positive");
  if (!(cfg.sgd_momentum >= 0.0 && cfg.sgd_momentum < 1.0)) {
    throw Error("sgd_momentum must lie in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0)) throw Error("weight_decay must be non-negative");
  if (!(cfg.aug.noise_std >= 0.0)) throw Error("noise_std must be non-negative");
  if (!(cfg.aug.dropout_p >= 0.0 && cfg.aug.dropout_p < 1.0)) {
    throw Error("dropout_p must lie in [0, 1)");
  }
}

double learning_rate(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  if (!cfg.cosine || total_steps == 0) return cfg.lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

TrainState init_state(const TrainConfig& cfg, const EncoderDims& dims) {
  validate(cfg);
  const Rng root(cfg.seed);
  Rng init = root.substream("init");
  EncoderParams query = init_params(dims, init);
  Rng queue_rng = root.substream("queue");
  PairQueue queue(cfg.queue_size, dims.embed, queue_rng);
  TrainState state{query, query, query.zeros_like(), std::move(queue), 0, cfg.seed};
  return state;
}

StepMetrics train_step(TrainState& state, const Matrix& inputs, std::span<const int> labels,
                       const TrainConfig& cfg, double lr, std::uint64_t epoch,
                       const StepObserver& observer) {
  const std::size_t n = inputs.rows();
  if (n == 0 || n != labels.size()) throw Error("batch inputs and labels differ");
  if (n > state.queue.capacity()) throw Error("batch larger than queue");

  // Two independent views per sample, keyed by (step, sample, view).
  const Rng aug_root = Rng(state.seed).substream("aug").substream(state.step);
  Matrix query_view(n, inputs.cols());
  Matrix key_view(n, inputs.cols());
  for (std::size_t i = 0; i < n; ++i) {
    Rng rq = aug_root.substream(2 * i);
    Rng rk = aug_root.substream(2 * i + 1);
    std::ranges::copy(augment(inputs.row(i), rq, cfg.aug), query_view.row(i).begin());
    std::ranges::copy(augment(inputs.row(i), rk, cfg.aug), key_view.row(i).begin());
  }

  ForwardResult fwd;
  Matrix k;
  try {
    fwd = forward(state.query, query_view);
    k = embed(state.key, key_view);  // no gradient path
  } catch (const DegenerateVectorError&) {
    throw DivergenceError(state.step);
  }
  const Matrix& q = fwd.embeddings;

  const auto& queue_feats = state.queue.features();
  const std::size_t kq = state.queue.capacity();
  Matrix logits(n, 1 + kq);
  for (std::size_t i = 0; i < n; ++i) {
    const auto qi = q.row(i);
    auto row = logits.row(i);
    row[0] = dot(qi, k.row(i)) / cfg.tau;
    for (std::size_t j = 0; j < kq; ++j) row[1 + j] = dot(qi, queue_feats.row(j)) / cfg.tau;
  }
  if (!all_finite(logits.values())) throw DivergenceError(state.step);
  auto targets = build_target(labels, state.queue);
  if (cfg.loss == LossKind::kInfoNCE) {
    // Plain MoCo: only the augmented key is positive.
    for (auto& t : targets) std::fill(t.begin() + 1, t.end(), std::uint8_t{0});
  }

  double loss = 0.0;
  double positives = 0.0;
  Matrix grad_q(n, q.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto eval = evaluate(cfg.loss, logits.row(i), targets[i]);
    loss += eval.value;
    positives += static_cast<double>(std::count(targets[i].begin(), targets[i].end(), 1));
    // d logit_ij / d q_i = key_j / tau.
    auto gq = grad_q.row(i);
    const double scale = inv_n / cfg.tau;
    const auto ki = k.row(i);
    for (std::size_t c = 0; c < gq.size(); ++c) gq[c] += scale * eval.grad[0] * ki[c];
    for (std::size_t j = 0; j < kq; ++j) {
      const double g = eval.grad[1 + j];
      if (g == 0.0) continue;
      const auto kj = queue_feats.row(j);
      for (std::size_t c = 0; c < gq.size(); ++c) gq[c] += scale * g * kj[c];
    }
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw DivergenceError(state.step);
  if (observer) observer(StepTrace{state.step, logits, targets, loss});

  const EncoderParams grads = backward(state.query, fwd.tape, grad_q);
  const double grad_norm = grads.l2_norm();

  EncoderParams velocity = state.velocity;
  EncoderParams query = state.query;
  {
    // v <- mu v + g + wd p ; p <- p - lr v
    EncoderParams g_total = grads;
    zip_params(g_total, query, [&](double& g, double p) { g += cfg.weight_decay * p; });
    zip_params(velocity, g_total, [&](double& v, double g) { v = cfg.sgd_momentum * v + g; });
    zip_params(query, velocity, [lr](double& p, double v) { p -= lr * v; });
  }
  if (!std::isfinite(grad_norm) || !query.all_finite()) throw DivergenceError(state.step);
  EncoderParams key = momentum_update(state.key, query, cfg.momentum);

  PairQueue queue = state.queue;
  queue.push_batch(k, labels);

  StepMetrics m{state.step, epoch, loss, positives * inv_n, grad_norm, lr};
  state.query = std::move(query);
  state.key = std::move(key);
  state.velocity = std::move(velocity);
  state.queue = std::move(queue);
  ++state.step;
  return m;
}

std::size_t steps_per_epoch(const TrainConfig& cfg, const Dataset& dataset) {
  return cfg.batch_size == 0 ? 0 : dataset.train_inputs.rows() / cfg.batch_size;
}

std::uint64_t total_steps(const TrainConfig& cfg, const Dataset& dataset) {
  return static_cast<std::uint64_t>(cfg.epochs) * steps_per_epoch(cfg, dataset);
}

std::vector<std::size_t> batch_indices(const TrainConfig& cfg, const Dataset& dataset,
                                       std::uint64_t seed, std::uint64_t step) {
  const auto per_epoch = steps_per_epoch(cfg, dataset);
  if (per_epoch == 0) throw Error("training split smaller than one batch");
  const std::uint64_t epoch = step / per_epoch;
  const std::uint64_t b = step % per_epoch;
  Rng shuffle = Rng(seed).substream("shuffle").substream(epoch);
  const auto order = permutation(dataset.train_inputs.rows(), shuffle);
  return {order.begin() + static_cast<std::ptrdiff_t>(b * cfg.batch_size),
          order.begin() + static_cast<std::ptrdiff_t>((b + 1) * cfg.batch_size)};
}

void run_steps(TrainState& state, const TrainConfig& cfg, const Dataset& masked,
               std::uint64_t until_step, const MetricsSink& sink, const StepObserver& observer) {
  validate(cfg);
  const auto per_epoch = steps_per_epoch(cfg, masked);
  if (per_epoch == 0 && until_step > state.step) {
    throw Error("training split smaller than one batch");
  }
  const auto total = total_steps(cfg, masked);
  const std::size_t d = masked.train_inputs.cols();
  while (state.step < until_step) {
    const std::uint64_t epoch = state.step / per_epoch;
    const auto idx = batch_indices(cfg, masked, state.seed, state.step);
    Matrix x(cfg.batch_size, d);
    std::vector<int> y(cfg.batch_size);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::ranges::copy(masked.train_inputs.row(idx[i]), x.row(i).begin());
      y[i] = masked.train_labels[idx[i]];
    }
    const double lr = learning_rate(cfg, state.step, total);
    const auto m = train_step(state, x, y, cfg, lr, epoch, observer);
    if (sink) sink(m);
  }
}

PretrainResult pretrain(const TrainConfig& cfg, const ModelConfig& model, const Dataset& dataset,
                        std::optional<TrainState> resume, std::optional<std::uint64_t> stop_after,
                        const StepObserver& observer) {
  validate(cfg);
  const Dataset masked = mask_labels(dataset, cfg.label_ratio, mask_stream(dataset.spec));
  PretrainResult result{
      resume ? std::move(*resume) : init_state(cfg, model.dims(dataset.spec.input_dim)), {}};
  std::uint64_t until = total_steps(cfg, dataset);
  if (stop_after) until = std::min(until, *stop_after);
  run_steps(result.state, cfg, masked, until,
            [&result](const StepMetrics& m) { result.metrics.push_back(m); }, observer);
  return result;
}

}  // namespace unimoco
