#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unimoco/checkpoint.hpp"
#include "unimoco/config.hpp"

namespace unimoco {

inline constexpr std::string_view kMetricsHeader = "step,epoch,loss,mean_positives,grad_norm,lr";

std::string metrics_row(const StepMetrics& m);
std::string metrics_csv(const std::vector<StepMetrics>& rows);

struct ProbeReport {
  std::string run_id;
  LossKind loss = LossKind::kUniCon;
  double label_ratio = 0.0;
  double linear_top1 = 0.0;
  double knn_top1 = 0.0;
  std::uint64_t train_seed = 0;
  std::uint64_t dataset_seed = 0;
};

nlohmann::json to_json(const ProbeReport& r);

/// Linear and kNN probes on frozen trunk features of the query encoder.
ProbeReport probe(const Checkpoint& ckpt, const Dataset& dataset);

struct PretrainArtifacts {
  std::string checkpoint_path;
  std::string metrics_path;
  std::string manifest_path;
  std::uint64_t steps_run = 0;
};

/// Pretrains into `out_dir` (checkpoint.umc, metrics.csv, manifest.json).
/// With `resume`, continues from that checkpoint and appends to the metrics
/// already in out_dir. On divergence the metrics gathered so far are written
/// before DivergenceError propagates.
PretrainArtifacts run_pretrain(const ExperimentConfig& cfg, const Dataset& dataset,
                               const std::string& out_dir,
                               const std::optional<std::string>& resume = std::nullopt,
                               std::optional<std::uint64_t> stop_after = std::nullopt);

struct CompareCell {
  LossKind loss;
  double alpha;
  std::vector<double> linear_top1;  // one per seed
  std::vector<double> knn_top1;
  double mean_linear() const;
  double mean_knn() const;
};

struct CompareResult {
  std::vector<LossKind> losses;
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
  std::vector<CompareCell> cells;  // loss-major

  const CompareCell& cell(LossKind loss, double alpha) const;
};

/// Pretrains and probes every (loss, alpha, seed) combination. alpha = 0 is
/// always added so each table carries the single-positive column. Seeds are
/// cfg.train.seed, cfg.train.seed + 1, ...
CompareResult run_compare(const ExperimentConfig& cfg, const Dataset& dataset,
                          std::vector<double> alphas, std::vector<LossKind> losses,
                          std::size_t n_seeds, std::size_t jobs = 1);

std::string compare_csv(const CompareResult& r);
std::string compare_text(const CompareResult& r);
nlohmann::json to_json(const CompareResult& r);

}  // namespace unimoco
