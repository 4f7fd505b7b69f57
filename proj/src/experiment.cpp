#include "unimoco/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <future>
#include <numeric>

#include "unimoco/error.hpp"
#include "unimoco/eval.hpp"

namespace unimoco {

std::string metrics_row(const StepMetrics& m) {
  return fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}", m.step, m.epoch, m.loss,
                     m.mean_positives, m.grad_norm, m.lr);
}

std::string metrics_csv(const std::vector<StepMetrics>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& m : rows) {
    out += metrics_row(m);
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const ProbeReport& r) {
  return {{"run_id", r.run_id},
          {"loss", std::string(to_string(r.loss))},
          {"label_ratio", r.label_ratio},
          {"linear_top1", r.linear_top1},
          {"knn_top1", r.knn_top1},
          {"seeds", {{"train", r.train_seed}, {"dataset", r.dataset_seed}}}};
}

ProbeReport probe(const Checkpoint& ckpt, const Dataset& dataset) {
  const auto& cfg = ckpt.config;
  const Matrix train_f = extract_features(ckpt.state.query, dataset.train_inputs);
  const Matrix test_f = extract_features(ckpt.state.query, dataset.test_inputs);
  ProbeReport r;
  r.run_id = run_id(cfg);
  r.loss = cfg.train.loss;
  r.label_ratio = cfg.train.label_ratio;
  r.train_seed = cfg.train.seed;
  r.dataset_seed = dataset.spec.seed;
  // Probes always see the true labels of the training split.
  r.linear_top1 = linear_probe(train_f, dataset.train_true, test_f, dataset.test_labels, cfg.probe,
                               cfg.train.seed);
  r.knn_top1 = knn_probe(train_f, dataset.train_true, test_f, dataset.test_labels,
                         std::min(cfg.probe.knn_k, train_f.rows()));
  return r;
}

PretrainArtifacts run_pretrain(const ExperimentConfig& cfg, const Dataset& dataset,
                               const std::string& out_dir,
                               const std::optional<std::string>& resume,
                               std::optional<std::uint64_t> stop_after) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  PretrainArtifacts art;
  art.checkpoint_path = (fs::path(out_dir) / "checkpoint.umc").string();
  art.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  art.manifest_path = (fs::path(out_dir) / "manifest.json").string();

  std::optional<TrainState> start;
  std::string metrics_text(kMetricsHeader);
  metrics_text += '\n';
  if (resume) {
    Checkpoint ckpt = load_checkpoint(*resume);
    if (config_digest(ckpt.config) != config_digest(cfg)) {
      throw Error("checkpoint was written under a different config");
    }
    if (fs::exists(art.metrics_path)) {
      // Keep only rows from steps the checkpoint already covers.
      const std::string old = read_file(art.metrics_path);
      std::size_t pos = old.find('\n');
      std::uint64_t kept = 0;
      while (pos != std::string::npos && kept < ckpt.state.step) {
        const auto next = old.find('\n', pos + 1);
        if (next == std::string::npos) break;
        metrics_text.append(old, pos + 1, next - pos);
        pos = next;
        ++kept;
      }
    }
    start = std::move(ckpt.state);
  }

  const Dataset masked = mask_labels(dataset, cfg.train.label_ratio, mask_stream(dataset.spec));
  TrainState state = start ? std::move(*start)
                           : init_state(cfg.train, cfg.model.dims(dataset.spec.input_dim));
  const std::uint64_t first = state.step;
  std::uint64_t until = total_steps(cfg.train, dataset);
  if (stop_after) until = std::min(until, *stop_after);
  until = std::max(until, state.step);

  auto write_outputs = [&] {
    write_file_atomic(art.metrics_path, metrics_text);
    save_checkpoint(art.checkpoint_path, Checkpoint{cfg, state});
    nlohmann::json manifest = {
        {"run_id", run_id(cfg)},
        {"config_digest", config_digest(cfg)},
        {"config", to_json(cfg)},
        {"tool_version", std::string(kToolVersion)},
        {"step", state.step},
        {"total_steps", total_steps(cfg.train, dataset)},
        {"files",
         {{"checkpoint", art.checkpoint_path},
          {"metrics", art.metrics_path},
          {"manifest", art.manifest_path}}},
    };
    write_file_atomic(art.manifest_path, manifest.dump(2) + "\n");
  };

  try {
    run_steps(state, cfg.train, masked, until, [&](const StepMetrics& m) {
      metrics_text += metrics_row(m);
      metrics_text += '\n';
    });
  } catch (const DivergenceError&) {
    // The state still holds the last good step.
    art.steps_run = state.step - first;
    write_outputs();
    throw;
  }
  art.steps_run = state.step - first;
  write_outputs();
  return art;
}

double CompareCell::mean_linear() const {
  return linear_top1.empty() ? 0.0
                             : std::accumulate(linear_top1.begin(), linear_top1.end(), 0.0) /
                                   static_cast<double>(linear_top1.size());
}

double CompareCell::mean_knn() const {
  return knn_top1.empty() ? 0.0
                          : std::accumulate(knn_top1.begin(), knn_top1.end(), 0.0) /
                                static_cast<double>(knn_top1.size());
}

const CompareCell& CompareResult::cell(LossKind loss, double alpha) const {
  for (const auto& c : cells) {
    if (c.loss == loss && c.alpha == alpha) return c;
  }
  throw Error("no such compare cell");
}

CompareResult run_compare(const ExperimentConfig& cfg, const Dataset& dataset,
                          std::vector<double> alphas, std::vector<LossKind> losses,
                          std::size_t n_seeds, std::size_t jobs) {
  if (losses.empty()) throw Error("compare needs at least one loss");
  if (n_seeds == 0) throw Error("compare needs at least one seed");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw Error("label ratio must lie in [0, 1]");
  }
  if (std::find(alphas.begin(), alphas.end(), 0.0) == alphas.end()) alphas.push_back(0.0);
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  CompareResult result;
  result.losses = losses;
  result.alphas = alphas;
  for (std::size_t s = 0; s < n_seeds; ++s) result.seeds.push_back(cfg.train.seed + s);

  struct Job {
    std::size_t cell;
    std::size_t seed_index;
  };
  std::vector<Job> work;
  for (auto loss : losses) {
    for (double a : alphas) {
      result.cells.push_back({loss, a, std::vector<double>(n_seeds), std::vector<double>(n_seeds)});
      for (std::size_t s = 0; s < n_seeds; ++s) work.push_back({result.cells.size() - 1, s});
    }
  }

  auto run_one = [&](const Job& job) {
    auto& cell = result.cells[job.cell];
    ExperimentConfig c = cfg;
    c.train.loss = cell.loss;
    c.train.label_ratio = cell.alpha;
    c.train.seed = result.seeds[job.seed_index];
    auto trained = pretrain(c.train, c.model, dataset);
    const auto report = probe(Checkpoint{c, std::move(trained.state)}, dataset);
    // Each job owns a distinct slot, so writes never alias.
    cell.linear_top1[job.seed_index] = report.linear_top1;
    cell.knn_top1[job.seed_index] = report.knn_top1;
  };

  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < work.size(); start += jobs) {
    std::vector<std::future<void>> running;
    for (std::size_t i = start; i < std::min(work.size(), start + jobs); ++i) {
      running.push_back(std::async(std::launch::async, run_one, work[i]));
    }
    for (auto& f : running) f.get();
  }
  return result;
}

std::string compare_csv(const CompareResult& r) {
  std::string out = "loss";
  for (double a : r.alphas) out += fmt::format(",alpha={:g}", a);
  out += '\n';
  for (auto loss : r.losses) {
    out += to_string(loss);
    for (double a : r.alphas) out += fmt::format(",{:.6f}", r.cell(loss, a).mean_linear());
    out += '\n';
  }
  return out;
}

std::string compare_text(const CompareResult& r) {
  std::size_t width = 10;
  for (auto loss : r.losses) width = std::max(width, to_string(loss).size() + 2);
  std::string out = fmt::format("{:<{}}", "loss", width);
  for (double a : r.alphas) out += fmt::format("{:>12}", fmt::format("alpha={:g}", a));
  out += '\n';
  for (auto loss : r.losses) {
    out += fmt::format("{:<{}}", to_string(loss), width);
    for (double a : r.alphas) out += fmt::format("{:>12.4f}", r.cell(loss, a).mean_linear());
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const CompareResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"loss", std::string(to_string(c.loss))},
                     {"alpha", c.alpha},
                     {"linear_top1", c.linear_top1},
                     {"knn_top1", c.knn_top1},
                     {"mean_linear_top1", c.mean_linear()},
                     {"mean_knn_top1", c.mean_knn()}});
  }
  nlohmann::json losses = nlohmann::json::array();
  for (auto l : r.losses) losses.push_back(std::string(to_string(l)));
  return {{"losses", losses}, {"alphas", r.alphas}, {"seeds", r.seeds}, {"cells", cells}};
}

}  // namespace unimoco
