// Command-line front end: dataset generation, pretraining, probing, the loss
// property suite and label-ratio / loss-family sweeps.

#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "unimoco/checkpoint.hpp"
#include "unimoco/config.hpp"
#include "unimoco/error.hpp"
#include "unimoco/experiment.hpp"
#include "unimoco/losscheck.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

template <typename T>
std::vector<T> split_list(const std::string& text, T (*convert)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(convert(item));
  }
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw unimoco::ConfigError({"bad number '" + s + "'"});
  return v;
}

unimoco::LossKind to_loss(const std::string& s) {
  try {
    return unimoco::parse_loss_kind(s);
  } catch (const unimoco::Error& e) {
    throw unimoco::ConfigError({e.what()});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive representation learning with label and feature queues"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(unimoco::kToolVersion));

  std::string spec_path, out_path;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "Dataset spec or full config (JSON)")->required();
  gen->add_option("--out", out_path, "Output dataset file")->required();

  std::string config_path, data_path, out_dir, resume_path;
  std::uint64_t stop_after = 0;
  auto* pre = app.add_subcommand("pretrain", "Pretrain an encoder");
  pre->add_option("--config", config_path, "Experiment config (JSON)")->required();
  pre->add_option("--data", data_path, "Dataset file")->required();
  pre->add_option("--out-dir", out_dir, "Directory for checkpoint, metrics and manifest")
      ->required();
  pre->add_option("--resume", resume_path, "Continue from this checkpoint");
  pre->add_option("--stop-after", stop_after, "Stop once this many total steps have run");

  std::string ckpt_path;
  auto* prb = app.add_subcommand("probe", "Linear and kNN probes on frozen features");
  prb->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  prb->add_option("--data", data_path, "Dataset file")->required();
  prb->add_option("--out", out_path, "Report file (JSON); appended to when it exists")->required();

  unimoco::LossCheckOptions lc;
  auto* chk = app.add_subcommand("losscheck", "Run the loss property and gradient suite");
  chk->add_option("--trials", lc.trials, "Random instances per property")->check(CLI::PositiveNumber);
  chk->add_option("--width", lc.width, "Logits row width (1 + K)")->check(CLI::Range(2, 1 << 20));
  chk->add_option("--seed", lc.seed, "Random seed");

  std::string alphas_text = "0,0.5,1", losses_text = "unicon,supcon_in,supcon_out";
  std::size_t seeds = 5, jobs = 1;
  auto* cmp = app.add_subcommand("compare", "Sweep label ratios and loss kinds");
  cmp->add_option("--config", config_path, "Experiment config (JSON)")->required();
  cmp->add_option("--data", data_path, "Dataset file")->required();
  cmp->add_option("--alphas", alphas_text, "Comma-separated label ratios");
  cmp->add_option("--losses", losses_text, "Comma-separated loss kinds");
  cmp->add_option("--seeds", seeds, "Seeds per cell")->check(CLI::PositiveNumber);
  cmp->add_option("--jobs", jobs, "Cells run concurrently")->check(CLI::PositiveNumber);
  cmp->add_option("--out-dir", out_dir, "Write compare.csv, compare.json and compare.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      const auto text = unimoco::read_file(spec_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw unimoco::ConfigError({spec_path + ": " + e.what()});
      }
      const auto dataset = unimoco::generate_dataset(unimoco::parse_dataset_spec(doc));
      unimoco::save_dataset(out_path, dataset);
      fmt::print("wrote {} ({} train, {} test, {} classes)\n", out_path,
                 dataset.train_inputs.rows(), dataset.test_inputs.rows(), dataset.spec.n_classes);
    } else if (*pre) {
      const auto cfg = unimoco::load_config(config_path);
      const auto dataset = unimoco::load_dataset(data_path);
      std::optional<std::string> resume;
      if (!resume_path.empty()) resume = resume_path;
      std::optional<std::uint64_t> stop;
      if (pre->count("--stop-after") > 0) stop = stop_after;
      const auto art = unimoco::run_pretrain(cfg, dataset, out_dir, resume, stop);
      fmt::print("run {}: {} steps\n  checkpoint {}\n  metrics    {}\n  manifest   {}\n",
                 unimoco::run_id(cfg), art.steps_run, art.checkpoint_path, art.metrics_path,
                 art.manifest_path);
    } else if (*prb) {
      const auto ckpt = unimoco::load_checkpoint(ckpt_path);
      const auto dataset = unimoco::load_dataset(data_path);
      const auto report = unimoco::probe(ckpt, dataset);
      nlohmann::json doc = nlohmann::json::array();
      if (std::filesystem::exists(out_path)) {
        doc = nlohmann::json::parse(unimoco::read_file(out_path));
        if (!doc.is_array()) throw unimoco::Error(out_path + ": expected a JSON array");
      }
      doc.push_back(unimoco::to_json(report));
      unimoco::write_file_atomic(out_path, doc.dump(2) + "\n");
      fmt::print("linear top-1 {:.4f}  knn top-1 {:.4f}\n", report.linear_top1, report.knn_top1);
    } else if (*chk) {
      const auto rows = unimoco::run_losscheck(lc);
      fmt::print("{}", unimoco::losscheck_table(rows));
      const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; });
      return ok ? kExitOk : kExitFailure;
    } else if (*cmp) {
      const auto cfg = unimoco::load_config(config_path);
      const auto dataset = unimoco::load_dataset(data_path);
      const auto alphas = split_list<double>(alphas_text, to_double);
      const auto losses = split_list<unimoco::LossKind>(losses_text, to_loss);
      const auto result = unimoco::run_compare(cfg, dataset, alphas, losses, seeds, jobs);
      const auto text = unimoco::compare_text(result);
      fmt::print("{}", text);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        unimoco::write_file_atomic((dir / "compare.csv").string(), unimoco::compare_csv(result));
        unimoco::write_file_atomic((dir / "compare.txt").string(), text);
        unimoco::write_file_atomic((dir / "compare.json").string(),
                                   unimoco::to_json(result).dump(2) + "\n");
      }
    }
  } catch (const unimoco::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const unimoco::DivergenceError& e) {
    std::cerr << "divergence at step " << e.step() << "; partial metrics kept\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
