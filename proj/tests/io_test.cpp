#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "unimoco/checkpoint.hpp"
#include "unimoco/config.hpp"
#include "unimoco/container.hpp"
#include "unimoco/error.hpp"
#include "unimoco/experiment.hpp"

namespace unimoco {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("unimoco_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_config() {
  return parse_config_text(R"({
    "dataset": {"n_train": 240, "n_test": 60, "input_dim": 6, "mean_radius": 3.0, "seed": 2},
    "model": {"trunk": [32, 16], "embed": 8},
    "train": {"queue_size": 48, "batch_size": 16, "epochs": 2, "momentum": 0.99, "seed": 5},
    "probe": {"epochs": 5}
  })");
}

TEST(Config, DefaultsWhenSectionsMissing) {
  const auto cfg = parse_config_text("{}");
  EXPECT_EQ(cfg, ExperimentConfig{});
  EXPECT_EQ(parse_config(to_json(cfg)), cfg);
}

TEST(Config, RoundTripsThroughJson) {
  const auto cfg = tiny_config();
  EXPECT_EQ(parse_config(to_json(cfg)), cfg);
  EXPECT_EQ(cfg.train.queue_size, 48u);
  EXPECT_EQ(cfg.model.trunk, (std::vector<std::size_t>{32, 16}));
}

TEST(Config, UnknownKeysAndBadValuesAreItemized) {
  try {
    parse_config_text(R"({"train": {"tua": 0.1, "lr": "fast", "aug": {"blur": 1}},
                          "extra": {}})");
    FAIL();
  } catch (const ConfigError& e) {
    const auto& items = e.items();
    ASSERT_EQ(items.size(), 4u);
    auto has = [&](const std::string& s) {
      return std::any_of(items.begin(), items.end(),
                         [&](const std::string& i) { return i.find(s) != std::string::npos; });
    };
    EXPECT_TRUE(has("train.tua"));
    EXPECT_TRUE(has("train.lr"));
    EXPECT_TRUE(has("train.aug.blur"));
    EXPECT_TRUE(has("extra"));
  }
}

TEST(Config, RangeViolationsAreConfigErrors) {
  EXPECT_THROW(parse_config_text(R"({"train": {"tau": 0}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"train": {"loss": "triplet"}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"train": {"queue_size": 8, "batch_size": 16}})"), ConfigError);
  EXPECT_THROW(parse_config_text("[1, 2"), ConfigError);
}

TEST(Config, DigestIgnoresKeyOrder) {
  const auto a = parse_config_text(R"({"train": {"tau": 0.1, "lr": 0.2}, "dataset": {"seed": 4}})");
  const auto b = parse_config_text(R"({"dataset": {"seed": 4}, "train": {"lr": 0.2, "tau": 0.1}})");
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
  const auto c = parse_config_text(R"({"train": {"tau": 0.11, "lr": 0.2}, "dataset": {"seed": 4}})");
  EXPECT_NE(config_digest(a), config_digest(c));
  EXPECT_EQ(run_id(a), "0-" + config_digest(a));
}

TEST(Config, DatasetSpecFromBareOrFullDocument) {
  const auto bare = parse_dataset_spec(nlohmann::json::parse(R"({"n_classes": 3, "seed": 9})"));
  const auto full =
      parse_dataset_spec(nlohmann::json::parse(R"({"dataset": {"n_classes": 3, "seed": 9}})"));
  EXPECT_EQ(bare, full);
  EXPECT_EQ(bare.n_classes, 3u);
}

TEST(Container, EncodeDecodeRoundTrip) {
  Container c;
  c.header = {{"kind", "test"}};
  c.arrays.push_back({"a", {2, 2}, {1.0, -0.0, 1e-300, 3.5}});
  c.arrays.push_back({"b", {3}, {NAN, INFINITY, 7.0}});
  const auto bytes = encode_container(c);
  EXPECT_EQ(bytes.substr(0, 4), "UMC1");
  const auto d = decode_container(bytes);
  EXPECT_EQ(encode_container(d), bytes);
  EXPECT_EQ(d.get("a").shape, (std::vector<std::size_t>{2, 2}));
  EXPECT_NE(bytes.find("\"format_version\":1"), std::string::npos);
  EXPECT_EQ(d.header, c.header);
  EXPECT_THROW(d.get("missing"), FormatError);
}

TEST(Container, RejectsDamage) {
  Container c;
  c.header = {{"kind", "test"}};
  c.arrays.push_back({"a", {4}, {1, 2, 3, 4}});
  const auto bytes = encode_container(c);

  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_container(magic), FormatError);
  EXPECT_THROW(decode_container(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_container(bytes.substr(0, 6)), FormatError);
  EXPECT_THROW(decode_container(bytes + "x"), FormatError);

  auto header = nlohmann::json::parse(bytes.substr(8, bytes.size() - 8 - 32));
  header["format_version"] = 2;
  Container bumped;
  bumped.header = {{"kind", "test"}};
  const std::string h = header.dump();
  std::string v2 = "UMC1";
  const auto len = static_cast<std::uint32_t>(h.size());
  for (int i = 0; i < 4; ++i) v2.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  v2 += h + bytes.substr(bytes.size() - 32);
  EXPECT_THROW(decode_container(v2), FormatError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto dir = scratch("ckpt");
  const auto cfg = tiny_config();
  const auto data = generate_dataset(cfg.dataset);
  const auto r = pretrain(cfg.train, cfg.model, data, std::nullopt, 7);
  const Checkpoint ckpt{cfg, r.state};
  const auto p1 = (dir / "a.umc").string();
  const auto p2 = (dir / "b.umc").string();
  save_checkpoint(p1, ckpt);
  const auto loaded = load_checkpoint(p1);
  EXPECT_EQ(loaded.state, r.state);
  EXPECT_EQ(loaded.config, cfg);
  save_checkpoint(p2, loaded);
  EXPECT_EQ(read_file(p1), read_file(p2));
}

TEST(Checkpoint, CorruptedFilesFailToLoad) {
  const auto dir = scratch("corrupt");
  const auto cfg = tiny_config();
  const auto path = (dir / "c.umc").string();
  save_checkpoint(path, Checkpoint{cfg, init_state(cfg.train, cfg.model.dims(6))});
  const auto bytes = read_file(path);

  std::string bad = bytes;
  bad[1] = 'Z';
  write_file_atomic(path, bad);
  EXPECT_THROW(load_checkpoint(path), FormatError);
  write_file_atomic(path, bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(path), FormatError);
  EXPECT_THROW(load_checkpoint((dir / "absent.umc").string()), Error);
}

TEST(Dataset, FileIsByteIdenticalPerSeed) {
  const auto dir = scratch("data");
  const auto spec = tiny_config().dataset;
  const auto a = (dir / "a.umc").string();
  const auto b = (dir / "b.umc").string();
  save_dataset(a, generate_dataset(spec));
  save_dataset(b, generate_dataset(spec));
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(load_dataset(a), generate_dataset(spec));
}

TEST(AtomicWrite, NoTemporaryLeftBehind) {
  const auto dir = scratch("atomic");
  const auto path = (dir / "f.txt").string();
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  EXPECT_EQ(read_file(path), "two");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
}

TEST(RunPretrain, WritesArtifactsAndResumesExactly) {
  const auto cfg = tiny_config();
  const auto data = generate_dataset(cfg.dataset);
  const auto full_dir = scratch("full");
  const auto part_dir = scratch("part");

  const auto full = run_pretrain(cfg, data, full_dir.string());
  EXPECT_EQ(full.steps_run, 30u);
  run_pretrain(cfg, data, part_dir.string(), std::nullopt, 11);
  const auto resumed = run_pretrain(cfg, data, part_dir.string(),
                                    (part_dir / "checkpoint.umc").string());
  EXPECT_EQ(resumed.steps_run, 19u);

  EXPECT_EQ(read_file(full.metrics_path), read_file(resumed.metrics_path));
  EXPECT_EQ(read_file(full.checkpoint_path), read_file(resumed.checkpoint_path));
  const auto csv = read_file(full.metrics_path);
  EXPECT_EQ(csv.substr(0, kMetricsHeader.size()), kMetricsHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);

  const auto manifest = nlohmann::json::parse(read_file(full.manifest_path));
  EXPECT_EQ(manifest["run_id"], run_id(cfg));
  EXPECT_EQ(manifest["tool_version"], std::string(kToolVersion));
}

TEST(RunPretrain, ResumeRejectsDifferentConfig) {
  const auto cfg = tiny_config();
  const auto data = generate_dataset(cfg.dataset);
  const auto dir = scratch("mismatch");
  run_pretrain(cfg, data, dir.string(), std::nullopt, 5);
  auto other = cfg;
  other.train.lr = 0.01;
  EXPECT_THROW(run_pretrain(other, data, dir.string(), (dir / "checkpoint.umc").string()), Error);
}

TEST(RunPretrain, ZeroEpochsGivesSeededInit) {
  auto cfg = tiny_config();
  cfg.train.epochs = 0;
  const auto data = generate_dataset(cfg.dataset);
  const auto dir = scratch("zero");
  const auto art = run_pretrain(cfg, data, dir.string());
  const auto ckpt = load_checkpoint(art.checkpoint_path);
  Rng init = Rng(cfg.train.seed).substream("init");
  EXPECT_EQ(ckpt.state.query, init_params(cfg.model.dims(6), init));
}

TEST(Probe, ReportCarriesRunIdentity) {
  const auto cfg = tiny_config();
  const auto data = generate_dataset(cfg.dataset);
  const auto r = pretrain(cfg.train, cfg.model, data);
  const auto report = probe(Checkpoint{cfg, r.state}, data);
  EXPECT_EQ(report.run_id, run_id(cfg));
  EXPECT_EQ(report.train_seed, 5u);
  EXPECT_EQ(report.dataset_seed, 2u);
  EXPECT_GE(report.linear_top1, 0.0);
  EXPECT_LE(report.linear_top1, 1.0);
  const auto j = to_json(report);
  EXPECT_EQ(j["loss"], "unicon");
}

TEST(Compare, AlwaysIncludesAlphaZeroAndIsDeterministic) {
  auto cfg = tiny_config();
  cfg.train.epochs = 1;
  const auto data = generate_dataset(cfg.dataset);
  const auto a = run_compare(cfg, data, {1.0}, {LossKind::kUniCon}, 2, 1);
  const auto b = run_compare(cfg, data, {1.0}, {LossKind::kUniCon}, 2, 2);
  EXPECT_EQ(a.alphas, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(a.cells.size(), 2u);
  EXPECT_EQ(a.seeds, (std::vector<std::uint64_t>{5, 6}));
  EXPECT_EQ(compare_csv(a), compare_csv(b));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_NE(compare_text(a).find("unicon"), std::string::npos);
}

}  // namespace
}  // namespace unimoco
