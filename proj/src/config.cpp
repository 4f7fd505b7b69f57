#include "unimoco/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

#include "unimoco/error.hpp"

namespace unimoco {
namespace {

using nlohmann::json;

// Reads typed fields out of one JSON object, recording problems instead of
// throwing so that a single pass reports all of them.
class SectionReader {
 public:
  SectionReader(const json& doc, std::string prefix, std::vector<std::string>& errors)
      : doc_(doc), prefix_(std::move(prefix)), errors_(errors) {
    if (!doc_.is_object()) errors_.push_back(prefix_ + ": expected an object");
  }

  ~SectionReader() {
    if (!doc_.is_object()) return;
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) errors_.push_back(fmt::format("{}.{}: unknown key", prefix_, key));
    }
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        bad(key, "expected a number");
      }
    }
  }

  void count(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)) {
        out = v->get<std::size_t>();
      } else {
        bad(key, "expected a non-negative integer");
      }
    }
  }

  void seed(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)) {
        out = v->get<std::uint64_t>();
      } else {
        bad(key, "expected a non-negative integer");
      }
    }
  }

  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        bad(key, "expected true or false");
      }
    }
  }

  void counts(const char* key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      bool ok = v->is_array();
      std::vector<std::size_t> tmp;
      if (ok) {
        for (const auto& e : *v) {
          if (!e.is_number_integer() || e.get<long long>() <= 0) {
            ok = false;
            break;
          }
          tmp.push_back(e.get<std::size_t>());
        }
      }
      if (ok) {
        out = tmp;
      } else {
        bad(key, "expected an array of positive integers");
      }
    }
  }

  void loss(const char* key, LossKind& out) {
    if (const json* v = find(key)) {
      try {
        if (!v->is_string()) throw Error("");
        out = parse_loss_kind(v->get<std::string>());
      } catch (const Error&) {
        bad(key, "expected one of infonce|unicon|unicon_out|supcon_out|supcon_in");
      }
    }
  }

  /// Nested object; returns nullptr when absent.
  const json* object(const char* key) { return find(key); }

  void require(bool ok, const char* key, const char* what) {
    if (!ok) bad(key, what);
  }

  const std::string& prefix() const { return prefix_; }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    if (!doc_.is_object()) return nullptr;
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }
  void bad(const char* key, const char* what) {
    errors_.push_back(fmt::format("{}.{}: {}", prefix_, key, what));
  }

  const json& doc_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void read_dataset(const json& doc, DatasetSpec& spec, std::vector<std::string>& errors) {
  SectionReader r(doc, "dataset", errors);
  r.count("n_classes", spec.n_classes);
  r.count("input_dim", spec.input_dim);
  r.count("n_train", spec.n_train);
  r.count("n_test", spec.n_test);
  r.number("cluster_spread", spec.cluster_spread);
  r.number("mean_radius", spec.mean_radius);
  r.seed("seed", spec.seed);
  r.require(spec.n_classes >= 2, "n_classes", "must be >= 2");
  r.require(spec.input_dim >= 2, "input_dim", "must be >= 2");
  r.require(spec.n_train >= spec.n_classes, "n_train", "must be >= n_classes");
  r.require(spec.n_test >= spec.n_classes, "n_test", "must be >= n_classes");
  r.require(spec.cluster_spread >= 0.0, "cluster_spread", "must be >= 0");
  r.require(spec.mean_radius > 0.0, "mean_radius", "must be > 0");
}

void read_model(const json& doc, ModelConfig& m, std::vector<std::string>& errors) {
  SectionReader r(doc, "model", errors);
  r.counts("trunk", m.trunk);
  r.count("proj_hidden", m.proj_hidden);
  r.count("embed", m.embed);
  r.require(!m.trunk.empty(), "trunk", "must list at least one layer");
  r.require(m.embed >= 1, "embed", "must be >= 1");
}

void read_train(const json& doc, TrainConfig& t, std::vector<std::string>& errors) {
  SectionReader r(doc, "train", errors);
  r.number("tau", t.tau);
  r.number("momentum", t.momentum);
  r.count("queue_size", t.queue_size);
  r.number("label_ratio", t.label_ratio);
  r.count("batch_size", t.batch_size);
  r.count("epochs", t.epochs);
  r.number("lr", t.lr);
  r.boolean("cosine", t.cosine);
  r.number("sgd_momentum", t.sgd_momentum);
  r.number("weight_decay", t.weight_decay);
  r.loss("loss", t.loss);
  r.seed("seed", t.seed);
  if (const json* aug = r.object("aug")) {
    SectionReader a(*aug, "train.aug", errors);
    a.number("noise_std", t.aug.noise_std);
    a.number("dropout_p", t.aug.dropout_p);
    a.require(t.aug.noise_std >= 0.0, "noise_std", "must be >= 0");
    a.require(t.aug.dropout_p >= 0.0 && t.aug.dropout_p < 1.0, "dropout_p", "must lie in [0, 1)");
  }
  r.require(t.tau > 0.0, "tau", "must be > 0");
  r.require(t.momentum >= 0.0 && t.momentum <= 1.0, "momentum", "must lie in [0, 1]");
  r.require(t.label_ratio >= 0.0 && t.label_ratio <= 1.0, "label_ratio", "must lie in [0, 1]");
  r.require(t.batch_size >= 1, "batch_size", "must be >= 1");
  r.require(t.queue_size >= t.batch_size, "queue_size", "must be >= batch_size");
  r.require(t.lr > 0.0, "lr", "must be > 0");
  r.require(t.sgd_momentum >= 0.0 && t.sgd_momentum < 1.0, "sgd_momentum", "must lie in [0, 1)");
  r.require(t.weight_decay >= 0.0, "weight_decay", "must be >= 0");
}

void read_probe(const json& doc, ProbeConfig& p, std::vector<std::string>& errors) {
  SectionReader r(doc, "probe", errors);
  r.count("epochs", p.epochs);
  r.number("lr", p.lr);
  r.count("batch_size", p.batch_size);
  r.count("knn_k", p.knn_k);
  r.boolean("standardize", p.standardize);
  r.require(p.epochs >= 1, "epochs", "must be >= 1");
  r.require(p.lr > 0.0, "lr", "must be > 0");
  r.require(p.batch_size >= 1, "batch_size", "must be >= 1");
  r.require(p.knn_k >= 1, "knn_k", "must be >= 1");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  if (!doc.is_object()) throw ConfigError({"config: expected a JSON object"});
  static const std::set<std::string> kSections = {"dataset", "model", "train", "probe"};
  for (const auto& [key, value] : doc.items()) {
    if (!kSections.contains(key)) errors.push_back(key + ": unknown section");
  }
  if (doc.contains("dataset")) read_dataset(doc["dataset"], cfg.dataset, errors);
  if (doc.contains("model")) read_model(doc["model"], cfg.model, errors);
  if (doc.contains("train")) read_train(doc["train"], cfg.train, errors);
  if (doc.contains("probe")) read_probe(doc["probe"], cfg.probe, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: ") + e.what()});
  }
  return parse_config(doc);
}

namespace {
std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path + ": cannot open"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

ExperimentConfig load_config(const std::string& path) { return parse_config_text(read_text(path)); }

DatasetSpec parse_dataset_spec(const json& doc) {
  if (doc.is_object() && doc.contains("dataset")) return parse_config(doc).dataset;
  DatasetSpec spec;
  std::vector<std::string> errors;
  read_dataset(doc, spec, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return spec;
}

json to_json(const DatasetSpec& s) {
  return json{{"n_classes", s.n_classes},          {"input_dim", s.input_dim},
              {"n_train", s.n_train},              {"n_test", s.n_test},
              {"cluster_spread", s.cluster_spread}, {"mean_radius", s.mean_radius},
              {"seed", s.seed}};
}

json to_json(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  const auto& p = cfg.probe;
  return json{
      {"dataset", to_json(cfg.dataset)},
      {"model",
       {{"trunk", cfg.model.trunk},
        {"proj_hidden", cfg.model.proj_hidden},
        {"embed", cfg.model.embed}}},
      {"train",
       {{"tau", t.tau},
        {"momentum", t.momentum},
        {"queue_size", t.queue_size},
        {"label_ratio", t.label_ratio},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"lr", t.lr},
        {"cosine", t.cosine},
        {"sgd_momentum", t.sgd_momentum},
        {"weight_decay", t.weight_decay},
        {"aug", {{"noise_std", t.aug.noise_std}, {"dropout_p", t.aug.dropout_p}}},
        {"loss", std::string(to_string(t.loss))},
        {"seed", t.seed}}},
      {"probe",
       {{"epochs", p.epochs},
        {"lr", p.lr},
        {"batch_size", p.batch_size},
        {"knn_k", p.knn_k},
        {"standardize", p.standardize}}},
  };
}

std::string config_digest(const ExperimentConfig& cfg) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  return fmt::format("{:016x}", fnv1a(to_json(cfg).dump()));
}

std::string run_id(const ExperimentConfig& cfg) {
  return fmt::format("{}-{}", cfg.train.seed, config_digest(cfg));
}

}  // namespace unimoco
