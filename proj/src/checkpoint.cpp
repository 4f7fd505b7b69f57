#include "unimoco/checkpoint.hpp"

#include <fmt/format.h>

#include <cmath>

#include "unimoco/error.hpp"

namespace unimoco {
namespace {

std::vector<std::string> layer_names(const EncoderParams& p) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    names.push_back(l < p.trunk_depth ? fmt::format("trunk.{}", l)
                                      : fmt::format("proj.{}", l - p.trunk_depth));
  }
  return names;
}

void append_params(Container& c, const std::string& prefix, const EncoderParams& p) {
  const auto names = layer_names(p);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    const auto w = layer.weight.values();
    c.arrays.push_back({fmt::format("{}.{}.weight", prefix, names[l]),
                        {layer.out(), layer.in()},
                        {w.begin(), w.end()}});
    c.arrays.push_back(
        {fmt::format("{}.{}.bias", prefix, names[l]), {layer.out()}, layer.bias});
  }
}

EncoderParams read_params(const Container& c, const std::string& prefix, const EncoderDims& dims) {
  Rng scratch(0);
  EncoderParams p = init_params(dims, scratch).zeros_like();
  const auto names = layer_names(p);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const auto& w = c.get(fmt::format("{}.{}.weight", prefix, names[l]));
    const auto& b = c.get(fmt::format("{}.{}.bias", prefix, names[l]));
    if (w.shape != std::vector<std::size_t>{layer.out(), layer.in()} ||
        b.shape != std::vector<std::size_t>{layer.out()}) {
      throw FormatError("parameter shape mismatch in " + names[l]);
    }
    layer.weight = Matrix(layer.out(), layer.in(), w.data);
    layer.bias = b.data;
  }
  return p;
}

std::vector<double> to_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<int> to_ints(const std::vector<double>& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (double d : v) {
    if (d != std::floor(d)) throw FormatError("non-integer label");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

}  // namespace

Container checkpoint_container(const Checkpoint& ckpt) {
  const auto& s = ckpt.state;
  const auto dims = s.query.dims();
  Container c;
  c.header = {
      {"kind", "checkpoint"},
      {"tool_version", std::string(kToolVersion)},
      {"config", to_json(ckpt.config)},
      {"dims",
       {{"input", dims.input},
        {"trunk", dims.trunk},
        {"proj_hidden", dims.proj_hidden},
        {"embed", dims.embed}}},
      {"step", s.step},
      {"rng", {{"seed", s.seed}, {"position", s.step}}},
      {"layer_order", layer_names(s.query)},
      {"queue",
       {{"capacity", s.queue.capacity()},
        {"dim", s.queue.dim()},
        {"cursor", s.queue.cursor()},
        {"inserted", s.queue.inserted()}}},
  };
  append_params(c, "query", s.query);
  append_params(c, "key", s.key);
  append_params(c, "velocity", s.velocity);
  const auto f = s.queue.features().values();
  c.arrays.push_back({"queue.features", {s.queue.capacity(), s.queue.dim()}, {f.begin(), f.end()}});
  c.arrays.push_back({"queue.labels", {s.queue.capacity()}, to_doubles(s.queue.labels())});
  return c;
}

Checkpoint checkpoint_from_container(const Container& c) {
  const auto& h = c.header;
  try {
    if (h.at("kind") != "checkpoint") throw FormatError("not a checkpoint");
    Checkpoint ckpt;
    ckpt.config = parse_config(h.at("config"));
    EncoderDims dims;
    const auto& d = h.at("dims");
    dims.input = d.at("input").get<std::size_t>();
    dims.trunk = d.at("trunk").get<std::vector<std::size_t>>();
    dims.proj_hidden = d.at("proj_hidden").get<std::size_t>();
    dims.embed = d.at("embed").get<std::size_t>();

    auto& s = ckpt.state;
    s.query = read_params(c, "query", dims);
    s.key = read_params(c, "key", dims);
    s.velocity = read_params(c, "velocity", dims);
    s.step = h.at("step").get<std::uint64_t>();
    s.seed = h.at("rng").at("seed").get<std::uint64_t>();

    const auto& q = h.at("queue");
    const auto cap = q.at("capacity").get<std::size_t>();
    const auto dim = q.at("dim").get<std::size_t>();
    const auto& feats = c.get("queue.features");
    const auto& labels = c.get("queue.labels");
    if (feats.shape != std::vector<std::size_t>{cap, dim} ||
        labels.shape != std::vector<std::size_t>{cap}) {
      throw FormatError("queue shape mismatch");
    }
    s.queue = PairQueue(Matrix(cap, dim, feats.data), to_ints(labels.data),
                        q.at("cursor").get<std::size_t>(), q.at("inserted").get<std::uint64_t>());
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("corrupt checkpoint config: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_container(path, checkpoint_container(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_container(read_container(path));
}

Container dataset_container(const Dataset& d) {
  Container c;
  c.header = {{"kind", "dataset"},
              {"tool_version", std::string(kToolVersion)},
              {"spec", to_json(d.spec)}};
  const auto tr = d.train_inputs.values();
  const auto te = d.test_inputs.values();
  c.arrays.push_back(
      {"train.inputs", {d.train_inputs.rows(), d.train_inputs.cols()}, {tr.begin(), tr.end()}});
  c.arrays.push_back({"train.true", {d.train_true.size()}, to_doubles(d.train_true)});
  c.arrays.push_back({"train.labels", {d.train_labels.size()}, to_doubles(d.train_labels)});
  c.arrays.push_back(
      {"test.inputs", {d.test_inputs.rows(), d.test_inputs.cols()}, {te.begin(), te.end()}});
  c.arrays.push_back({"test.labels", {d.test_labels.size()}, to_doubles(d.test_labels)});
  return c;
}

Dataset dataset_from_container(const Container& c) {
  try {
    if (c.header.at("kind") != "dataset") throw FormatError("not a dataset");
    Dataset d;
    d.spec = parse_dataset_spec(c.header.at("spec"));
    auto matrix = [&c](const std::string& name) {
      const auto& a = c.get(name);
      if (a.shape.size() != 2) throw FormatError("bad shape for " + name);
      return Matrix(a.shape[0], a.shape[1], a.data);
    };
    d.train_inputs = matrix("train.inputs");
    d.test_inputs = matrix("test.inputs");
    d.train_true = to_ints(c.get("train.true").data);
    d.train_labels = to_ints(c.get("train.labels").data);
    d.test_labels = to_ints(c.get("test.labels").data);
    if (d.train_true.size() != d.train_inputs.rows() ||
        d.train_labels.size() != d.train_inputs.rows() ||
        d.test_labels.size() != d.test_inputs.rows()) {
      throw FormatError("dataset arrays disagree");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt dataset header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("corrupt dataset spec: ") + e.what());
  }
}

void save_dataset(const std::string& path, const Dataset& d) {
  write_container(path, dataset_container(d));
}

Dataset load_dataset(const std::string& path) {
  return dataset_from_container(read_container(path));
}

}  // namespace unimoco
