#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "unimoco/checkpoint.hpp"
#include "unimoco/config.hpp"
#include "unimoco/error.hpp"
#include "unimoco/eval.hpp"
#include "unimoco/experiment.hpp"
#include "unimoco/losscheck.hpp"
#include "unimoco/losses.hpp"
#include "unimoco/queue.hpp"

namespace py = pybind11;
using namespace unimoco;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

TargetMask to_mask(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D target");
  return {a.data(), a.data() + a.size()};
}

py::tuple loss_tuple(const LossEval& e) { return py::make_tuple(e.value, from_vector(e.grad)); }

py::object parse_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json dump_json(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) return nlohmann::json::parse(obj.cast<std::string>());
  return nlohmann::json::parse(
      py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  out["spec"] = parse_json(to_json(d.spec));
  out["train_inputs"] = from_matrix(d.train_inputs);
  out["train_labels"] = d.train_true;
  out["test_inputs"] = from_matrix(d.test_inputs);
  out["test_labels"] = d.test_labels;
  return out;
}

}  // namespace

PYBIND11_MODULE(_unimoco, m) {
  m.doc() = "Contrastive losses, label queue, training loop and probes.";
  m.attr("__version__") = std::string(kToolVersion);

  // Translators run newest first, so the base class is registered first and
  // the subclasses derive from it on the Python side.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  m.def("log_sum_exp", [](const Array& v) { return log_sum_exp(to_vector(v)); }, py::arg("values"));
  m.def("softplus", &softplus, py::arg("x"));

  m.def("loss_kinds", [] {
    std::vector<std::string> names;
    for (auto k : all_loss_kinds()) names.emplace_back(to_string(k));
    return names;
  });
  m.def(
      "loss",
      [](const std::string& kind, const Array& logits, const py::array_t<std::uint8_t>& target) {
        return loss_tuple(evaluate(parse_loss_kind(kind), to_vector(logits), to_mask(target)));
      },
      py::arg("kind"), py::arg("logits"), py::arg("target"),
      "Returns (value, gradient with respect to the logits).");
  m.def(
      "triplet_pair",
      [](const Array& q, const Array& kp, const Array& kn, double tau) {
        return triplet_pair(to_vector(q), to_vector(kp), to_vector(kn), tau);
      },
      py::arg("q"), py::arg("k_pos"), py::arg("k_neg"), py::arg("tau"));

  py::class_<PairQueue>(m, "PairQueue")
      .def(py::init([](std::size_t capacity, std::size_t dim, std::uint64_t seed) {
             Rng rng(seed);
             return PairQueue(capacity, dim, rng);
           }),
           py::arg("capacity"), py::arg("dim"), py::arg("seed") = 0)
      .def_property_readonly("capacity", &PairQueue::capacity)
      .def_property_readonly("dim", &PairQueue::dim)
      .def_property_readonly("cursor", &PairQueue::cursor)
      .def_property_readonly("inserted", &PairQueue::inserted)
      .def_property_readonly("features", [](const PairQueue& q) { return from_matrix(q.features()); })
      .def_property_readonly("labels", &PairQueue::labels)
      .def("logical_order", &PairQueue::logical_order)
      .def(
          "push_batch",
          [](PairQueue& q, const Array& keys, const std::vector<int>& labels) {
            q.push_batch(to_matrix(keys), labels);
          },
          py::arg("keys"), py::arg("labels"))
      .def(
          "build_target",
          [](const PairQueue& q, const std::vector<int>& query_labels) {
            const auto rows = build_target(query_labels, q);
            py::array_t<std::uint8_t> out({rows.size(), 1 + q.capacity()});
            auto* dst = out.mutable_data();
            for (const auto& r : rows) dst = std::copy(r.begin(), r.end(), dst);
            return out;
          },
          py::arg("query_labels"));

  m.def(
      "generate_dataset",
      [](const py::object& spec) { return dataset_dict(generate_dataset(parse_dataset_spec(dump_json(spec)))); },
      py::arg("spec") = py::dict(), "Spec as a dict or JSON text (bare spec or full config).");
  m.def(
      "save_dataset",
      [](const std::string& path, const py::object& spec) {
        save_dataset(path, generate_dataset(parse_dataset_spec(dump_json(spec))));
      },
      py::arg("path"), py::arg("spec") = py::dict());
  m.def(
      "load_dataset", [](const std::string& path) { return dataset_dict(load_dataset(path)); },
      py::arg("path"));

  m.def(
      "parse_config",
      [](const py::object& cfg) { return parse_json(to_json(parse_config(dump_json(cfg)))); },
      py::arg("config"), "Validates a config and returns it with every default filled in.");
  m.def(
      "config_digest", [](const py::object& cfg) { return config_digest(parse_config(dump_json(cfg))); },
      py::arg("config"));

  m.def(
      "pretrain",
      [](const py::object& cfg, const std::string& data_path, const std::string& out_dir,
         std::optional<std::string> resume, std::optional<std::uint64_t> stop_after) {
        const auto config = parse_config(dump_json(cfg));
        const auto data = load_dataset(data_path);
        PretrainArtifacts art;
        {
          py::gil_scoped_release release;
          art = run_pretrain(config, data, out_dir, resume, stop_after);
        }
        py::dict out;
        out["checkpoint"] = art.checkpoint_path;
        out["metrics"] = art.metrics_path;
        out["manifest"] = art.manifest_path;
        out["steps_run"] = art.steps_run;
        return out;
      },
      py::arg("config"), py::arg("data"), py::arg("out_dir"), py::arg("resume") = py::none(),
      py::arg("stop_after") = py::none());

  m.def(
      "probe",
      [](const std::string& checkpoint, const std::string& data_path) {
        const auto ckpt = load_checkpoint(checkpoint);
        const auto data = load_dataset(data_path);
        ProbeReport r;
        {
          py::gil_scoped_release release;
          r = probe(ckpt, data);
        }
        return parse_json(to_json(r));
      },
      py::arg("checkpoint"), py::arg("data"));

  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        const auto ckpt = load_checkpoint(path);
        py::dict out;
        out["config"] = parse_json(to_json(ckpt.config));
        out["step"] = ckpt.state.step;
        out["run_id"] = run_id(ckpt.config);
        out["queue_labels"] = ckpt.state.queue.labels();
        out["queue_features"] = from_matrix(ckpt.state.queue.features());
        return out;
      },
      py::arg("path"));

  m.def(
      "trunk_features",
      [](const std::string& checkpoint, const Array& inputs) {
        return from_matrix(extract_features(load_checkpoint(checkpoint).state.query, to_matrix(inputs)));
      },
      py::arg("checkpoint"), py::arg("inputs"));

  m.def(
      "linear_probe",
      [](const Array& train_x, const std::vector<int>& train_y, const Array& test_x,
         const std::vector<int>& test_y, std::size_t epochs, double lr, std::size_t batch_size,
         bool standardize, std::uint64_t seed) {
        ProbeConfig cfg;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.batch_size = batch_size;
        cfg.standardize = standardize;
        validate(cfg);
        return linear_probe(to_matrix(train_x), train_y, to_matrix(test_x), test_y, cfg, seed);
      },
      py::arg("train_features"), py::arg("train_labels"), py::arg("test_features"),
      py::arg("test_labels"), py::arg("epochs") = 100, py::arg("lr") = 0.1,
      py::arg("batch_size") = 64, py::arg("standardize") = true, py::arg("seed") = 0);
  m.def(
      "knn_probe",
      [](const Array& train_x, const std::vector<int>& train_y, const Array& test_x,
         const std::vector<int>& test_y, std::size_t k) {
        return knn_probe(to_matrix(train_x), train_y, to_matrix(test_x), test_y, k);
      },
      py::arg("train_features"), py::arg("train_labels"), py::arg("test_features"),
      py::arg("test_labels"), py::arg("k") = 20);

  m.def(
      "losscheck",
      [](std::size_t trials, std::size_t width, std::uint64_t seed) {
        LossCheckOptions opts;
        opts.trials = trials;
        opts.width = width;
        opts.seed = seed;
        py::list rows;
        for (const auto& r : run_losscheck(opts)) {
          py::dict d;
          d["loss"] = r.loss;
          d["property"] = r.property;
          d["trials"] = r.trials;
          d["worst"] = r.worst;
          d["tolerance"] = r.tolerance;
          d["passed"] = r.passed;
          rows.append(d);
        }
        return rows;
      },
      py::arg("trials") = 1000, py::arg("width") = 33, py::arg("seed") = 0);
}
