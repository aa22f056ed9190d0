#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pea/config.hpp"
#include "pea/gradcheck.hpp"
#include "pea/persistence.hpp"

namespace py = pybind11;
using namespace pea;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <typename T, typename A>
BasicTensor<T> to_tensor(const A& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  if (shape.empty()) shape = {1};
  return BasicTensor<T>(std::move(shape), std::vector<T>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(const BasicTensor<T>& t) {
  py::array_t<T> out(t.shape());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Json summary_json(const ExperimentSummary& s) {
  auto stat = [](const MetricSummary& m) { return Json{{"mean", m.mean}, {"std", m.stddev}, {"min", m.min}, {"max", m.max}}; };
  Json j{{"name", s.name},
         {"runs", s.n_runs},
         {"val_acc", stat(s.val_acc)},
         {"val_loss", stat(s.val_loss)},
         {"train_acc", stat(s.train_acc)},
         {"train_loss", stat(s.train_loss)},
         {"selected_epochs", s.selected_epochs},
         {"per_run_val_acc", s.per_run_val_acc}};
  j["export_path"] = s.export_path ? Json(s.export_path->string()) : Json(nullptr);
  return j;
}

}  // namespace

PYBIND11_MODULE(_pea, m) {
  m.doc() = "ReLU ensemble activations, schedules, training and export";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<CollapseError>(m, "CollapseError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);

  m.def("activate", [](const std::string& kind, const F64& x) {
    return to_array(forward(ActivationKind::parse(kind), to_tensor<double>(x)));
  }, py::arg("kind"), py::arg("x"));

  m.def("weighted_ensemble", [](const F64& x, const std::string& sota, double alpha) {
    return to_array(weighted_forward(to_tensor<double>(x), ActivationKind::parse(sota), alpha));
  }, py::arg("x"), py::arg("sota"), py::arg("alpha"));

  m.def("stochastic_ensemble",
        [](const F64& x, const std::string& sota, double alpha, std::uint64_t seed, bool per_tensor, bool training) {
          RandomStream rng(seed, stream_id("python"));
          const auto g = per_tensor ? SamplingGranularity::PerTensor : SamplingGranularity::PerElement;
          auto out = stochastic_forward(to_tensor<double>(x), ActivationKind::parse(sota), alpha, g, rng, training);
          py::array_t<std::uint8_t> mask(static_cast<py::ssize_t>(out.relu_mask.size()), out.relu_mask.data());
          return py::make_tuple(to_array(out.values), mask);
        },
        py::arg("x"), py::arg("sota"), py::arg("alpha"), py::arg("seed") = 0, py::arg("per_tensor") = false,
        py::arg("training") = true);

  m.def("alpha_at", [](int init_end, int trans_end, int total_epochs, double t, const std::string& granularity) {
    return alpha_at(PhaseSchedule{init_end, trans_end, total_epochs, parse_schedule_granularity(granularity)}, t);
  }, py::arg("init_end"), py::arg("trans_end"), py::arg("total_epochs"), py::arg("t"),
     py::arg("granularity") = "per_epoch");

  m.def("schedule_csv", [](int init_end, int trans_end, int total_epochs) {
    return schedule_csv(PhaseSchedule{init_end, trans_end, total_epochs});
  }, py::arg("init_end") = 5, py::arg("trans_end") = 115, py::arg("total_epochs") = 120);

  m.def("label_smoothed_cross_entropy", [](const F64& logits, std::vector<int> labels, double smoothing) {
    if (logits.ndim() != 2) throw py::value_error("logits must be 2-d");
    return label_smoothed_cross_entropy(to_tensor<double>(logits), labels, smoothing);
  }, py::arg("logits"), py::arg("labels"), py::arg("smoothing"));

  m.def("preset_names", &preset_names);
  m.def("preset_json", [](const std::string& name, int epochs) { return to_json(preset(name, epochs)).dump(); },
        py::arg("name"), py::arg("epochs") = 24);
  m.def("validate_config", [](const std::string& text) {
    return to_json(experiment_from_json(Json::parse(text))).dump();
  }, py::arg("config_json"));

  m.def("learning_rates", [](const std::string& text) {
    const auto cfg = experiment_from_json(Json::parse(text));
    std::vector<double> lrs;
    for (int e = 1; e <= cfg.train.epochs; ++e) lrs.push_back(learning_rate(cfg.train, e));
    return lrs;
  }, py::arg("config_json"));

  m.def("run_experiment", [](const std::string& text, int runs, const std::string& output_dir) {
    auto cfg = experiment_from_json(Json::parse(text));
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(cfg, runs);
    }
    return summary_json(r.summary).dump();
  }, py::arg("config_json"), py::arg("runs") = 1, py::arg("output_dir") = "");

  m.def("grad_suite", [](std::optional<std::string> activation, std::optional<std::string> architecture) {
    GradSuiteFilter f;
    if (activation) f.activation = ActivationKind::parse(*activation).tag();
    if (architecture) f.architecture = parse_architecture(*architecture);
    std::vector<py::dict> out;
    for (const auto& r : run_grad_suite(f)) {
      py::dict d;
      d["name"] = r.name;
      d["passed"] = r.passed();
      d["checked"] = r.checked;
      d["max_rel_err"] = r.max_rel_err;
      out.push_back(d);
    }
    return out;
  }, py::arg("activation") = py::none(), py::arg("architecture") = py::none());

  m.def("inspect_checkpoint", [](const std::filesystem::path& p) {
    const auto info = inspect_checkpoint(p);
    Json j = info.meta;
    j.erase("rng");
    j["format_version"] = info.version;
    return j.dump();
  }, py::arg("path"));

  m.def("export_checkpoint", [](const std::filesystem::path& ckpt, const std::filesystem::path& out) {
    export_collapsed(load_checkpoint(ckpt).model, out);
  }, py::arg("checkpoint"), py::arg("out"));

  py::class_<ExportedModel>(m, "ExportedModel")
      .def_static("load", &load_exported, py::arg("path"))
      .def("logits", [](const ExportedModel& e, const F32& x) { return to_array(e.logits(to_tensor<float>(x))); })
      .def("probabilities",
           [](const ExportedModel& e, const F32& x) { return to_array(e.probabilities(to_tensor<float>(x))); })
      .def_property_readonly("node_kinds", &ExportedModel::node_kinds)
      .def_property_readonly("graph_json", [](const ExportedModel& e) { return e.graph().dump(); });
}
