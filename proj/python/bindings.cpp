#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "video2plan/fixtures.hpp"
#include "video2plan/pipeline.hpp"

namespace py = pybind11;
using namespace video2plan;

namespace {

py::dict manifest_dict(const Manifest& m) {
  py::list outputs;
  for (const auto& o : m.outputs) {
    py::dict d;
    d["stage"] = o.stage;
    d["path"] = o.path.generic_string();
    d["sha256"] = o.sha256;
    outputs.append(d);
  }
  py::dict out;
  out["version"] = m.version.str();
  out["outputs"] = outputs;
  out["metrics"] = m.metrics;
  return out;
}

std::pair<std::string, double> recognize(const std::vector<std::pair<std::string, std::string>>& words,
                                         const std::optional<std::filesystem::path>& table, bool deduplicate) {
  std::vector<WordObservation> obs;
  for (const auto& [label, cls] : words) obs.push_back({label, parse_object_class(cls)});
  RecognitionOptions opts;
  opts.deduplicate = deduplicate;
  const auto r = recognize_individual(obs, table ? load_bigram_table(*table) : kitchen_mini_table(), opts);
  return {std::string(to_string(r.action)), r.score};
}

}  // namespace

PYBIND11_MODULE(_video2plan, m) {
  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<PlanError>(m, "PlanError", error.ptr());
  py::register_exception<StageError>(m, "StageError", error.ptr());

  m.def("version", [] { return version_info().str(); });

  m.def("fixture_names", &fixture_names);
  m.def(
      "write_fixture",
      [](const std::string& name, const std::filesystem::path& dir) { return write_fixture(make_fixture(name), dir); },
      py::arg("name"), py::arg("directory"));

  m.def(
      "run",
      [](const std::filesystem::path& config, const std::optional<std::filesystem::path>& output_dir) {
        auto cfg = load_config(config);
        if (output_dir) cfg.output_dir = *output_dir;
        Manifest manifest;
        {
          py::gil_scoped_release release;
          manifest = run_pipeline(cfg);
        }
        return manifest_dict(manifest);
      },
      py::arg("config"), py::arg("output_dir") = py::none());

  m.def("recognize", &recognize, py::arg("words"), py::arg("table") = py::none(), py::arg("deduplicate") = true,
        "Most likely individual action for (label, class) pairs; returns (action, log score).");

  m.def("canonical_tree", [](const std::string& sexpr) { return to_sexpr(parse(unparse(parse_sexpr(sexpr)))); });
  m.def("sentence", [](const std::string& sexpr) { return unparse(parse_sexpr(sexpr)).words(); });

  m.def("jaccard", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return jaccard({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
  });

  m.def("precision_recall", [](std::size_t detected, std::size_t correct, std::size_t truth) {
    const auto r = precision_recall(detected, correct, truth);
    return std::make_pair(r.precision, r.recall);
  });
}
