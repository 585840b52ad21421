#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "podcount/data_model.hpp"
#include "podcount/error.hpp"
#include "podcount/frame_select.hpp"
#include "podcount/geometry.hpp"
#include "podcount/pipeline.hpp"
#include "podcount/ranking.hpp"
#include "podcount/simulator.hpp"

namespace py = pybind11;
using namespace podcount;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

BoundingBox to_box(const BoxTuple& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

py::dict counts_dict(const ConfusionCounts& c) {
  py::dict d;
  d["tp"] = c.tp;
  d["tn"] = c.tn;
  d["fp"] = c.fp;
  d["fn"] = c.fn;
  return d;
}

py::dict metrics_dict(const ClassificationMetrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["sensitivity"] = m.sensitivity;
  d["specificity"] = m.specificity;
  return d;
}

py::dict report_dict(const RankingReport& r) {
  py::dict d;
  d["n"] = r.n;
  d["pearson_r"] = r.pearson_r;
  d["spearman_rho"] = r.spearman_rho;
  d["correlation_error"] = r.correlation_error;
  py::list cuts;
  for (const auto& c : r.cutoffs) {
    py::dict e;
    e["fraction"] = c.fraction;
    e["counts"] = counts_dict(c.counts);
    e["metrics"] = metrics_dict(c.metrics);
    cuts.append(e);
  }
  d["cutoffs"] = cuts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_podcount, m) {
  m.doc() = "Bindings to the podcount C++ core";
  m.attr("__version__") = std::string(kToolVersion);

  static py::exception<Error> error(m, "PodcountError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      py::setattr(exc, "code", py::str(std::string(to_string(e.code()))));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def("iou", [](const BoxTuple& a, const BoxTuple& b) { return iou(to_box(a), to_box(b)); },
        py::arg("a"), py::arg("b"), "IoU of two (x, y, w, h) boxes.");

  m.def(
      "select_frames",
      [](std::int64_t start, std::int64_t end, int n) {
        const auto s = select_frames(start, end, n);
        return py::make_tuple(s.frames, s.short_range);
      },
      py::arg("start"), py::arg("end"), py::arg("n"),
      "Evenly spaced interior frames; returns (frames, short_range).");

  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(x, y);
  });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    return spearman(x, y);
  });
  m.def("selection_size", &selection_size, py::arg("p"), py::arg("n"));
  m.def(
      "top_fraction_selection",
      [](const std::vector<double>& truth, const std::vector<double>& pred, double p) {
        return counts_dict(top_fraction_selection(truth, pred, p));
      },
      py::arg("ground_truth"), py::arg("predicted"), py::arg("p"));
  m.def(
      "classification_metrics",
      [](std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
        return metrics_dict(classification_metrics({tp, tn, fp, fn}));
      },
      py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));
  m.def(
      "ranking_report",
      [](const std::vector<double>& truth, const std::vector<double>& pred,
         const std::vector<double>& cutoffs) {
        return report_dict(ranking_report(truth, pred, cutoffs));
      },
      py::arg("ground_truth"), py::arg("predicted"), py::arg("cutoffs"));

  m.def("dataset_stats", [](const std::vector<std::int64_t>& counts) {
    const auto s = dataset_stats(counts);
    py::dict d;
    d["n"] = s.n;
    d["min"] = s.min;
    d["max"] = s.max;
    d["mean"] = s.mean;
    d["std_sample"] = s.std_sample;
    d["std_population"] = s.std_population;
    return d;
  });

  m.def("default_config_json", [] { return pipeline_config_to_json(PipelineConfig{}); },
        "Default pipeline configuration as JSON.");

  m.def(
      "simulate_counts",
      [](const std::string& config_json) {
        const auto cfg = pipeline_config_from_json(config_json);
        FieldConfig fc = cfg.field;
        fc.seed = cfg.seed;
        const auto field = generate_field(fc);
        std::vector<std::pair<std::string, std::int64_t>> out;
        for (const auto& p : field.plots) out.emplace_back(p.plot_id, p.true_pod_count);
        return out;
      },
      py::arg("config_json"), "(plot_id, true pod count) for every simulated plot.");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const auto cfg = pipeline_config_from_json(config_json);
        std::vector<ExperimentResult> results;
        {
          py::gil_scoped_release release;
          results = run_experiment(cfg);
        }
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["views_per_side"] = r.views_per_side;
          d["n_train"] = r.n_train;
          d["n_test"] = r.n_test;
          d["epoch_losses"] = r.training.epoch_losses;
          py::list preds;
          for (const auto& p : r.predictions)
            preds.append(py::make_tuple(p.plot_id, p.ground_truth_pods, p.predicted));
          d["predictions"] = preds;
          d["ranking"] = report_dict(r.ranking);
          out.append(d);
        }
        return out;
      },
      py::arg("config_json"),
      "In-memory pipeline; one result dict per views-per-side setting.");

  m.def(
      "run_pipeline",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        const auto cfg = pipeline_config_from_json(config_json);
        std::vector<std::filesystem::path> dirs;
        {
          py::gil_scoped_release release;
          for (const auto& r : run_pipeline(cfg, out_dir)) dirs.push_back(r.dir);
        }
        return dirs;
      },
      py::arg("config_json"), py::arg("out_dir"),
      "File-based pipeline; returns the run directory of each model.");
}
