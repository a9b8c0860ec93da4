/*
 * Copyright 2026 The CohortNet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "cohortnet/config.hpp"
#include "cohortnet/data.hpp"
#include "cohortnet/discovery.hpp"
#include "cohortnet/errors.hpp"
#include "cohortnet/metrics.hpp"
#include "cohortnet/pipeline.hpp"
#include "cohortnet/reports.hpp"

namespace py = pybind11;
using namespace cohortnet;

namespace {

py::dict eval_dict(const EvalResult& e) {
  py::dict d;
  d["auc_roc"] = e.auc_roc;
  d["auc_pr"] = e.auc_pr;
  d["f1"] = e.f1;
  d["tp"] = e.tp;
  d["fp"] = e.fp;
  d["tn"] = e.tn;
  d["fn"] = e.fn;
  return d;
}

// Owns a trained model together with the data it was configured for.
class Model {
 public:
  Model(PipelineConfig config, TrainedModel model)
      : config_(std::move(config)), model_(std::move(model)), data_(load_pipeline_data(config_)) {}

  static Model train(const std::string& config_json) {
    const PipelineConfig cfg = parse_config(config_json);
    cfg.validate();
    return Model(cfg, run_pipeline(cfg).model);
  }

  static Model load(const std::string& config_json, const std::string& dir) {
    const PipelineConfig cfg = parse_config(config_json);
    return Model(cfg, load_model(dir));
  }

  void save(const std::string& dir) const { save_model(model_, dir); }

  py::dict evaluate(const std::string& split_name, bool stage1_only) const {
    return eval_dict(evaluate_split(model_, data_, parse_split(split_name), stage1_only));
  }

  std::vector<double> predict(const std::vector<std::string>& ids, bool stage1_only) const {
    std::vector<std::size_t> idx;
    idx.reserve(ids.size());
    for (const auto& id : ids) idx.push_back(data_.find(id));
    return predict_probabilities(model_, data_, idx, stage1_only);
  }

  std::vector<std::string> ids(const std::string& split_name) const {
    std::vector<std::string> out;
    for (auto p : data_.indices(parse_split(split_name))) out.push_back(data_.records[p].id);
    return out;
  }

  std::string explain(const std::string& id) const {
    const PatientAnalysis a = analyze_patient(model_, data_.records[data_.find(id)]);
    return calibration_report_json(model_, a, id);
  }

  std::string cohort_table() const { return cohortnet::cohort_table(model_.pool, model_.feature_names()); }
  std::size_t pool_size() const { return model_.pool.size(); }
  std::vector<std::string> feature_names() const { return model_.feature_names(); }

 private:
  static Split parse_split(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "valid") return Split::kValid;
    if (s == "test") return Split::kTest;
    throw ConfigError("unknown split '" + s + "' (train, valid, test)");
  }

  PipelineConfig config_;
  TrainedModel model_;
  Dataset data_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cohortnet native core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());

  m.def("auc_roc", [](const std::vector<double>& s, const std::vector<int>& y) { return auc_roc(s, y); },
        py::arg("scores"), py::arg("labels"));
  m.def("auc_pr", [](const std::vector<double>& s, const std::vector<int>& y) { return auc_pr(s, y); },
        py::arg("scores"), py::arg("labels"));
  m.def("f1_score",
        [](const std::vector<double>& s, const std::vector<int>& y, double threshold) {
          return f1_score(s, y, threshold);
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def("evaluate", [](const std::vector<double>& s, const std::vector<int>& y) { return eval_dict(evaluate(s, y)); },
        py::arg("scores"), py::arg("labels"));

  m.def(
      "kmeans",
      [](const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed) {
        if (points.empty()) throw ConfigError("kmeans: no points");
        const std::size_t dim = points[0].size();
        std::vector<double> flat;
        for (const auto& p : points) {
          if (p.size() != dim) throw DimensionError("kmeans: ragged points");
          flat.insert(flat.end(), p.begin(), p.end());
        }
        const KMeansResult r = kmeans(flat, dim, k, seed);
        std::vector<std::vector<double>> centroids(r.k);
        for (std::size_t c = 0; c < r.k; ++c)
          centroids[c].assign(r.centroids.begin() + c * dim, r.centroids.begin() + (c + 1) * dim);
        return py::make_tuple(centroids, r.assignment, r.inertia);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "generate",
      [](const std::string& plan_json) {
        const SyntheticData d = generate_records(parse_plan(plan_json));
        py::list records;
        for (std::size_t p = 0; p < d.records.size(); ++p) {
          py::dict r;
          r["id"] = d.records[p].id;
          r["label"] = d.records[p].label;
          r["values"] = d.records[p].values;
          r["planted"] = d.planted[p];
          records.append(r);
        }
        std::vector<std::string> names;
        for (const auto& f : d.schema.features) names.push_back(f.name);
        return py::make_tuple(names, d.schema.num_steps, records);
      },
      py::arg("plan_json"), "Generate a synthetic dataset; values are feature-major (F x T), NaN = missing.");

  py::class_<Model>(m, "Model")
      .def_static("train", &Model::train, py::arg("config_json"), py::call_guard<py::gil_scoped_release>())
      .def_static("load", &Model::load, py::arg("config_json"), py::arg("directory"))
      .def("save", &Model::save, py::arg("directory"))
      .def("evaluate", &Model::evaluate, py::arg("split") = "test", py::arg("stage1_only") = false)
      .def("predict", &Model::predict, py::arg("ids"), py::arg("stage1_only") = false)
      .def("ids", &Model::ids, py::arg("split") = "test")
      .def("explain", &Model::explain, py::arg("patient_id"))
      .def("cohort_table", &Model::cohort_table)
      .def_property_readonly("pool_size", &Model::pool_size)
      .def_property_readonly("feature_names", &Model::feature_names);
}
