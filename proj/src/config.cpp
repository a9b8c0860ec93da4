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

#include "cohortnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cohortnet/errors.hpp"
#include "json.hpp"

namespace cohortnet {

using json = nlohmann::json;

void PipelineConfig::validate() const {
  if (data_path.empty() && !synthetic) throw ConfigError("config: set 'data' or 'synthetic'");
  if (!data_path.empty() && schema_path.empty()) throw ConfigError("config: 'data' needs 'schema'");
  if (k < 1) throw ConfigError("config: k must be >= 1");
  if (d_e == 0 || d_t == 0 || d_o == 0 || d_h == 0 || d_p == 0 || d_a == 0) {
    throw ConfigError("config: dimensions must be >= 1");
  }
  if (filter.min_occurrences < 1 || filter.min_patients < 1) {
    throw ConfigError("config: filter thresholds must be >= 1");
  }
  if (batch_size == 0) throw ConfigError("config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
  if (synthetic && n >= synthetic->num_features) {
    throw ConfigError("config: n must be < number of features");
  }
}

PipelineConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  PipelineConfig c;
  try {
    c.data_path = j.value("data", c.data_path);
    c.schema_path = j.value("schema", c.schema_path);
    if (j.contains("synthetic")) {
      c.synthetic = j["synthetic"].is_string() ? parse_plan(j["synthetic"].get<std::string>())
                                               : parse_plan(j["synthetic"].dump());
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("split_seed")) c.split_seed = j["split_seed"].get<std::uint64_t>();
    if (j.contains("split")) {
      const auto& s = j["split"];
      c.split.train = s.at(0).get<double>();
      c.split.valid = s.at(1).get<double>();
      c.split.test = s.at(2).get<double>();
    }
    c.d_e = j.value("d_e", c.d_e);
    c.d_t = j.value("d_t", c.d_t);
    c.d_o = j.value("d_o", c.d_o);
    c.d_h = j.value("d_h", c.d_h);
    c.d_p = j.value("d_p", c.d_p);
    c.k = j.value("k", c.k);
    c.n = j.value("n", c.n);
    c.kmeans.max_iterations = j.value("kmeans_max_iterations", c.kmeans.max_iterations);
    c.kmeans.tolerance = j.value("kmeans_tolerance", c.kmeans.tolerance);
    c.kmeans.restarts = j.value("kmeans_restarts", c.kmeans.restarts);
    c.filter.min_occurrences = j.value("min_occurrences", c.filter.min_occurrences);
    c.filter.min_patients = j.value("min_patients", c.filter.min_patients);
    c.d_a = j.value("d_a", c.d_a);
    c.d_v = j.value("d_v", c.d_v);
    c.use_cohorts = j.value("use_cohorts", c.use_cohorts);
    c.finetune_head = j.value("finetune_head", c.finetune_head);
    c.joint_finetune = j.value("joint_finetune", c.joint_finetune);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs_stage1 = j.value("epochs_stage1", c.epochs_stage1);
    c.epochs_stage4 = j.value("epochs_stage4", c.epochs_stage4);
    c.patience = j.value("patience", c.patience);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

void apply_env_overrides(PipelineConfig& c) {
  if (const char* v = std::getenv("COHORTNET_SEED")) {
    char* end = nullptr;
    const auto seed = std::strtoull(v, &end, 10);
    if (end == v || *end != '\0') throw ConfigError("COHORTNET_SEED must be an integer");
    c.seed = seed;
  }
  if (const char* v = std::getenv("COHORTNET_DATA")) c.data_path = v;
  if (const char* v = std::getenv("COHORTNET_SCHEMA")) c.schema_path = v;
  if (const char* v = std::getenv("COHORTNET_OUTPUT")) c.output_dir = v;
}

PipelineConfig load_config(const std::string& path, bool apply_env) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig c = parse_config(ss.str());
  if (apply_env) apply_env_overrides(c);
  c.validate();
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  if (!c.data_path.empty()) j["data"] = c.data_path;
  if (!c.schema_path.empty()) j["schema"] = c.schema_path;
  if (c.synthetic) j["synthetic"] = json::parse(plan_to_json(*c.synthetic));
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  if (c.split_seed) j["split_seed"] = *c.split_seed;
  j["split"] = {c.split.train, c.split.valid, c.split.test};
  j["d_e"] = c.d_e;
  j["d_t"] = c.d_t;
  j["d_o"] = c.d_o;
  j["d_h"] = c.d_h;
  j["d_p"] = c.d_p;
  j["k"] = c.k;
  j["n"] = c.n;
  j["kmeans_max_iterations"] = c.kmeans.max_iterations;
  j["kmeans_tolerance"] = c.kmeans.tolerance;
  j["kmeans_restarts"] = c.kmeans.restarts;
  j["min_occurrences"] = c.filter.min_occurrences;
  j["min_patients"] = c.filter.min_patients;
  j["d_a"] = c.d_a;
  j["d_v"] = c.d_v;
  j["use_cohorts"] = c.use_cohorts;
  j["finetune_head"] = c.finetune_head;
  j["joint_finetune"] = c.joint_finetune;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs_stage1"] = c.epochs_stage1;
  j["epochs_stage4"] = c.epochs_stage4;
  j["patience"] = c.patience;
  return j.dump(2);
}

}  // namespace cohortnet
