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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cohortnet/config.hpp"
#include "cohortnet/data.hpp"
#include "cohortnet/errors.hpp"
#include "cohortnet/pipeline.hpp"
#include "cohortnet/reports.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cohortnet;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json eval_json(const EvalResult& e) { return json::parse(eval_to_json(e)); }

int cmd_generate(const std::string& plan_path, const std::string& out_dir) {
  const SyntheticPlan plan = parse_plan(slurp(plan_path));
  const SyntheticData data = generate_records(plan);
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  save_schema(data.schema, (root / "schema.json").string());
  write_records((root / "records.ndjson").string(), data.schema, data.records);
  std::ostringstream planted;
  for (std::size_t p = 0; p < data.records.size(); ++p) {
    planted << json{{"id", data.records[p].id}, {"planted", data.planted[p]}}.dump() << '\n';
  }
  spit(root / "planted.ndjson", planted.str());
  std::cout << "wrote " << data.records.size() << " records to " << out_dir << '\n';
  return 0;
}

int cmd_train(const PipelineConfig& cfg) {
  const Dataset data = load_pipeline_data(cfg);
  const PipelineResult res = run_pipeline(cfg, data);
  save_model(res.model, cfg.output_dir);
  const fs::path root(cfg.output_dir);
  json summary{{"test", eval_json(res.test)},
               {"test_stage1", eval_json(res.test_stage1)},
               {"pool_size", res.model.pool.size()},
               {"enumerated_patterns", res.pool_stats.enumerated_patterns},
               {"surviving_patterns", res.pool_stats.surviving_patterns},
               {"stage1_best_epoch", res.stage1_log.best_epoch},
               {"stage4_best_epoch", res.stage4_log.best_epoch},
               {"timings",
                {{"stage1", res.timings.stage1},
                 {"encode", res.timings.encode},
                 {"stage2", res.timings.stage2},
                 {"stage3", res.timings.stage3},
                 {"stage4", res.timings.stage4}}}};
  spit(root / "eval.json", summary.dump(2));
  if (res.model.cohorts_enabled) {
    emit_model_reports(res.model, split_state_grids(res.model, data, Split::kTrain),
                       cfg.output_dir);
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_discover(const PipelineConfig& cfg) {
  const Dataset data = load_pipeline_data(cfg);
  const fs::path model_dir(cfg.output_dir);
  TrainedModel m;
  if (fs::exists(model_dir / "model.json")) {
    m = load_model(cfg.output_dir);
  } else {
    PipelineConfig stage1 = cfg;
    stage1.use_cohorts = false;
    m = run_pipeline(stage1, data).model;
  }
  const auto encoded = encode_all(m.params, m.encoder, data);
  m.states = fit_state_models(encoded, data, m.encoder, cfg.k, cfg.seed + 2, cfg.kmeans);
  const auto grids = assign_all_states(encoded, data, m.states);
  PoolBuildStats stats;
  m.pool = build_train_pool(encoded, grids, data, m.encoder, cfg.n, cfg.filter, &stats);

  const fs::path out = model_dir / "discover";
  fs::create_directories(out);
  spit(out / "states.json", serialize_states(m.states, m.feature_names()));
  save_pool(m.pool, (out / "pool.jsonl").string());
  std::vector<StateGrid> train_grids;
  for (auto p : data.indices(Split::kTrain)) train_grids.push_back(grids[p]);
  emit_model_reports(m, train_grids, out.string());
  std::cout << cohort_table(m.pool, m.feature_names());
  std::cout << stats.enumerated_patterns << " patterns enumerated, " << stats.surviving_patterns
            << " kept, " << m.pool.size() << " cohorts; reports in " << out.string() << '\n';
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg) {
  const TrainedModel m = load_model(cfg.output_dir);
  const Dataset data = load_pipeline_data(cfg);
  json j{{"test", eval_json(evaluate_split(m, data, Split::kTest))},
         {"test_stage1", eval_json(evaluate_split(m, data, Split::kTest, true))},
         {"valid", eval_json(evaluate_split(m, data, Split::kValid))}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_explain(const PipelineConfig& cfg, const std::string& patient, const std::string& alpha_out) {
  const TrainedModel m = load_model(cfg.output_dir);
  const Dataset data = load_pipeline_data(cfg);
  const auto& rec = data.records[data.find(patient)];
  const PatientAnalysis a = analyze_patient(m, rec);
  std::cout << calibration_report_json(m, a, patient) << '\n';
  if (!alpha_out.empty()) spit(alpha_out, alpha_heatmap_ndjson(a.encoding, m.feature_names(), patient));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cohortnet: cohort discovery and calibrated outcome prediction"};
  app.require_subcommand(1);

  std::string plan_path, out_dir = ".";
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset from a plan");
  gen->add_option("plan", plan_path, "plan JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out_dir, "output directory");

  std::string config_path;
  const auto with_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "pipeline config JSON")->required()->check(CLI::ExistingFile);
    return sub;
  };
  auto* train = with_config(app.add_subcommand("train", "run all stages and save the model"));
  auto* discover = with_config(app.add_subcommand("discover", "fit states and build the cohort pool"));
  auto* evaluate = with_config(app.add_subcommand("evaluate", "score a saved model on the test split"));
  auto* explain = with_config(app.add_subcommand("explain", "per-patient calibration breakdown"));
  std::string patient, alpha_out;
  explain->add_option("--patient", patient, "record id")->required();
  explain->add_option("--alpha", alpha_out, "also write interaction weights (NDJSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(plan_path, out_dir);
    const PipelineConfig cfg = load_config(config_path);
    if (train->parsed()) return cmd_train(cfg);
    if (discover->parsed()) return cmd_discover(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (explain->parsed()) return cmd_explain(cfg, patient, alpha_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "not found: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
