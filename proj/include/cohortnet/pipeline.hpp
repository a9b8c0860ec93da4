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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cohortnet/config.hpp"
#include "cohortnet/data.hpp"
#include "cohortnet/discovery.hpp"
#include "cohortnet/encoder.hpp"
#include "cohortnet/exploit.hpp"
#include "cohortnet/metrics.hpp"
#include "cohortnet/pool.hpp"
#include "cohortnet/tensor.hpp"

namespace cohortnet {

// Everything produced by the four stages.
struct TrainedModel {
  PipelineConfig config;
  EncoderConfig encoder;
  ExploitConfig exploit;
  Standardization stats;
  ParamStore params;
  std::vector<FeatureStateModel> states;
  CohortPool pool;
  bool cohorts_enabled = false;

  std::vector<std::string> feature_names() const;
};

// Frozen encoder outputs kept for discovery and pool construction.
struct EncodedPatient {
  std::vector<double> alpha;  // EncoderOutput layout
  std::vector<double> o;
  std::vector<double> h;
  std::vector<double> h_tilde_last;
};

struct PatientAnalysis {
  EncoderOutput encoding;
  StateGrid states;
  CohortBitmap bitmap;
  CalibrationReport report;
};

struct StageTimings {
  double stage1 = 0.0;  // encoder + head training
  double encode = 0.0;  // frozen forward pass over all records
  double stage2 = 0.0;  // state fitting and assignment
  double stage3 = 0.0;  // pattern enumeration, filtering, pool build
  double stage4 = 0.0;  // exploitation training
};

struct PipelineResult {
  TrainedModel model;
  EvalResult test;         // final model on the test split
  EvalResult test_stage1;  // encoder-only model on the test split
  TrainLog stage1_log;
  TrainLog stage4_log;
  StageTimings timings;
  PoolBuildStats pool_stats;
};

struct EncoderTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
};

Dataset load_pipeline_data(const PipelineConfig& config);
EncoderConfig make_encoder_config(const PipelineConfig& config, const Dataset& data);

// Stage 1: encoder and head on BCE with Adam, best validation AUC-PR kept.
TrainLog train_encoder(ParamStore& params, const EncoderConfig& config, const Dataset& data,
                       const EncoderTrainOptions& options);

std::vector<EncodedPatient> encode_all(const ParamStore& params, const EncoderConfig& config,
                                       const Dataset& data);
// Stage 2.
std::vector<FeatureStateModel> fit_state_models(std::span<const EncodedPatient> encoded,
                                                const Dataset& data, const EncoderConfig& config,
                                                std::size_t k, std::uint64_t seed,
                                                const KMeansOptions& options);
StateGrid assign_state_grid(std::span<const double> o, const PatientRecord& record,
                            std::span<const FeatureStateModel> models);
std::vector<StateGrid> assign_all_states(std::span<const EncodedPatient> encoded, const Dataset& data,
                                         std::span<const FeatureStateModel> models);
// Stage 3, over the train split.
CohortPool build_train_pool(std::span<const EncodedPatient> encoded,
                            std::span<const StateGrid> grids, const Dataset& data,
                            const EncoderConfig& config, std::size_t n,
                            const FrequencyFilter& filter, PoolBuildStats* stats = nullptr);

// Runs stages 1-4 and evaluates on the test split. Stage failures surface as
// StageError.
PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data);
PipelineResult run_pipeline(const PipelineConfig& config);

PatientAnalysis analyze_patient(const TrainedModel& model, const PatientRecord& record);
// Probabilities for the given records; `stage1_only` ignores cohorts.
std::vector<double> predict_probabilities(const TrainedModel& model, const Dataset& data,
                                          std::span<const std::size_t> indices, bool stage1_only);
// Stage-2 states of every record in `split` under a trained model.
std::vector<StateGrid> split_state_grids(const TrainedModel& model, const Dataset& data, Split split);
EvalResult evaluate_split(const TrainedModel& model, const Dataset& data, Split split,
                          bool stage1_only = false);

// Artifact directory: model.json, model.params, states.json, pool.jsonl.
void save_model(const TrainedModel& model, const std::string& dir);
TrainedModel load_model(const std::string& dir);
std::string serialize_states(const std::vector<FeatureStateModel>& states,
                             std::span<const std::string> names);
std::vector<FeatureStateModel> deserialize_states(const std::string& text);
std::string eval_to_json(const EvalResult& eval);

}  // namespace cohortnet
