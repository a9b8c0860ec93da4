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
#include <optional>
#include <string>

#include "cohortnet/data.hpp"
#include "cohortnet/discovery.hpp"
#include "cohortnet/pool.hpp"

namespace cohortnet {

// Everything a pipeline run needs. Loaded from a single JSON object; see
// README for the key list. Environment overrides: COHORTNET_SEED,
// COHORTNET_DATA, COHORTNET_SCHEMA, COHORTNET_OUTPUT.
struct PipelineConfig {
  // Data: either a dataset file + schema, or an inline synthetic plan.
  std::string data_path;
  std::string schema_path;
  std::optional<SyntheticPlan> synthetic;
  std::string output_dir = "cohortnet_out";

  std::uint64_t seed = 42;
  std::optional<std::uint64_t> split_seed;  // defaults to seed
  SplitRatios split;

  // Encoder
  std::size_t d_e = 16, d_t = 16, d_o = 8, d_h = 16, d_p = 4;
  // Discovery
  std::size_t k = 7;
  std::size_t n = 2;
  KMeansOptions kmeans;
  FrequencyFilter filter;
  // Exploitation
  std::size_t d_a = 16;
  std::size_t d_v = 0;  // 0 means d_p
  bool use_cohorts = true;
  bool finetune_head = true;
  // Also update the encoder during stage 4 (pool and states stay frozen).
  bool joint_finetune = false;

  // Optimisation
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs_stage1 = 30;
  std::size_t epochs_stage4 = 30;
  std::size_t patience = 10;

  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  std::size_t effective_d_v() const { return d_v == 0 ? d_p : d_v; }
  // Throws ConfigError.
  void validate() const;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path, bool apply_env = true);
void apply_env_overrides(PipelineConfig& config);
std::string config_to_json(const PipelineConfig& config);

}  // namespace cohortnet
