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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cohortnet/discovery.hpp"
#include "cohortnet/pipeline.hpp"
#include "cohortnet/pool.hpp"

namespace cohortnet {

struct FeatureStateReport {
  std::size_t feature = 0;
  std::string name;
  std::vector<StateSummary> summaries;  // index = state id
  // transitions[a][b]: cells in state a at t followed by state b at t + 1.
  std::vector<std::vector<std::size_t>> transitions;
  // coexistence[g][a][b]: cells where this feature is in state a and
  // feature g is in state b at the same step. Empty for g == feature.
  std::vector<std::vector<std::vector<std::size_t>>> coexistence;

  std::size_t total_transitions() const;
};

struct StateReport {
  std::size_t patients = 0;
  std::size_t num_steps = 0;
  std::vector<FeatureStateReport> features;
};

StateReport build_state_report(std::span<const FeatureStateModel> models,
                               std::span<const StateGrid> grids,
                               std::span<const std::string> names);
// One JSON object per feature.
std::string state_report_ndjson(const StateReport& report);

// One JSON object per (feature, step): the interaction weights over the
// other features.
std::string alpha_heatmap_ndjson(const EncoderOutput& encoding, std::span<const std::string> names,
                                 const std::string& patient_id);

// Plain-text table: Cohort, Frequency, Patients, Pos-Rate, Cohort Pattern.
// Rows grouped by anchor, then by descending frequency.
std::string cohort_table(const CohortPool& pool, std::span<const std::string> names);
// One JSON object per cohort.
std::string cohort_ndjson(const CohortPool& pool, std::span<const std::string> names);

// Structured per-patient breakdown: base and calibrated probability, z,
// feature scores and per-cohort rows with attention and evidence.
std::string calibration_report_json(const TrainedModel& model, const PatientAnalysis& analysis,
                                    const std::string& patient_id);

// Writes every report for a trained model into `dir`: states.ndjson,
// cohorts.ndjson and cohort_table.txt.
void emit_model_reports(const TrainedModel& model, std::span<const StateGrid> train_grids,
                        const std::string& dir);

}  // namespace cohortnet
