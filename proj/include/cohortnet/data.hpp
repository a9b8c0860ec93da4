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
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cohortnet {

// Bounds are on the standardized scale and feed the bi-directional embedding.
struct FeatureSpec {
  std::string name;
  double lower = -3.0;
  double upper = 3.0;
};

struct Schema {
  std::vector<FeatureSpec> features;
  // 0 means "infer from the first record".
  std::size_t num_steps = 0;
};

enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };
const char* split_name(Split s);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Record as read from disk, on the original scale. Values are feature-major
// (F x T) and NaN marks an unobserved cell.
struct RawRecord {
  std::string id;
  int label = 0;
  std::vector<double> values;
};

// Standardized, gap-filled record ready for encoding.
struct PatientRecord {
  std::string id;
  int label = 0;
  std::size_t num_features = 0;
  std::size_t num_steps = 0;
  std::vector<double> values;          // F x T
  std::vector<std::uint8_t> observed;  // F x T, 1 where the cell was measured
  std::vector<std::uint8_t> present;   // F, 0 when the feature never appears

  double value(std::size_t f, std::size_t t) const { return values[f * num_steps + t]; }
  bool is_observed(std::size_t f, std::size_t t) const {
    return observed[f * num_steps + t] != 0;
  }
  bool is_present(std::size_t f) const { return present[f] != 0; }
  std::span<const double> row(std::size_t f) const {
    return {values.data() + f * num_steps, num_steps};
  }
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
  double to_raw(std::size_t f, double z) const { return z * stddev[f] + mean[f]; }
};

struct Dataset {
  std::vector<FeatureSpec> features;
  std::size_t num_steps = 0;
  std::vector<PatientRecord> records;
  Standardization stats;
  std::vector<Split> splits;
  // Generator ground truth: planted pattern index per record, -1 for none.
  // Empty for datasets loaded from disk.
  std::vector<int> planted;

  std::size_t num_features() const { return features.size(); }
  std::size_t size() const { return records.size(); }
  std::vector<std::size_t> indices(Split s) const;
  // Throws LookupError for an unknown id.
  std::size_t find(const std::string& id) const;
};

// Deterministic permutation split. Valid and test sizes are floor(N * ratio);
// the remainder goes to train. Throws ConfigError when the ratios are
// negative or do not sum to 1.
std::vector<Split> split(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

// Splits, standardizes with train-only statistics, flags never-present
// features and forward-fills cell gaps (leading gaps become 0).
Dataset build_dataset(std::vector<FeatureSpec> features, std::size_t num_steps,
                      const std::vector<RawRecord>& raw, const SplitRatios& ratios,
                      std::uint64_t seed);

Schema load_schema(const std::string& path);
void save_schema(const Schema& schema, const std::string& path);

// Newline-delimited JSON, one record per line:
//   {"id": str, "label": 0|1, "features": {"<name>": [v_or_null x T]}}
// A feature key missing from a record means the feature never appeared.
std::vector<RawRecord> read_records(const std::string& path, Schema& schema);
std::vector<RawRecord> parse_records(const std::string& text, Schema& schema);
void write_records(const std::string& path, const Schema& schema,
                   const std::vector<RawRecord>& records);
std::string format_record(const Schema& schema, const RawRecord& record);

Dataset load_dataset(const std::string& path, const std::string& schema_path,
                     const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data with planted label-correlated patterns.

struct PlantedPattern {
  std::vector<std::size_t> features;
  std::vector<std::pair<double, double>> ranges;  // raw-scale [lo, hi] per feature
  double boosted_rate = 0.7;
  double injection_prob = 0.3;
};

struct SyntheticPlan {
  std::size_t num_features = 5;
  std::size_t num_steps = 8;
  std::size_t num_records = 2000;
  double base_rate = 0.1;
  std::vector<PlantedPattern> planted;
  double missing_rate = 0.1;
  // Probability that a non-planted feature is absent for a whole record.
  double absence_rate = 0.02;
  double noise_std = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Schema schema;
  std::vector<RawRecord> records;
  std::vector<int> planted;
};

// Throws ConfigError for an invalid plan.
void validate_plan(const SyntheticPlan& plan);
SyntheticData generate_records(const SyntheticPlan& plan);
Dataset generate_synthetic(const SyntheticPlan& plan, const SplitRatios& ratios = {});

SyntheticPlan parse_plan(const std::string& json_text);
std::string plan_to_json(const SyntheticPlan& plan);

}  // namespace cohortnet
