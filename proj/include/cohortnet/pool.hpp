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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cohortnet/discovery.hpp"

namespace cohortnet {

// Label-derived part of a cohort representation.
struct LabelStats {
  static constexpr std::size_t kWidth = 3;
  double pos_rate = 0.0;
  double log_frequency = 0.0;  // log1p(frequency) / log1p(train patients * T)
  double log_patients = 0.0;   // log1p(patients) / log1p(train patients)
};

struct Cohort {
  CohortPattern pattern;
  // Mean anchor representation over all occurrences, then the LabelStats.
  std::vector<double> representation;
  std::size_t frequency = 0;  // matching (patient, step) cells
  std::size_t patients = 0;   // distinct patients among them
  double pos_rate = 0.0;      // positive distinct patients / distinct patients
};

struct FrequencyFilter {
  std::size_t min_occurrences = 50;
  std::size_t min_patients = 10;
};

// Cohorts grouped by anchor feature plus an exact-match index. Cohorts of one
// anchor are bucketed by the feature set of their pattern; each bucket maps
// the projected state tuple to the cohort.
class CohortPool {
 public:
  CohortPool() = default;
  CohortPool(std::size_t num_features, std::size_t representation_width);

  std::size_t num_features() const { return by_anchor_.size(); }
  std::size_t representation_width() const { return representation_width_; }
  std::size_t size() const;  // |C| = sum_i |C_i|
  bool empty() const { return size() == 0; }

  const std::vector<Cohort>& cohorts(std::size_t anchor) const { return by_anchor_.at(anchor); }
  const Cohort& cohort(std::size_t anchor, std::size_t q) const { return by_anchor_.at(anchor).at(q); }

  // Appends and indexes a cohort. Throws ValidationError for a duplicate
  // pattern or a representation of the wrong width.
  std::size_t add(Cohort cohort);
  std::optional<std::size_t> find(const CohortPattern& pattern) const;

  // Every cohort of `anchor` whose pattern matches the states at step t.
  void match_step(const StateGrid& grid, std::size_t t, std::size_t anchor,
                  std::vector<std::uint32_t>& out) const;

  struct Bucket {
    std::vector<std::uint32_t> features;
    std::unordered_map<std::string, std::uint32_t> lookup;
  };
  const std::vector<Bucket>& buckets(std::size_t anchor) const { return buckets_.at(anchor); }

 private:
  std::size_t representation_width_ = 0;
  std::vector<std::vector<Cohort>> by_anchor_;
  std::vector<std::vector<Bucket>> buckets_;
};

// Key of a state tuple inside a bucket.
std::string state_key(std::span<const StateId> states);

// Inverted (feature, state) -> cell postings over a set of state grids.
class StateIndex {
 public:
  explicit StateIndex(std::span<const StateGrid> grids);
  // Every (patient, step) whose states equal the pattern on its features,
  // ascending. Intersects the postings of the pattern's items.
  std::vector<Occurrence> retrieve(const CohortPattern& pattern) const;

 private:
  std::size_t num_features_ = 0;
  std::size_t num_steps_ = 0;
  // postings_[f][s] lists cell ids patient * T + step in ascending order.
  std::vector<std::vector<std::vector<std::uint32_t>>> postings_;
};

std::vector<Occurrence> retrieve_patients(const CohortPattern& pattern, const StateIndex& index);

std::vector<PatternOccurrences> apply_frequency_filter(std::span<const PatternOccurrences> patterns,
                                                       const FrequencyFilter& filter);

// Representation access: h_i^t of `patient` at `step` for feature `anchor`.
using RepresentationFn =
    std::function<std::span<const double>(std::size_t patient, std::size_t anchor, std::size_t step)>;

// Occurrences are summed in the given (ascending) order, then divided by the
// count. Throws ValidationError when `occurrences` is empty.
Cohort build_cohort(const CohortPattern& pattern, std::span<const Occurrence> occurrences,
                    const RepresentationFn& representation, std::span<const int> labels,
                    std::size_t train_patients, std::size_t num_steps);

struct PoolBuildStats {
  std::size_t enumerated_patterns = 0;
  std::size_t surviving_patterns = 0;
};

// enumerate -> filter -> retrieve every full match -> build -> index.
CohortPool build_pool(std::span<const StateGrid> states, std::span<const std::vector<double>> alphas,
                      const RepresentationFn& representation, std::span<const int> labels,
                      std::size_t n, const FrequencyFilter& filter, std::size_t rep_dim,
                      PoolBuildStats* stats = nullptr);

// Versioned newline-delimited JSON; the index is rebuilt on load.
std::string serialize_pool(const CohortPool& pool);
CohortPool deserialize_pool(const std::string& text);
void save_pool(const CohortPool& pool, const std::string& path);
CohortPool load_pool(const std::string& path);

}  // namespace cohortnet
