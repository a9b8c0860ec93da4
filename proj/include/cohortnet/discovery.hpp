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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cohortnet {

using StateId = std::uint16_t;
// Reserved state for a feature that never appears in the record.
inline constexpr StateId kMissingState = 0;

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // stop when every centroid moves less than this
  std::size_t restarts = 3;  // independent k-means++ seeds, best inertia kept
};

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim, sorted lexicographically
  std::vector<std::uint32_t> assignment;
  double inertia = 0.0;
  // Inertia after every assignment step of the kept run.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. k is reduced to the number of
// distinct points when there are fewer; empty clusters are reseeded with the
// point farthest from its centroid.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, std::size_t k,
                    std::uint64_t seed, const KMeansOptions& options = {});

struct StateSummary {
  double mean_raw = 0.0;
  std::size_t count = 0;
};

// States of one feature: s0 is reserved for absence, s1..sk map to the
// centroid rows 0..k-1.
struct FeatureStateModel {
  std::size_t feature = 0;
  std::size_t requested_k = 0;
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;
  std::vector<StateSummary> summaries;  // k + 1 entries, index = state id
  std::vector<double> inertia_history;

  std::size_t num_states() const { return k + 1; }
  std::span<const double> centroid(StateId s) const {
    return {centroids.data() + (s - 1) * dim, dim};
  }
};

// `points` are the fused representations of the feature at every
// (train patient, step) where the feature is present.
FeatureStateModel fit_states(std::size_t feature, std::span<const double> points,
                             std::size_t dim, std::size_t k, std::uint64_t seed,
                             const KMeansOptions& options = {});

// Nearest centroid by Euclidean distance, ties to the lowest state id;
// kMissingState when the feature is absent or the model has no centroids.
StateId assign_state(std::span<const double> o, bool present, const FeatureStateModel& model);

// Feature states of one patient, F x T.
struct StateGrid {
  std::size_t num_features = 0;
  std::size_t num_steps = 0;
  std::vector<StateId> states;
  StateId at(std::size_t f, std::size_t t) const { return states[f * num_steps + t]; }
  StateId& at(std::size_t f, std::size_t t) { return states[f * num_steps + t]; }
};

struct PatternMask {
  std::size_t anchor = 0;
  std::vector<std::uint8_t> psi;
  std::size_t ones() const;
};

// psi = topN(alpha_i, n) + onehot(i). Ties go to the lowest feature index.
// Throws ConfigError when n >= F.
PatternMask build_pattern_mask(std::span<const double> alpha, std::size_t anchor, std::size_t n);

struct PatternItem {
  std::uint32_t feature = 0;
  StateId state = 0;
  friend auto operator<=>(const PatternItem&, const PatternItem&) = default;
};

// (feature, state) pairs sorted by feature, attached to an anchor feature.
struct CohortPattern {
  std::size_t anchor = 0;
  std::vector<PatternItem> items;

  std::vector<std::uint32_t> features() const;
  bool contains_feature(std::size_t f) const;
  // Anchor first, then companions in feature order, e.g. "HR(S3)/RR(S1)".
  std::string describe(std::span<const std::string> feature_names) const;
  friend auto operator<=>(const CohortPattern&, const CohortPattern&) = default;
};

struct CohortPatternHash {
  std::size_t operator()(const CohortPattern& p) const;
};

struct Occurrence {
  std::uint32_t patient = 0;
  std::uint32_t step = 0;
  friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

struct PatternOccurrences {
  CohortPattern pattern;
  std::vector<Occurrence> occurrences;  // ascending (patient, step)
  std::size_t distinct_patients() const;
};

// For every patient p, step t and anchor i: eta = s^t restricted to the mask
// built from alpha_i^t. Occurrences are grouped by identical (anchor, eta);
// the result is sorted by pattern. `alphas[p]` uses the EncoderOutput layout
// ((i * T + t) * F + j).
std::vector<PatternOccurrences> enumerate_patterns(std::span<const StateGrid> states,
                                                   std::span<const std::vector<double>> alphas,
                                                   std::size_t n);

}  // namespace cohortnet
