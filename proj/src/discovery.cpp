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

#include "cohortnet/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "cohortnet/errors.hpp"
#include "cohortnet/rng.hpp"

namespace cohortnet {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

std::size_t count_distinct(std::span<const double> points, std::size_t n, std::size_t dim) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto row_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(points.begin() + a * dim, points.begin() + (a + 1) * dim,
                                        points.begin() + b * dim, points.begin() + (b + 1) * dim);
  };
  std::sort(order.begin(), order.end(), row_less);
  std::size_t distinct = n > 0 ? 1 : 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row_less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

struct LloydRun {
  std::vector<double> centroids;
  std::vector<std::uint32_t> assignment;
  std::vector<double> history;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

LloydRun lloyd(std::span<const double> pts, std::size_t n, std::size_t dim, std::size_t k,
               Rng& rng, const KMeansOptions& opt) {
  LloydRun run;
  run.centroids.assign(k * dim, 0.0);
  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(n);
  std::copy_n(pts.begin() + first * dim, dim, run.centroids.begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(&pts[i * dim], &run.centroids[(c - 1) * dim], dim));
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
      // Guard against landing on a zero-weight tail through rounding.
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = rng.below(n);
    }
    std::copy_n(pts.begin() + pick * dim, dim, run.centroids.begin() + c * dim);
  }

  run.assignment.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  std::vector<double> next(k * dim, 0.0);
  const auto assign_all = [&] {
    double inertia = 0.0;
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      double best_d = sq_dist(&pts[i * dim], &run.centroids[0], dim);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(&pts[i * dim], &run.centroids[c * dim], dim);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::uint32_t>(c);
        }
      }
      run.assignment[i] = best;
      dist[i] = best_d;
      ++sizes[best];
      inertia += best_d;
    }
    // Reseed empty clusters with the farthest point from a cluster that
    // keeps at least one other member.
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[run.assignment[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      --sizes[run.assignment[far]];
      inertia -= dist[far];
      run.assignment[far] = static_cast<std::uint32_t>(c);
      dist[far] = 0.0;
      sizes[c] = 1;
      std::copy_n(pts.begin() + far * dim, dim, run.centroids.begin() + c * dim);
    }
    return inertia;
  };

  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    run.inertia = assign_all();
    run.history.push_back(run.inertia);
    ++run.iterations;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = &next[run.assignment[i] * dim];
      for (std::size_t j = 0; j < dim; ++j) dst[j] += pts[i * dim + j];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        std::copy_n(run.centroids.begin() + c * dim, dim, next.begin() + c * dim);
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) next[c * dim + j] /= static_cast<double>(sizes[c]);
      shift = std::max(shift, std::sqrt(sq_dist(&next[c * dim], &run.centroids[c * dim], dim)));
    }
    run.centroids.swap(next);
    if (shift < opt.tolerance) break;
  }
  // Final assignment against the last centroids.
  run.inertia = assign_all();
  run.history.push_back(run.inertia);
  return run;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim, std::size_t k,
                    std::uint64_t seed, const KMeansOptions& options) {
  if (dim == 0) throw DimensionError("kmeans: dimension must be >= 1");
  if (points.size() % dim != 0) throw DimensionError("kmeans: point buffer not a multiple of dim");
  if (k == 0) throw ConfigError("kmeans: k must be >= 1");
  const std::size_t n = points.size() / dim;
  KMeansResult res;
  res.dim = dim;
  if (n == 0) return res;
  res.k = std::min(k, count_distinct(points, n, dim));

  Rng rng(seed);
  LloydRun best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
    LloydRun run = lloyd(points, n, dim, res.k, rng, options);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }

  // Canonical order: centroids sorted lexicographically.
  std::vector<std::size_t> order(res.k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(best.centroids.begin() + a * dim,
                                        best.centroids.begin() + (a + 1) * dim,
                                        best.centroids.begin() + b * dim,
                                        best.centroids.begin() + (b + 1) * dim);
  });
  std::vector<std::uint32_t> rank(res.k);
  res.centroids.resize(res.k * dim);
  for (std::size_t c = 0; c < res.k; ++c) {
    rank[order[c]] = static_cast<std::uint32_t>(c);
    std::copy_n(best.centroids.begin() + order[c] * dim, dim, res.centroids.begin() + c * dim);
  }
  res.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.assignment[i] = rank[best.assignment[i]];
  res.inertia = best.inertia;
  res.inertia_history = std::move(best.history);
  res.iterations = best.iterations;
  return res;
}

FeatureStateModel fit_states(std::size_t feature, std::span<const double> points,
                             std::size_t dim, std::size_t k, std::uint64_t seed,
                             const KMeansOptions& options) {
  FeatureStateModel m;
  m.feature = feature;
  m.requested_k = k;
  m.dim = dim;
  const KMeansResult km = kmeans(points, dim, k, seed, options);
  m.k = km.k;
  m.centroids = km.centroids;
  m.inertia_history = km.inertia_history;
  m.summaries.assign(m.k + 1, StateSummary{});
  for (auto a : km.assignment) ++m.summaries[a + 1].count;
  return m;
}

StateId assign_state(std::span<const double> o, bool present, const FeatureStateModel& model) {
  if (!present || model.k == 0) return kMissingState;
  if (o.size() != model.dim) throw DimensionError("assign_state: representation width mismatch");
  StateId best = 1;
  double best_d = sq_dist(o.data(), model.centroids.data(), model.dim);
  for (std::size_t c = 1; c < model.k; ++c) {
    const double d = sq_dist(o.data(), model.centroids.data() + c * model.dim, model.dim);
    if (d < best_d) {
      best_d = d;
      best = static_cast<StateId>(c + 1);
    }
  }
  return best;
}

std::size_t PatternMask::ones() const {
  return static_cast<std::size_t>(std::count(psi.begin(), psi.end(), std::uint8_t{1}));
}

PatternMask build_pattern_mask(std::span<const double> alpha, std::size_t anchor, std::size_t n) {
  const std::size_t F = alpha.size();
  if (anchor >= F) throw DimensionError("build_pattern_mask: anchor out of range");
  if (n >= F) {
    throw ConfigError("build_pattern_mask: n = " + std::to_string(n) + " needs n < F = " +
                      std::to_string(F));
  }
  std::vector<std::size_t> others;
  others.reserve(F - 1);
  for (std::size_t j = 0; j < F; ++j) {
    if (j != anchor) others.push_back(j);
  }
  std::stable_sort(others.begin(), others.end(),
                   [&](std::size_t a, std::size_t b) { return alpha[a] > alpha[b]; });
  PatternMask m;
  m.anchor = anchor;
  m.psi.assign(F, 0);
  m.psi[anchor] = 1;
  for (std::size_t r = 0; r < n; ++r) m.psi[others[r]] = 1;
  return m;
}

std::vector<std::uint32_t> CohortPattern::features() const {
  std::vector<std::uint32_t> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.feature);
  return out;
}

bool CohortPattern::contains_feature(std::size_t f) const {
  return std::any_of(items.begin(), items.end(), [f](const PatternItem& it) { return it.feature == f; });
}

std::string CohortPattern::describe(std::span<const std::string> names) const {
  const auto label = [&](const PatternItem& it) {
    const std::string name = it.feature < names.size() ? names[it.feature] : "f" + std::to_string(it.feature);
    return name + "(S" + std::to_string(it.state) + ")";
  };
  std::string out;
  for (const auto& it : items) {
    if (it.feature == anchor) out = label(it);
  }
  for (const auto& it : items) {
    if (it.feature != anchor) out += "/" + label(it);
  }
  return out;
}

std::size_t CohortPatternHash::operator()(const CohortPattern& p) const {
  std::uint64_t h = 1469598103934665603ULL ^ p.anchor;
  for (const auto& it : p.items) {
    h = (h ^ it.feature) * 1099511628211ULL;
    h = (h ^ it.state) * 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

std::size_t PatternOccurrences::distinct_patients() const {
  std::size_t count = 0;
  for (std::size_t k = 0; k < occurrences.size(); ++k) {
    if (k == 0 || occurrences[k].patient != occurrences[k - 1].patient) ++count;
  }
  return count;
}

std::vector<PatternOccurrences> enumerate_patterns(std::span<const StateGrid> states,
                                                   std::span<const std::vector<double>> alphas,
                                                   std::size_t n) {
  if (states.size() != alphas.size()) throw DimensionError("enumerate_patterns: patient count mismatch");
  std::unordered_map<CohortPattern, std::vector<Occurrence>, CohortPatternHash> groups;
  CohortPattern key;
  for (std::size_t p = 0; p < states.size(); ++p) {
    const StateGrid& g = states[p];
    const std::size_t F = g.num_features;
    const std::size_t T = g.num_steps;
    if (alphas[p].size() != F * T * F) throw DimensionError("enumerate_patterns: attention shape mismatch");
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < F; ++i) {
        const std::span<const double> a(alphas[p].data() + (i * T + t) * F, F);
        const PatternMask mask = build_pattern_mask(a, i, n);
        key.anchor = i;
        key.items.clear();
        for (std::size_t j = 0; j < F; ++j) {
          if (mask.psi[j]) key.items.push_back({static_cast<std::uint32_t>(j), g.at(j, t)});
        }
        groups[key].push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(t)});
      }
    }
  }
  std::vector<PatternOccurrences> out;
  out.reserve(groups.size());
  for (auto& [pattern, occ] : groups) out.push_back({pattern, std::move(occ)});
  std::sort(out.begin(), out.end(),
            [](const PatternOccurrences& a, const PatternOccurrences& b) { return a.pattern < b.pattern; });
  return out;
}

}  // namespace cohortnet
