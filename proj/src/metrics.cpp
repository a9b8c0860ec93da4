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

#include "cohortnet/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "cohortnet/errors.hpp"
#include "cohortnet/exploit.hpp"

namespace cohortnet {

namespace {

void require_both_classes(std::span<const double> scores, std::span<const int> labels,
                          const char* metric) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(metric) + ": scores and labels differ in length");
  }
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  if (pos == 0 || pos == labels.size()) {
    throw MetricError(std::string(metric) + " is undefined without both label classes");
  }
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  require_both_classes(scores, labels, "AUC-ROC");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tie groups.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        ++pos;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(pos);
  const double nn = static_cast<double>(n - pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  require_both_classes(scores, labels, "AUC-PR");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Extended-precision accumulation, one rounding at the end.
  long double sum = 0.0L;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[order[r]] != 1) continue;
    ++hits;
    sum += static_cast<long double>(hits) / static_cast<long double>(r + 1);
  }
  return static_cast<double>(sum / static_cast<long double>(hits));
}

double f1_score(std::span<const double> scores, std::span<const int> labels, double threshold) {
  require_both_classes(scores, labels, "F1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++tp;
    if (pred && labels[i] != 1) ++fp;
    if (!pred && labels[i] == 1) ++fn;
  }
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalResult evaluate(std::span<const double> scores, std::span<const int> labels) {
  EvalResult r;
  r.auc_roc = auc_roc(scores, labels);
  r.auc_pr = auc_pr(scores, labels);
  r.f1 = f1_score(scores, labels, 0.5);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= 0.5;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++r.tp;
    if (pred && !pos) ++r.fp;
    if (!pred && pos) ++r.fn;
    if (!pred && !pos) ++r.tn;
  }
  return r;
}

double selection_score(std::span<const double> probabilities, std::span<const int> labels) {
  try {
    return auc_pr(probabilities, labels);
  } catch (const MetricError&) {
    return -bce_loss(probabilities, labels);
  }
}

}  // namespace cohortnet
