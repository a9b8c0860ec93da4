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

namespace cohortnet {

// Area under the ROC curve as the Mann-Whitney statistic; tied
// positive/negative pairs count 0.5. Throws MetricError for single-class input.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over positives, in descending score order, of the
// precision at that rank, divided by the number of positives. Equal scores
// keep their input order. Throws MetricError for single-class input.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

// F1 with "score >= threshold" predicted positive; 0 when precision + recall
// is 0. Throws MetricError for single-class input.
double f1_score(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

struct EvalResult {
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // at threshold 0.5

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

EvalResult evaluate(std::span<const double> scores, std::span<const int> labels);

// Model-selection score: AUC-PR, or the negated mean BCE when the labels
// hold a single class.
double selection_score(std::span<const double> probabilities, std::span<const int> labels);

}  // namespace cohortnet
