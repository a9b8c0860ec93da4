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

#include <cmath>
#include <vector>

#include "cohortnet/errors.hpp"
#include "cohortnet/metrics.hpp"
#include "cohortnet/rng.hpp"
#include "doctest.h"

using namespace cohortnet;

namespace {

using Scores = std::vector<double>;
using Labels = std::vector<int>;

double pairs_roc(const Scores& s, const Labels& y) {
  double num = 0, den = 0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] == 1 && y[b] == 0) {
        den += 1;
        num += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
  return num / den;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(auc_pr(Scores{0.9, 0.8, 0.3, 0.2}, Labels{1, 1, 0, 0}) == 1.0);
  CHECK(auc_pr(Scores{0.9, 0.8, 0.7, 0.6}, Labels{1, 0, 1, 0}) == 5.0 / 6.0);
  // Positives at ranks 3 and 4: (1/3 + 2/4) / 2.
  CHECK(auc_pr(Scores{0.9, 0.8, 0.7, 0.6}, Labels{0, 0, 1, 1}) == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
  // Ties keep input order.
  CHECK(auc_pr(Scores{0.5, 0.5}, Labels{0, 1}) == 0.5);
  CHECK(auc_pr(Scores{0.5, 0.5}, Labels{1, 0}) == 1.0);
}

TEST_CASE("roc and f1 examples") {
  CHECK(auc_roc(Scores{0.9, 0.8, 0.3, 0.2}, Labels{1, 1, 0, 0}) == 1.0);
  CHECK(auc_roc(Scores{0.9, 0.8, 0.3, 0.2}, Labels{0, 0, 1, 1}) == 0.0);
  CHECK(auc_roc(Scores{0.4, 0.4}, Labels{0, 1}) == 0.5);
  CHECK(f1_score(Scores{0.9, 0.9, 0.9, 0.9}, Labels{1, 0, 1, 0}) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(Scores{0.1, 0.1}, Labels{1, 0}) == 0.0);
  CHECK(f1_score(Scores{0.5, 0.1}, Labels{1, 0}) == 1.0);  // threshold is inclusive
}

TEST_CASE("single-class and mismatched input are rejected") {
  CHECK_THROWS_AS(auc_pr(Scores{0.1, 0.2}, Labels{1, 1}), MetricError);
  CHECK_THROWS_AS(auc_roc(Scores{0.1, 0.2}, Labels{0, 0}), MetricError);
  CHECK_THROWS_AS(f1_score(Scores{0.1, 0.2}, Labels{0, 0}), MetricError);
  CHECK_THROWS_AS(auc_pr(Scores{0.1}, Labels{1, 0}), DimensionError);
}

TEST_CASE("evaluate bundles metrics and confusion counts") {
  const Scores s{0.9, 0.6, 0.4, 0.2, 0.55};
  const Labels y{1, 0, 1, 0, 1};
  const EvalResult e = evaluate(s, y);
  CHECK(e.tp == 2);
  CHECK(e.fp == 1);
  CHECK(e.fn == 1);
  CHECK(e.tn == 1);
  CHECK(e.auc_roc == pairs_roc(s, y));
  CHECK(e.auc_pr == auc_pr(s, y));
  CHECK(e.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("roc matches all-pairs counting on random tied inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(15);
    Scores s(n);
    Labels y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = double(rng.below(5)) / 4.0;
      y[k] = int(rng.below(2));
    }
    y[0] = 1, y[1] = 0;
    CHECK(auc_roc(s, y) == doctest::Approx(pairs_roc(s, y)).epsilon(1e-12));
  }
}
