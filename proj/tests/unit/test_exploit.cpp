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
#include <numeric>

#include "cohortnet/encoder.hpp"
#include "cohortnet/errors.hpp"
#include "cohortnet/exploit.hpp"
#include "cohortnet/nn.hpp"
#include "cohortnet/pool.hpp"
#include "cohortnet/rng.hpp"
#include "doctest.h"

using namespace cohortnet;

namespace {

// Two features, d_h = 2, representation width 2, d_a = 2, d_v = 2, head width 2.
struct Fixture {
  ParamStore ps;
  CohortPool pool{2, 2};
  std::vector<double> h_last{1.0, 0.5, -0.5, 2.0};
  std::vector<double> h_tilde{0.3, -0.2};

  Fixture() {
    ps.add(pname::kHeadWeight, 1, 2).value.values = {0.4, 1.0};
    ps.add(pname::kHeadBias, 1, 1).value.values = {-0.1};
    ps.add(pname::kQuery, 2, 2).value.values = {1.0, 0.0, 0.5, -1.0};
    ps.add(pname::kKey, 2, 2).value.values = {0.2, 0.3, -0.4, 1.0};
    ps.add(pname::kValue, 2, 2).value.values = {1.0, 2.0, 0.0, -1.0};
    ps.add(pname::kCalibration, 2, 2).value.values = {0.7, -0.3, 1.5, 0.25};
  }

  void add(std::size_t anchor, StateId s, std::vector<double> rep) {
    Cohort c;
    c.pattern.anchor = anchor;
    c.pattern.items = {{std::uint32_t(anchor), s}};
    c.representation = std::move(rep);
    c.frequency = 60;
    c.patients = 20;
    pool.add(c);
  }
};

CohortBitmap bitmap_all(const CohortPool& pool) {
  CohortBitmap b;
  for (std::size_t i = 0; i < pool.num_features(); ++i) b.bits.push_back(std::vector<std::uint8_t>(pool.cohorts(i).size(), 1));
  return b;
}

}  // namespace

TEST_CASE("bitmap agrees with brute-force matching and is monotone in time") {
  Rng rng(8);
  const std::size_t F = 3, T = 5;
  CohortPool pool(F, 1);
  for (int q = 0; q < 30; ++q) {
    Cohort c;
    c.pattern.anchor = rng.below(F);
    const std::size_t other = (c.pattern.anchor + 1 + rng.below(F - 1)) % F;
    c.pattern.items = {{std::uint32_t(c.pattern.anchor), StateId(1 + rng.below(2))},
                       {std::uint32_t(other), StateId(rng.below(3))}};
    std::sort(c.pattern.items.begin(), c.pattern.items.end());
    c.representation = {0.0};
    if (!pool.find(c.pattern)) pool.add(c);
  }
  for (int trial = 0; trial < 20; ++trial) {
    StateGrid g{F, T, std::vector<StateId>(F * T)};
    for (auto& s : g.states) s = StateId(rng.below(3));
    const CohortBitmap bm = identify_cohorts(g, pool);
    StateGrid shorter{F, T - 2, {}};
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T - 2; ++t) shorter.states.push_back(g.at(f, t));
    const CohortBitmap early = identify_cohorts(shorter, pool);
    for (std::size_t i = 0; i < F; ++i)
      for (std::size_t q = 0; q < pool.cohorts(i).size(); ++q) {
        bool hit = false;
        for (std::size_t t = 0; t < T; ++t) {
          bool all = true;
          for (const auto& it : pool.cohort(i, q).pattern.items) all &= g.at(it.feature, t) == it.state;
          hit |= all;
        }
        CHECK(bool(bm.bits[i][q]) == hit);
        if (early.bits[i][q]) CHECK(bm.bits[i][q]);
      }
  }
}

TEST_CASE("single matched cohort gets full attention") {
  Fixture fx;
  fx.add(0, 1, {0.5, -1.0});
  const std::vector<std::uint32_t> m{0};
  const auto att = attend_cohorts(std::span(fx.h_last).first(2), fx.pool, 0, m, fx.ps);
  REQUIRE(att.beta.size() == 1);
  CHECK(att.beta[0] == 1.0);
  CHECK(att.h_prime[0] == doctest::Approx(1.0 * 0.5 + 2.0 * -1.0));
  CHECK(att.h_prime[1] == doctest::Approx(1.0));
  const auto none = attend_cohorts(std::span(fx.h_last).first(2), fx.pool, 0, {}, fx.ps);
  CHECK(none.beta.empty());
  CHECK(none.h_prime == std::vector<double>{0.0, 0.0});
}

TEST_CASE("identical keys give uniform attention") {
  Fixture fx;
  for (StateId s = 1; s <= 4; ++s) fx.add(1, s, {0.3, 0.3});
  const std::vector<std::uint32_t> m{0, 1, 2, 3};
  const auto att = attend_cohorts(std::span(fx.h_last).last(2), fx.pool, 1, m, fx.ps);
  for (double b : att.beta) CHECK(b == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("three matched cohorts match a scalar hand computation") {
  Fixture fx;
  const std::vector<std::vector<double>> reps{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 2.0}};
  for (StateId s = 1; s <= 3; ++s) fx.add(0, s, reps[s - 1]);
  const double h0 = 1.0, h1 = 0.5;
  // query = W_Q h = [1*h0 + 0*h1, 0.5*h0 - 1*h1]
  const double q0 = h0, q1 = 0.5 * h0 - h1;
  double logits[3], vals[3][2];
  for (int k = 0; k < 3; ++k) {
    const double c0 = reps[k][0], c1 = reps[k][1];
    const double k0 = 0.2 * c0 + 0.3 * c1, k1 = -0.4 * c0 + 1.0 * c1;
    logits[k] = q0 * k0 + q1 * k1;
    vals[k][0] = 1.0 * c0 + 2.0 * c1;
    vals[k][1] = -c1;
  }
  const double mx = std::max({logits[0], logits[1], logits[2]});
  double z = 0;
  for (double l : logits) z += std::exp(l - mx);
  double beta[3], hp[2] = {0, 0};
  for (int k = 0; k < 3; ++k) {
    beta[k] = std::exp(logits[k] - mx) / z;
    hp[0] += beta[k] * vals[k][0];
    hp[1] += beta[k] * vals[k][1];
  }
  const std::vector<std::uint32_t> m{0, 1, 2};
  const auto att = attend_cohorts(std::span(fx.h_last).first(2), fx.pool, 0, m, fx.ps);
  for (int k = 0; k < 3; ++k) CHECK(att.beta[k] == doctest::Approx(beta[k]).epsilon(1e-14));
  CHECK(att.h_prime[0] == doctest::Approx(hp[0]).epsilon(1e-14));
  CHECK(att.h_prime[1] == doctest::Approx(hp[1]).epsilon(1e-14));

  // Calibration decomposition with w^c_0 = [0.7, -0.3].
  const auto rep = predict(fx.h_tilde, fx.h_last, bitmap_all(fx.pool), fx.pool, fx.ps);
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double s = 0.7 * beta[k] * vals[k][0] - 0.3 * beta[k] * vals[k][1];
    CHECK(rep.features[0].cohort_scores[k] == doctest::Approx(s).epsilon(1e-13));
    total += s;
  }
  CHECK(rep.features[1].score == 0.0);
  CHECK(rep.z == doctest::Approx(total).epsilon(1e-13));
  double by_feature = 0.0;
  for (const auto& f : rep.features) {
    double by_cohort = 0.0;
    for (double s : f.cohort_scores) by_cohort += s;
    CHECK(f.score == by_cohort);
    by_feature += f.score;
  }
  CHECK(rep.z == by_feature);
  const double base = 0.4 * 0.3 + 1.0 * -0.2 - 0.1;
  CHECK(rep.base_logit == doctest::Approx(base).epsilon(1e-15));
  CHECK(rep.logit == rep.base_logit + rep.z);
  CHECK(rep.probability == doctest::Approx(1.0 / (1.0 + std::exp(-(base + total)))).epsilon(1e-14));
}

TEST_CASE("no matches leave the base prediction and zero parameters give one half") {
  Fixture fx;
  fx.add(0, 1, {1.0, 1.0});
  CohortBitmap empty = bitmap_all(fx.pool);
  empty.bits[0][0] = 0;
  const auto rep = predict(fx.h_tilde, fx.h_last, empty, fx.pool, fx.ps);
  CHECK(rep.z == 0.0);
  CHECK(rep.probability == rep.base_probability);

  for (auto& name : fx.ps.names()) std::fill(fx.ps.at(name).value.values.begin(), fx.ps.at(name).value.values.end(), 0.0);
  CHECK(predict(fx.h_tilde, fx.h_last, bitmap_all(fx.pool), fx.pool, fx.ps).probability == 0.5);
}

TEST_CASE("unmatched cohorts do not influence the prediction") {
  Fixture fx;
  fx.add(0, 1, {1.0, -1.0});
  fx.add(1, 2, {0.5, 0.5});
  CohortPool sub(2, 2);
  sub.add(fx.pool.cohort(0, 0));
  fx.add(0, 2, {3.0, 3.0});  // present in the full pool only, not matched
  CohortBitmap full = bitmap_all(fx.pool);
  full.bits[0][1] = 0;
  full.bits[1][0] = 0;
  CohortBitmap part = bitmap_all(sub);
  const auto a = predict(fx.h_tilde, fx.h_last, full, fx.pool, fx.ps);
  const auto b = predict(fx.h_tilde, fx.h_last, part, sub, fx.ps);
  CHECK(a.probability == b.probability);
  CHECK(a.z == b.z);
}

TEST_CASE("binary cross-entropy examples") {
  const std::vector<double> half{0.5};
  const std::vector<int> one{1};
  CHECK(bce_loss(half, one) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(std::vector<double>{1.0}, one) == doctest::Approx(-std::log(1.0 - 1e-7)));
  const std::vector<double> two{0.8, 0.3};
  const std::vector<int> lab{1, 0};
  CHECK(bce_loss(two, lab) == doctest::Approx(0.5 * (-std::log(0.8) - std::log(0.7))));
  CHECK_THROWS_AS(bce_loss(two, one), DimensionError);
}

TEST_CASE("exploitation training lowers the loss and handles an empty pool") {
  Rng rng(12);
  const std::size_t F = 2, d_h = 3, d_p = 2;
  CohortPool pool(F, d_h + 3);
  for (StateId s = 1; s <= 2; ++s) {
    Cohort c;
    c.pattern.anchor = 0;
    c.pattern.items = {{0, s}};
    c.representation = {s == 1 ? 1.0 : -1.0, 0.0, 0.5, s == 1 ? 0.9 : 0.1, 0.5, 0.5};
    pool.add(c);
  }
  ParamStore ps;
  ps.add(pname::kHeadWeight, 1, F * d_p);
  ps.add(pname::kHeadBias, 1, 1);
  init_exploit_params(ps, F, d_h, d_h + 3, ExploitConfig{4, 2}, rng);
  std::vector<ExploitSample> train;
  for (int k = 0; k < 64; ++k) {
    ExploitSample s;
    s.label = k % 2;
    s.h_tilde_last.assign(F * d_p, 0.1);
    s.h_last.resize(F * d_h);
    for (auto& v : s.h_last) v = rng.normal();
    s.bitmap.bits = {{std::uint8_t(s.label == 1), std::uint8_t(s.label == 0)}, {}};
    train.push_back(s);
  }
  const auto loss_of = [&](const ParamStore& p) {
    std::vector<double> pred;
    std::vector<int> lab;
    for (const auto& s : train) {
      pred.push_back(predict(s.h_tilde_last, s.h_last, s.bitmap, pool, p).probability);
      lab.push_back(s.label);
    }
    return bce_loss(pred, lab);
  };
  const double before = loss_of(ps);
  ExploitTrainOptions opt;
  opt.epochs = 40;
  opt.batch_size = 8;
  opt.learning_rate = 1e-2;
  const TrainLog log = train_exploitation(ps, pool, train, train, opt);
  CHECK(log.train_loss.front() < before + 1e-12);
  CHECK(log.train_loss.back() < log.train_loss.front());
  CHECK(loss_of(ps) < before);
  CHECK(log.valid_score.size() == log.train_loss.size() + 1);

  ParamStore ps2 = ps;
  const std::string snapshot = serialize_params(ps2);
  const TrainLog degenerate = train_exploitation(ps2, CohortPool(F, d_h + 3), train, train, opt);
  CHECK(degenerate.degenerate);
  CHECK(serialize_params(ps2) == snapshot);
}
