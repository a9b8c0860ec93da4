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
#include <vector>

#include "cohortnet/errors.hpp"
#include "cohortnet/nn.hpp"
#include "cohortnet/optim.hpp"
#include "cohortnet/rng.hpp"
#include "cohortnet/tape.hpp"
#include "cohortnet/tensor.hpp"
#include "doctest.h"

using namespace cohortnet;

namespace {

double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("rng is reproducible and in range") {
  Rng a(17), b(17), c(18);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
}

TEST_CASE("softmax sums to one and is shift invariant") {
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  const auto p = softmax(x);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> shifted = x;
  for (auto& v : shifted) v += 1000.0;
  const auto q = softmax(shifted);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-12));
  CHECK(softmax(std::vector<double>{}).empty());
  const auto eq = softmax(std::vector<double>{2.0, 2.0, 2.0, 2.0});
  for (double v : eq) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("sigmoid is stable at extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(1.3) == doctest::Approx(scalar_sigmoid(1.3)).epsilon(1e-15));
}

TEST_CASE("gru cell matches a scalar hand computation") {
  // input 1, hidden 1: W = [wz; wr; wn], U = [uz; ur; un], b = [bz; br; bn]
  const std::vector<double> w{0.3, -0.2, 0.5}, u{0.1, 0.4, -0.6}, b{0.05, -0.1, 0.2};
  const double x = 0.7, h = -0.4;
  const double z = scalar_sigmoid(0.3 * x + 0.1 * h + 0.05);
  const double r = scalar_sigmoid(-0.2 * x + 0.4 * h - 0.1);
  const double n = std::tanh(0.5 * x + (-0.6) * (r * h) + 0.2);
  const double expected = (1 - z) * h + z * n;
  const std::vector<double> xs{x}, hs{h};
  GruGates gates;
  const auto out = gru_cell_step(xs, hs, GruWeights{w, u, b, 1, 1}, &gates);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(gates.z[0] == doctest::Approx(z).epsilon(1e-14));

  Tape tape;
  const Var o = tape.gru_cell(tape.constant(w, 3, 1), tape.constant(u, 3, 1), tape.constant(b),
                              tape.constant(xs), tape.constant(hs), 1, 1);
  CHECK(tape.scalar(o) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gru cell rejects mismatched shapes") {
  const std::vector<double> w(6), u(6), b(6), x(3), h(2);
  CHECK_THROWS_AS(gru_cell_step(x, h, GruWeights{w, u, b, 1, 2}), DimensionError);
}

TEST_CASE("every tape op agrees with finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    ParamStore ps;
    ps.add_uniform("a", 3, 1, 1, rng);
    ps.add_uniform("b", 3, 1, 1, rng);
    ps.add_uniform("w", 3, 3, 3, rng);
    ps.add_uniform("g_w", 6, 3, 3, rng);
    ps.add_uniform("g_u", 6, 2, 2, rng);
    ps.add_uniform("g_b", 6, 1, 2, rng);
    const auto build = [&](Tape& t, ParamStore* train) {
      const auto bind = [&](const char* n) {
        return train ? t.param(train->at(n)) : t.constant(ps.at(n).value.values, ps.at(n).value.rows, ps.at(n).value.cols);
      };
      const Var a = bind("a"), b = bind("b"), w = bind("w");
      const Var m = t.mul(t.add(a, b), t.sub(a, t.scale(b, 0.5)));
      const Var s = t.sigmoid(t.matvec(w, m));
      const Var th = t.tanh(t.affine(w, a, b));
      const Var rows = t.blend_rows(w, w, 1, 0.3, 0.7);
      const Var parts[] = {s, th};
      const Var cat = t.concat(parts);
      const Var others[] = {th, rows, t.row(w, 2)};
      const Var att = t.softmax(t.dots(s, others));
      const Var mix = t.weighted_sum(att, others);
      const Var h0 = t.constant({0.1, -0.2});
      const Var g = t.gru_cell(bind("g_w"), bind("g_u"), bind("g_b"), mix, h0, 3, 2);
      const Var sum_parts[] = {t.dot(g, g), t.dot(cat, cat), t.dot(mix, a)};
      return t.bce_with_logit(t.sum(sum_parts), 1.0, 0.5);
    };
    const auto res = check_gradients(
        ps,
        [&] {
          Tape t;
          return t.scalar(build(t, nullptr));
        },
        [&] {
          Tape t;
          t.backward(build(t, &ps));
        });
    CHECK(res.checked == ps.parameter_count());
    worst = std::max(worst, res.max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("tape misuse raises state errors") {
  Tape t;
  CHECK_THROWS_AS(t.backward(Var{}), StateError);
  const Var v = t.constant({1.0, 2.0});
  CHECK_THROWS_AS(t.backward(v), StateError);
  const Var s = t.dot(v, v);
  t.backward(s);
  CHECK(t.grad(v)[0] == doctest::Approx(2.0));
  CHECK_THROWS_AS(t.backward(s), StateError);
  Tape fresh;
  CHECK_THROWS_AS(fresh.matvec(fresh.constant({1, 2, 3, 4}, 2, 2), fresh.constant({1.0})), DimensionError);
}

TEST_CASE("gradients accumulate additively across tapes") {
  ParamStore ps;
  ps.add("p", 1, 1).value.values[0] = 3.0;
  for (int k = 0; k < 2; ++k) {
    Tape t;
    const Var p = t.param(ps.at("p"));
    t.backward(t.dot(p, p));
  }
  CHECK(ps.at("p").grad.values[0] == doctest::Approx(12.0));
}

TEST_CASE("bce with logit matches the clamped formula") {
  Tape t;
  const Var z = t.constant({0.0});
  CHECK(t.scalar(t.bce_with_logit(z, 1.0)) == doctest::Approx(std::log(2.0)));
  Tape t2;
  const Var big = t2.constant({40.0});
  const Var loss = t2.bce_with_logit(big, 0.0);
  CHECK(t2.scalar(loss) == doctest::Approx(-std::log(1e-7)));
  t2.backward(loss);
  CHECK(t2.grad(big)[0] == 0.0);
}

TEST_CASE("adam on a scalar quadratic matches a hand-rolled reference") {
  ParamStore ps;
  ps.add("x", 1, 1).value.values[0] = 2.0;
  AdamState st = make_adam_state(ps);
  double x = 2.0, m = 0.0, v = 0.0;
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= 10; ++step) {
    // loss = (x - 0.5)^2
    ps.at("x").grad.values[0] = 2.0 * (ps.at("x").value.values[0] - 0.5);
    adam_step(ps, st);
    const double g = 2.0 * (x - 0.5);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, step));
    const double vh = v / (1 - std::pow(b2, step));
    x -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(ps.at("x").value.values[0] == doctest::Approx(x).epsilon(1e-14));
    CHECK(ps.at("x").grad.values[0] == 0.0);
  }
  // First step moves by about lr.
  CHECK(2.0 - x == doctest::Approx(10 * lr).epsilon(1e-3));
}

TEST_CASE("adam only touches tracked parameters") {
  ParamStore ps;
  ps.add("a", 1, 1).value.values[0] = 1.0;
  ps.add("b", 1, 1).value.values[0] = 1.0;
  AdamState st = make_adam_state(ps, {}, {"a"});
  ps.at("a").grad.values[0] = 1.0;
  ps.at("b").grad.values[0] = 1.0;
  adam_step(ps, st);
  CHECK(ps.at("a").value.values[0] < 1.0);
  CHECK(ps.at("b").value.values[0] == 1.0);
  CHECK(ps.at("b").grad.values[0] == 1.0);
}

TEST_CASE("parameter checkpoints round-trip bit for bit") {
  Rng rng(4);
  ParamStore ps;
  ps.add_uniform("enc.x", 3, 4, 4, rng);
  ps.add_uniform("head.y", 1, 5, 5, rng);
  ps.at("head.y").value.values[2] = 1.0 / 3.0;
  const std::string text = serialize_params(ps);
  const ParamStore back = deserialize_params(text);
  CHECK(back.values_equal(ps));
  CHECK(serialize_params(back) == text);
  CHECK_THROWS_AS(deserialize_params("garbage"), ParseError);
  CHECK_THROWS_AS(ps.add("enc.x", 1, 1), ConfigError);
  CHECK_THROWS_AS(ps.at("missing"), LookupError);
}
