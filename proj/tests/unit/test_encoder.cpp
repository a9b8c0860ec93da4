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
#include "cohortnet/nn.hpp"
#include "cohortnet/rng.hpp"
#include "doctest.h"

using namespace cohortnet;

namespace {

EncoderConfig tiny(std::size_t F, std::size_t T) {
  EncoderConfig c;
  c.num_features = F;
  c.num_steps = T;
  c.d_e = 3;
  c.d_t = 4;
  c.d_o = 3;
  c.d_h = 5;
  c.d_p = 2;
  for (std::size_t f = 0; f < F; ++f) c.bounds.push_back({"f" + std::to_string(f), -3.0, 3.0});
  return c;
}

PatientRecord record(std::size_t F, std::size_t T, Rng& rng) {
  PatientRecord r;
  r.id = "p";
  r.num_features = F;
  r.num_steps = T;
  r.values.resize(F * T);
  for (auto& v : r.values) v = rng.normal();
  r.observed.assign(F * T, 1);
  r.present.assign(F, 1);
  return r;
}

}  // namespace

TEST_CASE("bi-directional embedding interpolates between endpoint rows") {
  Rng rng(1);
  const EncoderConfig c = tiny(2, 1);
  ParamStore ps;
  init_encoder_params(ps, c, rng);
  const auto va = ps.at(pname::kEmbedUpper).value.row(1);
  const auto vb = ps.at(pname::kEmbedLower).value.row(1);
  const auto vm = ps.at(pname::kEmbedMissing).value.row(1);

  const auto lo = biel_embed(ps, c, 1, -3.0, true);
  const auto hi = biel_embed(ps, c, 1, 3.0, true);
  const auto mid = biel_embed(ps, c, 1, 0.0, true);
  const auto clipped = biel_embed(ps, c, 1, 40.0, true);
  const auto absent = biel_embed(ps, c, 1, 1.0, false);
  for (std::size_t k = 0; k < c.d_e; ++k) {
    CHECK(lo[k] == doctest::Approx(vb[k]));
    CHECK(hi[k] == doctest::Approx(va[k]));
    CHECK(mid[k] == doctest::Approx(0.5 * (va[k] + vb[k])));
    CHECK(clipped[k] == hi[k]);
    CHECK(absent[k] == vm[k]);
  }
  CHECK_THROWS_AS(biel_embed(ps, c, 2, 0.0, true), DimensionError);
}

TEST_CASE("interaction layer matches a hand computation for three features") {
  EncoderConfig c = tiny(3, 1);
  c.d_e = 2;
  ParamStore ps;
  ps.add(pname::kFilScore, 2, 2).value.values = {1.0, 0.5, -0.5, 2.0};
  ps.add(pname::kFilValue, 2, 2).value.values = {0.2, 0.0, 1.0, -1.0};
  const std::vector<double> e{1.0, 0.0, 0.0, 1.0, 1.0, 1.0};  // e0, e1, e2
  const auto inter = fil_interact(ps, c, e);

  // Scores s_ij = e_i . (W e_j).
  const auto Wv = [](double x, double y) { return std::array<double, 2>{x + 0.5 * y, -0.5 * x + 2 * y}; };
  const auto Uv = [](double x, double y) { return std::array<double, 2>{0.2 * x, x - y}; };
  const std::array<std::array<double, 2>, 3> E{{{1, 0}, {0, 1}, {1, 1}}};
  for (int i = 0; i < 3; ++i) {
    double s[3], mx = -1e9;
    for (int j = 0; j < 3; ++j) {
      const auto k = Wv(E[j][0], E[j][1]);
      s[j] = E[i][0] * k[0] + E[i][1] * k[1];
      if (j != i) mx = std::max(mx, s[j]);
    }
    double z = 0, a[3] = {0, 0, 0};
    for (int j = 0; j < 3; ++j)
      if (j != i) z += std::exp(s[j] - mx);
    double u0 = 0, u1 = 0;
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      a[j] = std::exp(s[j] - mx) / z;
      const auto v = Uv(E[j][0], E[j][1]);
      u0 += a[j] * v[0];
      u1 += a[j] * v[1];
    }
    for (int j = 0; j < 3; ++j) CHECK(inter.alpha[i * 3 + j] == doctest::Approx(a[j]).epsilon(1e-14));
    CHECK(inter.u[i * 2] == doctest::Approx(u0).epsilon(1e-14));
    CHECK(inter.u[i * 2 + 1] == doctest::Approx(u1).epsilon(1e-14));
  }
}

TEST_CASE("a single feature has no interaction") {
  Rng rng(2);
  const EncoderConfig c = tiny(1, 3);
  ParamStore ps;
  init_encoder_params(ps, c, rng);
  const auto inter = fil_interact(ps, c, std::vector<double>(c.d_e, 0.7));
  for (double v : inter.u) CHECK(v == 0.0);
  const auto out = encode_patient(record(1, 3, rng), ps, c);
  CHECK(out.alpha.size() == 3);
  for (double v : out.alpha) CHECK(v == 0.0);
}

TEST_CASE("encoder output shapes, attention rows and stage agreement") {
  Rng rng(3);
  const std::size_t F = 4, T = 5;
  const EncoderConfig c = tiny(F, T);
  ParamStore ps;
  init_encoder_params(ps, c, rng);
  PatientRecord r = record(F, T, rng);
  r.present[2] = 0;
  const EncoderOutput out = encode_patient(r, ps, c);
  CHECK(out.e.size() == F * T * c.d_e);
  CHECK(out.o.size() == F * T * c.d_o);
  CHECK(out.h.size() == F * T * c.d_h);
  CHECK(out.h_tilde.size() == T * F * c.d_p);
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto a = out.alpha_at(i, t);
      CHECK(a[i] == 0.0);
      CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      const auto e = biel_embed(ps, c, i, r.value(i, t), r.is_present(i));
      for (std::size_t k = 0; k < c.d_e; ++k) CHECK(out.e_at(i, t)[k] == e[k]);
    }
    // Local trend equals a standalone GRU run over the embeddings.
    std::vector<double> emb;
    for (std::size_t t = 0; t < T; ++t) emb.insert(emb.end(), out.e_at(i, t).begin(), out.e_at(i, t).end());
    const auto trend = ftl_trend(ps, c, i, emb);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < c.d_t; ++k)
        CHECK(out.v_at(i, t)[k] == doctest::Approx(trend[t * c.d_t + k]).epsilon(1e-14));
    const auto fused = fea_fus(ps, c, i, out.e_at(i, 1), out.u_at(i, 1), out.v_at(i, 1));
    for (std::size_t k = 0; k < c.d_o; ++k) CHECK(out.o_at(i, 1)[k] == doctest::Approx(fused[k]).epsilon(1e-14));
  }
  // Base logit from the final compressed representation.
  const auto& wp = ps.at(pname::kHeadWeight).value.values;
  double z = ps.at(pname::kHeadBias).value.values[0];
  const auto ht = out.h_tilde_at(T - 1);
  for (std::size_t k = 0; k < ht.size(); ++k) z += wp[k] * ht[k];
  CHECK(base_logit(out, ps) == doctest::Approx(z).epsilon(1e-14));
}

TEST_CASE("patients are encoded independently") {
  Rng rng(4);
  const EncoderConfig c = tiny(3, 4);
  ParamStore ps;
  init_encoder_params(ps, c, rng);
  const PatientRecord a = record(3, 4, rng), b = record(3, 4, rng);
  const auto a1 = encode_patient(a, ps, c);
  encode_patient(b, ps, c);
  const auto a2 = encode_patient(a, ps, c);
  CHECK(a1.h == a2.h);
  CHECK(a1.alpha == a2.alpha);
}

TEST_CASE("encoder rejects mismatched records and configs") {
  Rng rng(5);
  const EncoderConfig c = tiny(3, 4);
  ParamStore ps;
  init_encoder_params(ps, c, rng);
  CHECK_THROWS_AS(encode_patient(record(2, 4, rng), ps, c), ConfigError);
  EncoderConfig bad = c;
  bad.d_h = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.bounds[0].lower = 5.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
