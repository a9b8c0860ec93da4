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

#include "cohortnet/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "cohortnet/errors.hpp"
#include "cohortnet/nn.hpp"
#include "cohortnet/rng.hpp"

namespace cohortnet {

namespace pname {
std::string local_gru(std::size_t feature, const char* part) {
  return "enc.lgru." + std::to_string(feature) + "." + part;
}
std::string global_gru(std::size_t feature, const char* part) {
  return "enc.ggru." + std::to_string(feature) + "." + part;
}
std::string fusion(std::size_t feature, const char* part) {
  return "enc.fus." + std::to_string(feature) + "." + part;
}
std::string compressor(std::size_t feature) { return "enc.agg." + std::to_string(feature) + ".W"; }
}  // namespace pname

void EncoderConfig::validate() const {
  if (num_features == 0 || num_steps == 0) throw ConfigError("encoder: F and T must be >= 1");
  if (d_e == 0 || d_t == 0 || d_o == 0 || d_h == 0 || d_p == 0) {
    throw ConfigError("encoder: all dimensions must be >= 1");
  }
  if (bounds.size() != num_features) throw ConfigError("encoder: need bounds for every feature");
  for (const auto& b : bounds) {
    if (!(b.lower < b.upper)) throw ConfigError("encoder: bounds need lower < upper");
  }
}

void init_encoder_params(ParamStore& params, const EncoderConfig& c, Rng& rng) {
  c.validate();
  const std::size_t F = c.num_features;
  params.add_uniform(pname::kEmbedUpper, F, c.d_e, 1, rng);
  params.add_uniform(pname::kEmbedLower, F, c.d_e, 1, rng);
  params.add_uniform(pname::kEmbedMissing, F, c.d_e, 1, rng);
  params.add_uniform(pname::kFilScore, c.d_e, c.d_e, c.d_e, rng);
  params.add_uniform(pname::kFilValue, c.d_e, c.d_e, c.d_e, rng);
  const std::size_t fus_in = 2 * c.d_e + c.d_t;
  for (std::size_t i = 0; i < F; ++i) {
    params.add_uniform(pname::local_gru(i, "W"), 3 * c.d_t, c.d_e, c.d_e, rng);
    params.add_uniform(pname::local_gru(i, "U"), 3 * c.d_t, c.d_t, c.d_t, rng);
    params.add_uniform(pname::local_gru(i, "b"), 3 * c.d_t, 1, c.d_t, rng);
    params.add_uniform(pname::fusion(i, "W1"), c.fusion_hidden(), fus_in, fus_in, rng);
    params.add_uniform(pname::fusion(i, "b1"), c.fusion_hidden(), 1, fus_in, rng);
    params.add_uniform(pname::fusion(i, "W2"), c.d_o, c.fusion_hidden(), c.fusion_hidden(), rng);
    params.add_uniform(pname::fusion(i, "b2"), c.d_o, 1, c.fusion_hidden(), rng);
    params.add_uniform(pname::global_gru(i, "W"), 3 * c.d_h, c.d_o, c.d_o, rng);
    params.add_uniform(pname::global_gru(i, "U"), 3 * c.d_h, c.d_h, c.d_h, rng);
    params.add_uniform(pname::global_gru(i, "b"), 3 * c.d_h, 1, c.d_h, rng);
    params.add_uniform(pname::compressor(i), c.d_p, c.d_h, c.d_h, rng);
  }
  params.add_uniform(pname::kHeadWeight, 1, c.overall_width(), c.overall_width(), rng);
  params.add_uniform(pname::kHeadBias, 1, 1, c.overall_width(), rng);
}

namespace {

Var bind_param(Tape& tape, const ParamStore& params, ParamStore* trainable, const std::string& name) {
  if (trainable) return tape.param(trainable->at(name));
  const auto& e = params.at(name);
  return tape.constant(e.value.values, e.value.rows, e.value.cols);
}

struct FeatureVars {
  Var lgru_w, lgru_u, lgru_b;
  Var fus_w1, fus_b1, fus_w2, fus_b2;
  Var ggru_w, ggru_u, ggru_b;
  Var agg;
};

struct EncoderVars {
  Var va, vb, vm, fil_w, fil_u, head_w, head_b;
  std::vector<FeatureVars> features;
};

EncoderVars bind_all(Tape& tape, const ParamStore& params, ParamStore* trainable,
                     const EncoderConfig& c) {
  EncoderVars v;
  v.va = bind_param(tape, params, trainable, pname::kEmbedUpper);
  v.vb = bind_param(tape, params, trainable, pname::kEmbedLower);
  v.vm = bind_param(tape, params, trainable, pname::kEmbedMissing);
  v.fil_w = bind_param(tape, params, trainable, pname::kFilScore);
  v.fil_u = bind_param(tape, params, trainable, pname::kFilValue);
  v.features.resize(c.num_features);
  for (std::size_t i = 0; i < c.num_features; ++i) {
    auto& f = v.features[i];
    f.lgru_w = bind_param(tape, params, trainable, pname::local_gru(i, "W"));
    f.lgru_u = bind_param(tape, params, trainable, pname::local_gru(i, "U"));
    f.lgru_b = bind_param(tape, params, trainable, pname::local_gru(i, "b"));
    f.fus_w1 = bind_param(tape, params, trainable, pname::fusion(i, "W1"));
    f.fus_b1 = bind_param(tape, params, trainable, pname::fusion(i, "b1"));
    f.fus_w2 = bind_param(tape, params, trainable, pname::fusion(i, "W2"));
    f.fus_b2 = bind_param(tape, params, trainable, pname::fusion(i, "b2"));
    f.ggru_w = bind_param(tape, params, trainable, pname::global_gru(i, "W"));
    f.ggru_u = bind_param(tape, params, trainable, pname::global_gru(i, "U"));
    f.ggru_b = bind_param(tape, params, trainable, pname::global_gru(i, "b"));
    f.agg = bind_param(tape, params, trainable, pname::compressor(i));
  }
  v.head_w = bind_param(tape, params, trainable, pname::kHeadWeight);
  v.head_b = bind_param(tape, params, trainable, pname::kHeadBias);
  return v;
}

Var embed(Tape& tape, const EncoderVars& v, const EncoderConfig& c, std::size_t i, double x,
          bool present) {
  if (!present) return tape.row(v.vm, i);
  const double a = c.bounds[i].lower;
  const double b = c.bounds[i].upper;
  const double xc = std::clamp(x, a, b);
  const double width = b - a;
  return tape.blend_rows(v.va, v.vb, i, (xc - a) / width, (b - xc) / width);
}

// Attention of every feature over the others at one time step.
void interact(Tape& tape, const EncoderVars& v, const EncoderConfig& c,
              std::span<const Var> e, std::vector<Var>& u_out, std::vector<Var>& alpha_out) {
  const std::size_t F = e.size();
  u_out.assign(F, Var{});
  alpha_out.assign(F, Var{});
  if (F == 1) {
    u_out[0] = tape.constant(std::vector<double>(c.d_e, 0.0));
    alpha_out[0] = tape.constant({});
    return;
  }
  std::vector<Var> keys(F), values(F);
  for (std::size_t j = 0; j < F; ++j) {
    keys[j] = tape.matvec(v.fil_w, e[j]);
    values[j] = tape.matvec(v.fil_u, e[j]);
  }
  std::vector<Var> other_keys, other_values;
  other_keys.reserve(F - 1);
  other_values.reserve(F - 1);
  for (std::size_t i = 0; i < F; ++i) {
    other_keys.clear();
    other_values.clear();
    for (std::size_t j = 0; j < F; ++j) {
      if (j == i) continue;
      other_keys.push_back(keys[j]);
      other_values.push_back(values[j]);
    }
    Var scores = tape.dots(e[i], other_keys);
    alpha_out[i] = tape.softmax(scores);
    u_out[i] = tape.weighted_sum(alpha_out[i], other_values);
  }
}

Var fuse(Tape& tape, const FeatureVars& f, Var e, Var u, Var v) {
  const Var parts[] = {e, u, v};
  Var x = tape.concat(parts);
  Var hidden = tape.tanh(tape.affine(f.fus_w1, x, f.fus_b1));
  return tape.affine(f.fus_w2, hidden, f.fus_b2);
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

EncoderTrace record_encoder(Tape& tape, const ParamStore& params, ParamStore* trainable,
                            const EncoderConfig& c, const PatientRecord& rec, bool all_steps) {
  const std::size_t F = c.num_features;
  const std::size_t T = c.num_steps;
  if (rec.num_features != F || rec.num_steps != T) {
    throw ConfigError("record '" + rec.id + "' is " + std::to_string(rec.num_features) + "x" +
                      std::to_string(rec.num_steps) + ", encoder expects " + std::to_string(F) +
                      "x" + std::to_string(T));
  }
  const EncoderVars vars = bind_all(tape, params, trainable, c);
  EncoderTrace tr;
  tr.e.resize(F * T);
  tr.alpha.resize(F * T);
  tr.u.resize(F * T);
  tr.v.resize(F * T);
  tr.o.resize(F * T);
  tr.h.resize(F * T);

  const Var zero_t = tape.constant(std::vector<double>(c.d_t, 0.0));
  const Var zero_h = tape.constant(std::vector<double>(c.d_h, 0.0));
  std::vector<Var> e_t(F), u_t, a_t, compressed(F);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < F; ++i) {
      e_t[i] = embed(tape, vars, c, i, rec.value(i, t), rec.is_present(i));
      tr.e[i * T + t] = e_t[i];
    }
    interact(tape, vars, c, e_t, u_t, a_t);
    for (std::size_t i = 0; i < F; ++i) {
      const auto& fv = vars.features[i];
      const std::size_t k = i * T + t;
      tr.u[k] = u_t[i];
      tr.alpha[k] = a_t[i];
      const Var v_prev = t == 0 ? zero_t : tr.v[k - 1];
      tr.v[k] = tape.gru_cell(fv.lgru_w, fv.lgru_u, fv.lgru_b, e_t[i], v_prev, c.d_e, c.d_t);
      tr.o[k] = fuse(tape, fv, e_t[i], u_t[i], tr.v[k]);
      const Var h_prev = t == 0 ? zero_h : tr.h[k - 1];
      tr.h[k] = tape.gru_cell(fv.ggru_w, fv.ggru_u, fv.ggru_b, tr.o[k], h_prev, c.d_o, c.d_h);
    }
    if (all_steps || t + 1 == T) {
      for (std::size_t i = 0; i < F; ++i) compressed[i] = tape.matvec(vars.features[i].agg, tr.h[i * T + t]);
      tr.h_tilde.push_back(tape.concat(compressed));
    }
  }
  tr.logit = tape.affine(vars.head_w, tr.h_tilde.back(), vars.head_b);
  return tr;
}

EncoderOutput encode_patient(const PatientRecord& rec, const ParamStore& params,
                             const EncoderConfig& c) {
  Tape tape;
  const EncoderTrace tr = record_encoder(tape, params, nullptr, c, rec, true);
  const std::size_t F = c.num_features;
  const std::size_t T = c.num_steps;
  EncoderOutput out;
  out.num_features = F;
  out.num_steps = T;
  out.d_e = c.d_e;
  out.d_t = c.d_t;
  out.d_o = c.d_o;
  out.d_h = c.d_h;
  out.d_p = c.d_p;
  out.e.reserve(F * T * c.d_e);
  out.u.reserve(F * T * c.d_e);
  out.v.reserve(F * T * c.d_t);
  out.o.reserve(F * T * c.d_o);
  out.h.reserve(F * T * c.d_h);
  out.alpha.assign(F * T * F, 0.0);
  const auto append = [&](std::vector<double>& dst, Var v) {
    const auto s = tape.value(v);
    dst.insert(dst.end(), s.begin(), s.end());
  };
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t k = i * T + t;
      append(out.e, tr.e[k]);
      append(out.u, tr.u[k]);
      append(out.v, tr.v[k]);
      append(out.o, tr.o[k]);
      append(out.h, tr.h[k]);
      const auto a = tape.value(tr.alpha[k]);
      double* row = out.alpha.data() + k * F;
      for (std::size_t j = 0, m = 0; j < F; ++j) {
        if (j != i) row[j] = a[m++];
      }
    }
  }
  for (Var ht : tr.h_tilde) append(out.h_tilde, ht);
  return out;
}

double base_logit(const EncoderOutput& out, const ParamStore& params) {
  const auto& w = params.at(pname::kHeadWeight).value;
  const auto h = out.h_tilde_at(out.num_steps - 1);
  if (w.size() != h.size()) throw DimensionError("base_logit: head width mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) acc += w.values[j] * h[j];
  return acc + params.at(pname::kHeadBias).value.values[0];
}

std::vector<double> biel_embed(const ParamStore& params, const EncoderConfig& c,
                               std::size_t feature, double x, bool present) {
  if (feature >= c.num_features) throw DimensionError("biel_embed: feature out of range");
  Tape tape;
  EncoderVars v;
  v.va = bind_param(tape, params, nullptr, pname::kEmbedUpper);
  v.vb = bind_param(tape, params, nullptr, pname::kEmbedLower);
  v.vm = bind_param(tape, params, nullptr, pname::kEmbedMissing);
  return to_vec(tape.value(embed(tape, v, c, feature, x, present)));
}

Interaction fil_interact(const ParamStore& params, const EncoderConfig& c,
                         std::span<const double> embeddings) {
  const std::size_t F = c.num_features;
  if (embeddings.size() != F * c.d_e) throw DimensionError("fil_interact: expected F x d_e embeddings");
  Tape tape;
  EncoderVars v;
  v.fil_w = bind_param(tape, params, nullptr, pname::kFilScore);
  v.fil_u = bind_param(tape, params, nullptr, pname::kFilValue);
  std::vector<Var> e(F);
  for (std::size_t i = 0; i < F; ++i) {
    e[i] = tape.constant(to_vec(embeddings.subspan(i * c.d_e, c.d_e)));
  }
  std::vector<Var> u, a;
  interact(tape, v, c, e, u, a);
  Interaction out;
  out.alpha.assign(F * F, 0.0);
  for (std::size_t i = 0; i < F; ++i) {
    const auto ui = tape.value(u[i]);
    out.u.insert(out.u.end(), ui.begin(), ui.end());
    const auto ai = tape.value(a[i]);
    for (std::size_t j = 0, m = 0; j < F; ++j) {
      if (j != i) out.alpha[i * F + j] = ai[m++];
    }
  }
  return out;
}

std::vector<double> ftl_trend(const ParamStore& params, const EncoderConfig& c,
                              std::size_t feature, std::span<const double> embeddings) {
  if (embeddings.size() % c.d_e != 0) throw DimensionError("ftl_trend: expected T x d_e embeddings");
  const std::size_t T = embeddings.size() / c.d_e;
  const auto& w = params.at(pname::local_gru(feature, "W")).value.values;
  const auto& u = params.at(pname::local_gru(feature, "U")).value.values;
  const auto& b = params.at(pname::local_gru(feature, "b")).value.values;
  const GruWeights wt{w, u, b, c.d_e, c.d_t};
  std::vector<double> out;
  std::vector<double> state(c.d_t, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    state = gru_cell_step(embeddings.subspan(t * c.d_e, c.d_e), state, wt);
    out.insert(out.end(), state.begin(), state.end());
  }
  return out;
}

std::vector<double> fea_fus(const ParamStore& params, const EncoderConfig& c, std::size_t feature,
                            std::span<const double> e, std::span<const double> u,
                            std::span<const double> v) {
  if (e.size() != c.d_e || u.size() != c.d_e || v.size() != c.d_t) {
    throw DimensionError("fea_fus: input sizes disagree with the config");
  }
  Tape tape;
  FeatureVars fv;
  fv.fus_w1 = bind_param(tape, params, nullptr, pname::fusion(feature, "W1"));
  fv.fus_b1 = bind_param(tape, params, nullptr, pname::fusion(feature, "b1"));
  fv.fus_w2 = bind_param(tape, params, nullptr, pname::fusion(feature, "W2"));
  fv.fus_b2 = bind_param(tape, params, nullptr, pname::fusion(feature, "b2"));
  const Var o = fuse(tape, fv, tape.constant(to_vec(e)), tape.constant(to_vec(u)),
                     tape.constant(to_vec(v)));
  return to_vec(tape.value(o));
}

}  // namespace cohortnet
