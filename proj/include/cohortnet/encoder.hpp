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
#include <string>
#include <vector>

#include "cohortnet/data.hpp"
#include "cohortnet/tape.hpp"
#include "cohortnet/tensor.hpp"

namespace cohortnet {

class Rng;

struct EncoderConfig {
  std::size_t num_features = 0;
  std::size_t num_steps = 0;
  std::size_t d_e = 16;  // embedding
  std::size_t d_t = 16;  // trend (local GRU hidden)
  std::size_t d_o = 8;   // fused
  std::size_t d_h = 16;  // per-feature representation (global GRU hidden)
  std::size_t d_p = 4;   // compressed width per feature
  // Per-feature embedding bounds [lower, upper] on the standardized scale.
  std::vector<FeatureSpec> bounds;

  std::size_t fusion_hidden() const { return 2 * d_o; }
  std::size_t overall_width() const { return num_features * d_p; }
  // Throws ConfigError.
  void validate() const;
};

// Parameter names used inside a ParamStore.
namespace pname {
inline const std::string kEmbedUpper = "enc.Va";
inline const std::string kEmbedLower = "enc.Vb";
inline const std::string kEmbedMissing = "enc.Vm";
inline const std::string kFilScore = "enc.fil.W";
inline const std::string kFilValue = "enc.fil.Wu";
inline const std::string kHeadWeight = "head.wp";
inline const std::string kHeadBias = "head.bp";
std::string local_gru(std::size_t feature, const char* part);   // part: W, U, b
std::string global_gru(std::size_t feature, const char* part);  // part: W, U, b
std::string fusion(std::size_t feature, const char* part);      // part: W1, b1, W2, b2
std::string compressor(std::size_t feature);
}  // namespace pname

// Adds every encoder and prediction-head parameter, uniform(-s, s) with
// s = 1/sqrt(fan_in).
void init_encoder_params(ParamStore& params, const EncoderConfig& config, Rng& rng);

// Full forward pass for one patient. Tensors are stored flat with the
// feature index outermost: e[(i * T + t) * d_e + k], alpha[(i * T + t) * F + j].
struct EncoderOutput {
  std::size_t num_features = 0;
  std::size_t num_steps = 0;
  std::size_t d_e = 0, d_t = 0, d_o = 0, d_h = 0, d_p = 0;
  std::vector<double> e, alpha, u, v, o, h, h_tilde;

  std::span<const double> e_at(std::size_t i, std::size_t t) const { return slot(e, d_e, i, t); }
  std::span<const double> alpha_at(std::size_t i, std::size_t t) const {
    return slot(alpha, num_features, i, t);
  }
  std::span<const double> u_at(std::size_t i, std::size_t t) const { return slot(u, d_e, i, t); }
  std::span<const double> v_at(std::size_t i, std::size_t t) const { return slot(v, d_t, i, t); }
  std::span<const double> o_at(std::size_t i, std::size_t t) const { return slot(o, d_o, i, t); }
  std::span<const double> h_at(std::size_t i, std::size_t t) const { return slot(h, d_h, i, t); }
  std::span<const double> h_tilde_at(std::size_t t) const {
    const std::size_t w = num_features * d_p;
    return {h_tilde.data() + t * w, w};
  }

 private:
  std::span<const double> slot(const std::vector<double>& buf, std::size_t width, std::size_t i,
                               std::size_t t) const {
    return {buf.data() + (i * num_steps + t) * width, width};
  }
};

// Tape handles produced by record_encoder().
struct EncoderTrace {
  std::vector<Var> e, alpha, u, v, o, h;  // indexed [i * T + t]; alpha holds F-1 entries
  std::vector<Var> h_tilde;               // per t (only the last step unless all_steps)
  Var logit;                              // w^p . h~^T + b^p
};

// Records the encoder and prediction head on a tape. When `trainable` is
// set, parameters become tape leaves whose gradients flow back into
// `trainable`; otherwise values are copied in as constants.
EncoderTrace record_encoder(Tape& tape, const ParamStore& params, ParamStore* trainable,
                            const EncoderConfig& config, const PatientRecord& record,
                            bool all_steps = false);

EncoderOutput encode_patient(const PatientRecord& record, const ParamStore& params,
                             const EncoderConfig& config);
// Base logit w^p . h~^T + b^p from a finished encoding.
double base_logit(const EncoderOutput& out, const ParamStore& params);

// --- Individual stages, forward only -------------------------------------

// present: (V^a_i (x' - a) + V^b_i (b - x')) / (b - a) with x' clipped into
// [a, b]; absent: V^m_i.
std::vector<double> biel_embed(const ParamStore& params, const EncoderConfig& config,
                               std::size_t feature, double x, bool present);

struct Interaction {
  std::vector<double> u;      // F x d_e
  std::vector<double> alpha;  // F x F, zero diagonal
};
// Shared bilinear attention over the other features at one time step.
// `embeddings` is F x d_e.
Interaction fil_interact(const ParamStore& params, const EncoderConfig& config,
                         std::span<const double> embeddings);

// Local GRU over one feature's embeddings (T x d_e) from a zero state; T x d_t.
std::vector<double> ftl_trend(const ParamStore& params, const EncoderConfig& config,
                              std::size_t feature, std::span<const double> embeddings);

// One-hidden-layer tanh MLP over [e; u; v]; returns d_o values.
std::vector<double> fea_fus(const ParamStore& params, const EncoderConfig& config,
                            std::size_t feature, std::span<const double> e,
                            std::span<const double> u, std::span<const double> v);

}  // namespace cohortnet
