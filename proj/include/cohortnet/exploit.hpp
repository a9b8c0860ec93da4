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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cohortnet/optim.hpp"
#include "cohortnet/pool.hpp"
#include "cohortnet/tape.hpp"
#include "cohortnet/tensor.hpp"

namespace cohortnet {

class Rng;

struct ExploitConfig {
  std::size_t d_a = 16;  // attention width
  std::size_t d_v = 4;   // value width
};

namespace pname {
inline const std::string kQuery = "cem.WQ";
inline const std::string kKey = "cem.WK";
inline const std::string kValue = "cem.WV";
inline const std::string kCalibration = "cem.wc";  // F x d_v, row i is w^c_i
}  // namespace pname

// W_Q: d_a x d_h, W_K: d_a x R, W_V: d_v x R with R the cohort representation
// width. The calibration weights start at zero so an untrained module leaves
// the base prediction unchanged.
void init_exploit_params(ParamStore& params, std::size_t num_features, std::size_t d_h,
                         std::size_t representation_width, const ExploitConfig& config, Rng& rng);

// b_i^q = 1 iff the patient's states match cohort q of anchor i at some step.
struct CohortBitmap {
  std::vector<std::vector<std::uint8_t>> bits;  // [anchor][q]

  // Indices q with b_i^q = 1, ascending.
  std::vector<std::uint32_t> matched(std::size_t anchor) const;
  std::size_t count() const;
};

// Probes the pool's exact-match index once per (step, anchor, mask bucket).
CohortBitmap identify_cohorts(const StateGrid& grid, const CohortPool& pool);

struct CohortAttention {
  std::vector<double> h_prime;  // d_v; all zero when nothing matched
  std::vector<double> beta;     // one weight per matched cohort
};

// beta' = (W_Q h) . (W_K C_q), beta = softmax(beta'), h' = sum_q beta_q W_V C_q.
CohortAttention attend_cohorts(std::span<const double> h_last, const CohortPool& pool,
                               std::size_t anchor, std::span<const std::uint32_t> matched,
                               const ParamStore& params);

struct FeatureCalibration {
  std::vector<std::uint32_t> cohorts;  // matched cohort indices of this anchor
  std::vector<double> beta;
  std::vector<double> cohort_scores;   // w^c_i . (beta_q W_V C_q)
  std::vector<double> h_prime;
  double score = 0.0;                  // sum of cohort_scores in index order
};

struct CalibrationReport {
  double base_logit = 0.0;  // w^p . h~^T + b^p
  double z = 0.0;           // sum of feature scores in feature order
  double logit = 0.0;       // base_logit + z
  double probability = 0.0;
  double base_probability = 0.0;
  std::vector<FeatureCalibration> features;
};

// Calibrated prediction sigmoid(w^p . h~ + b^p + z) together with its exact
// decomposition. `h_last` holds the final-step h_i^T for every feature
// (F x d_h).
CalibrationReport predict(std::span<const double> h_tilde_last, std::span<const double> h_last,
                          const CohortBitmap& bitmap, const CohortPool& pool,
                          const ParamStore& params);

// Mean binary cross-entropy, probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> predictions, std::span<const int> labels);

// Frozen encoder outputs of one patient, everything stage 4 needs.
struct ExploitSample {
  std::vector<double> h_tilde_last;  // F * d_p
  std::vector<double> h_last;        // F x d_h
  CohortBitmap bitmap;
  int label = 0;
};

// Records w^p . h~ + b^p + sum_i w^c_i . h'_i on a tape. `h_last` has one
// Var (d_h) per feature. Cohort representations enter as constants.
Var record_calibrated_logit(Tape& tape, const ParamStore& params, ParamStore* trainable,
                            Var h_tilde_last, std::span<const Var> h_last,
                            const CohortBitmap& bitmap, const CohortPool& pool, bool train_head);

// Records the calibrated logit on a tape. Cohort representations and encoder
// outputs enter as constants. With `train_head` false the head is constant.
Var record_exploitation(Tape& tape, const ParamStore& params, ParamStore* trainable,
                        const ExploitSample& sample, const CohortPool& pool, bool train_head);

struct ExploitTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t patience = 10;
  bool train_head = true;
  std::uint64_t seed = 7;
};

struct TrainLog {
  std::vector<double> train_loss;   // per epoch
  std::vector<double> valid_score;  // per epoch, index 0 is before training
  std::size_t best_epoch = 0;
  bool degenerate = false;          // empty pool: nothing trained
};

// Adam on the mean BCE of the calibrated prediction. Keeps the parameters
// of the epoch with the best validation AUC-PR (the untrained state counts
// as epoch 0) and stops after `patience` epochs without improvement.
TrainLog train_exploitation(ParamStore& params, const CohortPool& pool,
                            std::span<const ExploitSample> train,
                            std::span<const ExploitSample> valid,
                            const ExploitTrainOptions& options);

}  // namespace cohortnet
