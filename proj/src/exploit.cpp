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

#include "cohortnet/exploit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cohortnet/encoder.hpp"
#include "cohortnet/errors.hpp"
#include "cohortnet/metrics.hpp"
#include "cohortnet/nn.hpp"
#include "cohortnet/rng.hpp"

namespace cohortnet {

void init_exploit_params(ParamStore& params, std::size_t num_features, std::size_t d_h,
                         std::size_t rep_width, const ExploitConfig& c, Rng& rng) {
  if (c.d_a == 0 || c.d_v == 0) throw ConfigError("exploitation: d_a and d_v must be >= 1");
  params.add_uniform(pname::kQuery, c.d_a, d_h, d_h, rng);
  params.add_uniform(pname::kKey, c.d_a, rep_width, rep_width, rng);
  params.add_uniform(pname::kValue, c.d_v, rep_width, rep_width, rng);
  params.add(pname::kCalibration, num_features, c.d_v);
}

std::vector<std::uint32_t> CohortBitmap::matched(std::size_t anchor) const {
  std::vector<std::uint32_t> out;
  const auto& b = bits.at(anchor);
  for (std::size_t q = 0; q < b.size(); ++q) {
    if (b[q]) out.push_back(static_cast<std::uint32_t>(q));
  }
  return out;
}

std::size_t CohortBitmap::count() const {
  std::size_t n = 0;
  for (const auto& b : bits) n += static_cast<std::size_t>(std::count(b.begin(), b.end(), 1));
  return n;
}

CohortBitmap identify_cohorts(const StateGrid& grid, const CohortPool& pool) {
  if (grid.num_features != pool.num_features()) {
    throw DimensionError("identify_cohorts: patient has " + std::to_string(grid.num_features) +
                         " features, pool has " + std::to_string(pool.num_features()));
  }
  CohortBitmap bm;
  bm.bits.resize(pool.num_features());
  std::vector<std::uint32_t> hits;
  for (std::size_t i = 0; i < pool.num_features(); ++i) {
    bm.bits[i].assign(pool.cohorts(i).size(), 0);
    if (pool.cohorts(i).empty()) continue;
    for (std::size_t t = 0; t < grid.num_steps; ++t) {
      hits.clear();
      pool.match_step(grid, t, i, hits);
      for (auto q : hits) bm.bits[i][q] = 1;
    }
  }
  return bm;
}

namespace {

std::vector<double> matvec(const Tensor2& w, std::span<const double> x) {
  if (w.cols != x.size()) throw DimensionError("matvec: width mismatch");
  std::vector<double> out(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += w.at(r, c) * x[c];
    out[r] = acc;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

struct AttentionDetail {
  CohortAttention attention;
  std::vector<std::vector<double>> values;  // W_V C_q per matched cohort
};

AttentionDetail attend(std::span<const double> h_last, const CohortPool& pool, std::size_t anchor,
                       std::span<const std::uint32_t> matched, const ParamStore& params) {
  const auto& wq = params.at(pname::kQuery).value;
  const auto& wk = params.at(pname::kKey).value;
  const auto& wv = params.at(pname::kValue).value;
  AttentionDetail d;
  d.attention.h_prime.assign(wv.rows, 0.0);
  if (matched.empty()) return d;
  const auto query = matvec(wq, h_last);
  std::vector<double> scores;
  scores.reserve(matched.size());
  for (auto q : matched) {
    const auto& rep = pool.cohort(anchor, q).representation;
    scores.push_back(dot(query, matvec(wk, rep)));
    d.values.push_back(matvec(wv, rep));
  }
  d.attention.beta = softmax(scores);
  for (std::size_t m = 0; m < matched.size(); ++m) {
    for (std::size_t j = 0; j < wv.rows; ++j) {
      d.attention.h_prime[j] += d.attention.beta[m] * d.values[m][j];
    }
  }
  return d;
}

}  // namespace

CohortAttention attend_cohorts(std::span<const double> h_last, const CohortPool& pool,
                               std::size_t anchor, std::span<const std::uint32_t> matched,
                               const ParamStore& params) {
  return attend(h_last, pool, anchor, matched, params).attention;
}

CalibrationReport predict(std::span<const double> h_tilde_last, std::span<const double> h_last,
                          const CohortBitmap& bitmap, const CohortPool& pool,
                          const ParamStore& params) {
  const std::size_t F = pool.num_features();
  const auto& wp = params.at(pname::kHeadWeight).value;
  const auto& wc = params.at(pname::kCalibration).value;
  if (wp.size() != h_tilde_last.size()) throw DimensionError("predict: head width mismatch");
  if (F == 0 || h_last.size() % F != 0) throw DimensionError("predict: h_last must be F x d_h");
  if (wc.rows != F) throw DimensionError("predict: calibration weights need one row per feature");
  const std::size_t d_h = h_last.size() / F;

  CalibrationReport rep;
  rep.base_logit = dot(wp.values, h_tilde_last) + params.at(pname::kHeadBias).value.values[0];
  rep.features.resize(F);
  double z = 0.0;
  for (std::size_t i = 0; i < F; ++i) {
    auto& fc = rep.features[i];
    fc.cohorts = bitmap.matched(i);
    AttentionDetail d = attend(h_last.subspan(i * d_h, d_h), pool, i, fc.cohorts, params);
    fc.beta = std::move(d.attention.beta);
    fc.h_prime = std::move(d.attention.h_prime);
    const auto w = wc.row(i);
    double score = 0.0;
    for (std::size_t m = 0; m < fc.cohorts.size(); ++m) {
      double s = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * (fc.beta[m] * d.values[m][j]);
      fc.cohort_scores.push_back(s);
      score += s;
    }
    fc.score = score;
    z += score;
  }
  rep.z = z;
  rep.logit = rep.base_logit + z;
  rep.probability = sigmoid(rep.logit);
  rep.base_probability = sigmoid(rep.base_logit);
  return rep;
}

double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw DimensionError("bce_loss: need equally many predictions and labels (>= 1)");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    const double p = std::clamp(predictions[j], 1e-7, 1.0 - 1e-7);
    const double y = labels[j];
    acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(predictions.size());
}

Var record_calibrated_logit(Tape& tape, const ParamStore& params, ParamStore* trainable,
                            Var h_tilde_last, std::span<const Var> h_last,
                            const CohortBitmap& bitmap, const CohortPool& pool, bool train_head) {
  const auto bind = [&](const std::string& name, bool learn) {
    if (learn && trainable) return tape.param(trainable->at(name));
    const auto& e = params.at(name);
    return tape.constant(e.value.values, e.value.rows, e.value.cols);
  };
  const Var wp = bind(pname::kHeadWeight, train_head);
  const Var bp = bind(pname::kHeadBias, train_head);
  std::vector<Var> parts{tape.affine(wp, h_tilde_last, bp)};

  const std::size_t F = pool.num_features();
  if (h_last.size() != F) throw DimensionError("record_calibrated_logit: need h_i^T per feature");
  Var wq, wk, wv, wc;
  std::vector<Var> keys, values;
  for (std::size_t i = 0; i < F; ++i) {
    const auto matched = bitmap.matched(i);
    if (matched.empty()) continue;
    if (!wq.valid()) {
      wq = bind(pname::kQuery, true);
      wk = bind(pname::kKey, true);
      wv = bind(pname::kValue, true);
      wc = bind(pname::kCalibration, true);
    }
    const Var query = tape.matvec(wq, h_last[i]);
    keys.clear();
    values.clear();
    for (auto q : matched) {
      const Var rep = tape.constant(pool.cohort(i, q).representation);
      keys.push_back(tape.matvec(wk, rep));
      values.push_back(tape.matvec(wv, rep));
    }
    const Var beta = tape.softmax(tape.dots(query, keys));
    const Var h_prime = tape.weighted_sum(beta, values);
    parts.push_back(tape.dot(tape.row(wc, i), h_prime));
  }
  return parts.size() == 1 ? parts[0] : tape.sum(parts);
}

Var record_exploitation(Tape& tape, const ParamStore& params, ParamStore* trainable,
                        const ExploitSample& sample, const CohortPool& pool, bool train_head) {
  const std::size_t F = pool.num_features();
  if (F == 0 || sample.h_last.size() % F != 0) {
    throw DimensionError("record_exploitation: h_last must be F x d_h");
  }
  const std::size_t d_h = sample.h_last.size() / F;
  std::vector<Var> h(F);
  for (std::size_t i = 0; i < F; ++i) {
    h[i] = tape.constant(std::vector<double>(sample.h_last.begin() + i * d_h,
                                             sample.h_last.begin() + (i + 1) * d_h));
  }
  return record_calibrated_logit(tape, params, trainable, tape.constant(sample.h_tilde_last), h,
                                 sample.bitmap, pool, train_head);
}

namespace {

double validation_score(const ParamStore& params, const CohortPool& pool,
                        std::span<const ExploitSample> valid) {
  if (valid.empty()) return 0.0;
  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto& s : valid) {
    probs.push_back(predict(s.h_tilde_last, s.h_last, s.bitmap, pool, params).probability);
    labels.push_back(s.label);
  }
  return selection_score(probs, labels);
}

}  // namespace

TrainLog train_exploitation(ParamStore& params, const CohortPool& pool,
                            std::span<const ExploitSample> train,
                            std::span<const ExploitSample> valid,
                            const ExploitTrainOptions& opt) {
  TrainLog log;
  if (pool.empty() || train.empty()) {
    log.degenerate = true;
    return log;
  }
  std::vector<std::string> names = params.names_with_prefix("cem.");
  if (opt.train_head) {
    names.push_back(pname::kHeadWeight);
    names.push_back(pname::kHeadBias);
  }
  params.zero_grad(names);
  AdamState adam = make_adam_state(params, {.learning_rate = opt.learning_rate}, names);

  const auto snapshot = [&] {
    std::vector<Tensor2> out;
    for (const auto& n : names) out.push_back(params.at(n).value);
    return out;
  };
  double best = validation_score(params, pool, valid);
  log.valid_score.push_back(best);
  auto best_values = snapshot();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(opt.seed);
  const std::size_t batch = std::max<std::size_t>(1, opt.batch_size);
  std::size_t since_best = 0;
  Tape tape;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double weight = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = train[order[k]];
        tape.clear();
        const Var logit = record_exploitation(tape, params, &params, s, pool, opt.train_head);
        const Var loss = tape.bce_with_logit(logit, s.label, weight);
        epoch_loss += tape.scalar(loss) / weight;
        tape.backward(loss);
      }
      adam_step(params, adam);
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double score = validation_score(params, pool, valid);
    log.valid_score.push_back(score);
    if (score > best) {
      best = score;
      best_values = snapshot();
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < names.size(); ++k) params.at(names[k]).value = best_values[k];
  params.zero_grad(names);
  return log;
}

}  // namespace cohortnet
