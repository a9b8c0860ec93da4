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

#include "cohortnet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cohortnet/errors.hpp"
#include "cohortnet/nn.hpp"
#include "cohortnet/optim.hpp"
#include "cohortnet/rng.hpp"
#include "json.hpp"

namespace cohortnet {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> TrainedModel::feature_names() const {
  std::vector<std::string> out;
  for (const auto& f : encoder.bounds) out.push_back(f.name);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Seed offsets so every stochastic step draws from its own stream.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kStage1Stream = 1;
constexpr std::uint64_t kStateStream = 2;
constexpr std::uint64_t kExploitInitStream = 3;
constexpr std::uint64_t kStage4Stream = 4;

std::vector<double> stage1_probabilities(const ParamStore& params, const EncoderConfig& cfg,
                                         const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  Tape tape;
  for (auto p : idx) {
    tape.clear();
    const EncoderTrace tr = record_encoder(tape, params, nullptr, cfg, data.records[p]);
    out.push_back(sigmoid(tape.scalar(tr.logit)));
  }
  return out;
}

std::vector<int> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto p : idx) out.push_back(data.records[p].label);
  return out;
}

template <typename Fn>
auto run_stage(int stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

ExploitSample make_sample(const EncodedPatient& enc, const StateGrid& grid, const CohortPool& pool,
                          int label) {
  const std::size_t F = grid.num_features;
  const std::size_t T = grid.num_steps;
  const std::size_t d_h = enc.h.size() / (F * T);
  ExploitSample s;
  s.h_tilde_last = enc.h_tilde_last;
  for (std::size_t i = 0; i < F; ++i) {
    const auto first = enc.h.begin() + static_cast<std::ptrdiff_t>((i * T + T - 1) * d_h);
    s.h_last.insert(s.h_last.end(), first, first + static_cast<std::ptrdiff_t>(d_h));
  }
  s.bitmap = identify_cohorts(grid, pool);
  s.label = label;
  return s;
}

// Keeps only h_i^T from the full F x T x d_h block.
std::vector<double> last_step_h(const EncoderOutput& out) {
  std::vector<double> h;
  h.reserve(out.num_features * out.d_h);
  for (std::size_t i = 0; i < out.num_features; ++i) {
    const auto s = out.h_at(i, out.num_steps - 1);
    h.insert(h.end(), s.begin(), s.end());
  }
  return h;
}

struct JointSample {
  std::size_t patient;
  CohortBitmap bitmap;
};

double joint_score(const TrainedModel& m, const Dataset& data, std::span<const JointSample> set) {
  if (set.empty()) return 0.0;
  std::vector<double> probs;
  std::vector<int> labels;
  Tape tape;
  std::vector<Var> h_last(m.encoder.num_features);
  for (const auto& s : set) {
    tape.clear();
    const auto& rec = data.records[s.patient];
    const EncoderTrace tr = record_encoder(tape, m.params, nullptr, m.encoder, rec);
    for (std::size_t i = 0; i < h_last.size(); ++i) {
      h_last[i] = tr.h[i * m.encoder.num_steps + m.encoder.num_steps - 1];
    }
    const Var logit = record_calibrated_logit(tape, m.params, nullptr, tr.h_tilde.back(), h_last,
                                              s.bitmap, m.pool, true);
    probs.push_back(sigmoid(tape.scalar(logit)));
    labels.push_back(rec.label);
  }
  return selection_score(probs, labels);
}

// Stage 4 with the encoder also updated. Bitmaps come from the frozen
// stage-2 states and stay fixed.
TrainLog joint_finetune(TrainedModel& m, const Dataset& data, std::span<const JointSample> train,
                        std::span<const JointSample> valid, const PipelineConfig& cfg) {
  TrainLog log;
  if (m.pool.empty() || train.empty()) {
    log.degenerate = true;
    return log;
  }
  ParamStore& params = m.params;
  const std::vector<std::string> names = params.names();
  params.zero_grad();
  AdamState adam = make_adam_state(params, {.learning_rate = cfg.learning_rate});
  double best = joint_score(m, data, valid);
  log.valid_score.push_back(best);
  ParamStore best_params = params;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed + kStage4Stream);
  const std::size_t T = m.encoder.num_steps;
  std::vector<Var> h_last(m.encoder.num_features);
  std::size_t since_best = 0;
  Tape tape;
  for (std::size_t epoch = 1; epoch <= cfg.epochs_stage4; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = train[order[k]];
        const auto& rec = data.records[s.patient];
        tape.clear();
        const EncoderTrace tr = record_encoder(tape, params, &params, m.encoder, rec);
        for (std::size_t i = 0; i < h_last.size(); ++i) h_last[i] = tr.h[i * T + T - 1];
        const Var logit = record_calibrated_logit(tape, params, &params, tr.h_tilde.back(), h_last,
                                                  s.bitmap, m.pool, true);
        const Var loss = tape.bce_with_logit(logit, rec.label, weight);
        epoch_loss += tape.scalar(loss) / weight;
        tape.backward(loss);
      }
      adam_step(params, adam);
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double score = joint_score(m, data, valid);
    log.valid_score.push_back(score);
    if (score > best) {
      best = score;
      best_params = params;
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  params = std::move(best_params);
  params.zero_grad();
  return log;
}

}  // namespace

Dataset load_pipeline_data(const PipelineConfig& c) {
  if (!c.data_path.empty()) return load_dataset(c.data_path, c.schema_path, c.split, c.effective_split_seed());
  if (!c.synthetic) throw ConfigError("config: no data source");
  // The plan seed fixes the records; split_seed only reshuffles the split.
  auto gen = generate_records(*c.synthetic);
  Dataset ds = build_dataset(gen.schema.features, gen.schema.num_steps, gen.records, c.split,
                             c.split_seed.value_or(c.synthetic->seed));
  ds.planted = std::move(gen.planted);
  return ds;
}

EncoderConfig make_encoder_config(const PipelineConfig& c, const Dataset& data) {
  EncoderConfig e;
  e.num_features = data.num_features();
  e.num_steps = data.num_steps;
  e.d_e = c.d_e;
  e.d_t = c.d_t;
  e.d_o = c.d_o;
  e.d_h = c.d_h;
  e.d_p = c.d_p;
  e.bounds = data.features;
  e.validate();
  return e;
}

TrainLog train_encoder(ParamStore& params, const EncoderConfig& cfg, const Dataset& data,
                       const EncoderTrainOptions& opt) {
  TrainLog log;
  const auto train = data.indices(Split::kTrain);
  const auto valid = data.indices(Split::kValid);
  if (train.empty()) throw ValidationError("train split is empty");
  const auto valid_labels = labels_of(data, valid);
  const auto score = [&] {
    if (valid.empty()) return 0.0;
    return selection_score(stage1_probabilities(params, cfg, data, valid), valid_labels);
  };

  params.zero_grad();
  AdamState adam = make_adam_state(params, {.learning_rate = opt.learning_rate});
  double best = score();
  log.valid_score.push_back(best);
  ParamStore best_params = params;

  std::vector<std::size_t> order(train.begin(), train.end());
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
        const auto& rec = data.records[order[k]];
        tape.clear();
        const EncoderTrace tr = record_encoder(tape, params, &params, cfg, rec);
        const Var loss = tape.bce_with_logit(tr.logit, rec.label, weight);
        epoch_loss += tape.scalar(loss) / weight;
        tape.backward(loss);
      }
      adam_step(params, adam);
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double s = score();
    log.valid_score.push_back(s);
    if (s > best) {
      best = s;
      best_params = params;
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  params = std::move(best_params);
  params.zero_grad();
  return log;
}

std::vector<EncodedPatient> encode_all(const ParamStore& params, const EncoderConfig& cfg,
                                       const Dataset& data) {
  std::vector<EncodedPatient> out;
  out.reserve(data.size());
  for (const auto& rec : data.records) {
    EncoderOutput enc = encode_patient(rec, params, cfg);
    EncodedPatient p;
    p.alpha = std::move(enc.alpha);
    p.o = std::move(enc.o);
    p.h = std::move(enc.h);
    const auto last = enc.h_tilde_at(cfg.num_steps - 1);
    p.h_tilde_last.assign(last.begin(), last.end());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<FeatureStateModel> fit_state_models(std::span<const EncodedPatient> encoded,
                                                const Dataset& data, const EncoderConfig& cfg,
                                                std::size_t k, std::uint64_t seed,
                                                const KMeansOptions& options) {
  const std::size_t F = cfg.num_features;
  const std::size_t T = cfg.num_steps;
  const std::size_t d = cfg.d_o;
  const auto train = data.indices(Split::kTrain);
  std::vector<FeatureStateModel> models;
  std::vector<double> points;
  for (std::size_t f = 0; f < F; ++f) {
    points.clear();
    for (auto p : train) {
      if (!data.records[p].is_present(f)) continue;
      const auto& o = encoded[p].o;
      points.insert(points.end(), o.begin() + (f * T) * d, o.begin() + (f * T + T) * d);
    }
    FeatureStateModel m;
    if (points.empty()) {
      m.feature = f;
      m.requested_k = k;
      m.dim = d;
      m.summaries.assign(1, StateSummary{});
    } else {
      m = fit_states(f, points, d, k, seed + f, options);
    }
    models.push_back(std::move(m));
  }

  // Mean original-scale value and cell count per state over the train split.
  std::vector<std::vector<double>> sums(F);
  for (std::size_t f = 0; f < F; ++f) {
    sums[f].assign(models[f].num_states(), 0.0);
    for (auto& s : models[f].summaries) s = StateSummary{};
  }
  for (auto p : train) {
    const auto& rec = data.records[p];
    const StateGrid g = assign_state_grid(encoded[p].o, rec, models);
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t t = 0; t < T; ++t) {
        const StateId s = g.at(f, t);
        ++models[f].summaries[s].count;
        if (s != kMissingState) sums[f][s] += data.stats.to_raw(f, rec.value(f, t));
      }
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t s = 1; s < models[f].num_states(); ++s) {
      auto& sm = models[f].summaries[s];
      if (sm.count > 0) sm.mean_raw = sums[f][s] / static_cast<double>(sm.count);
    }
  }
  return models;
}

StateGrid assign_state_grid(std::span<const double> o, const PatientRecord& rec,
                            std::span<const FeatureStateModel> models) {
  const std::size_t F = rec.num_features;
  const std::size_t T = rec.num_steps;
  if (models.size() != F) throw DimensionError("assign_state_grid: one state model per feature");
  StateGrid g;
  g.num_features = F;
  g.num_steps = T;
  g.states.assign(F * T, kMissingState);
  if (F == 0 || o.size() % (F * T) != 0) throw DimensionError("assign_state_grid: bad o layout");
  const std::size_t d = o.size() / (F * T);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t t = 0; t < T; ++t) {
      g.at(f, t) = assign_state(o.subspan((f * T + t) * d, d), rec.is_present(f), models[f]);
    }
  }
  return g;
}

std::vector<StateGrid> assign_all_states(std::span<const EncodedPatient> encoded,
                                         const Dataset& data,
                                         std::span<const FeatureStateModel> models) {
  std::vector<StateGrid> out;
  out.reserve(encoded.size());
  for (std::size_t p = 0; p < encoded.size(); ++p) {
    out.push_back(assign_state_grid(encoded[p].o, data.records[p], models));
  }
  return out;
}

CohortPool build_train_pool(std::span<const EncodedPatient> encoded,
                            std::span<const StateGrid> grids, const Dataset& data,
                            const EncoderConfig& cfg, std::size_t n,
                            const FrequencyFilter& filter, PoolBuildStats* stats) {
  const auto train = data.indices(Split::kTrain);
  std::vector<StateGrid> train_grids;
  std::vector<std::vector<double>> alphas;
  std::vector<int> labels;
  train_grids.reserve(train.size());
  alphas.reserve(train.size());
  for (auto p : train) {
    train_grids.push_back(grids[p]);
    alphas.push_back(encoded[p].alpha);
    labels.push_back(data.records[p].label);
  }
  const std::size_t T = cfg.num_steps;
  const std::size_t d_h = cfg.d_h;
  const RepresentationFn rep = [&](std::size_t patient, std::size_t anchor, std::size_t step) {
    const auto& h = encoded[train[patient]].h;
    return std::span<const double>(h.data() + (anchor * T + step) * d_h, d_h);
  };
  return build_pool(train_grids, alphas, rep, labels, n, filter, d_h, stats);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset& data) {
  PipelineResult res;
  TrainedModel& m = res.model;
  m.config = cfg;
  m.stats = data.stats;
  m.encoder = run_stage(1, [&] { return make_encoder_config(cfg, data); });
  m.exploit = ExploitConfig{cfg.d_a, cfg.effective_d_v()};
  if (cfg.n >= m.encoder.num_features) {
    throw StageError(3, "n must be smaller than the number of features");
  }

  auto t0 = Clock::now();
  res.stage1_log = run_stage(1, [&] {
    Rng rng(cfg.seed + kInitStream);
    init_encoder_params(m.params, m.encoder, rng);
    return train_encoder(m.params, m.encoder, data,
                         {cfg.epochs_stage1, cfg.batch_size, cfg.learning_rate, cfg.patience,
                          cfg.seed + kStage1Stream});
  });
  res.timings.stage1 = seconds_since(t0);
  res.test_stage1 = run_stage(1, [&] { return evaluate_split(m, data, Split::kTest, true); });

  if (!cfg.use_cohorts) {
    m.cohorts_enabled = false;
    m.pool = CohortPool(m.encoder.num_features, m.encoder.d_h + LabelStats::kWidth);
    res.test = res.test_stage1;
    return res;
  }

  t0 = Clock::now();
  const auto encoded = run_stage(2, [&] { return encode_all(m.params, m.encoder, data); });
  res.timings.encode = seconds_since(t0);

  t0 = Clock::now();
  std::vector<StateGrid> grids = run_stage(2, [&] {
    m.states = fit_state_models(encoded, data, m.encoder, cfg.k, cfg.seed + kStateStream, cfg.kmeans);
    return assign_all_states(encoded, data, m.states);
  });
  res.timings.stage2 = seconds_since(t0);

  t0 = Clock::now();
  m.pool = run_stage(3, [&] {
    return build_train_pool(encoded, grids, data, m.encoder, cfg.n, cfg.filter, &res.pool_stats);
  });
  res.timings.stage3 = seconds_since(t0);

  t0 = Clock::now();
  run_stage(4, [&] {
    Rng rng(cfg.seed + kExploitInitStream);
    init_exploit_params(m.params, m.encoder.num_features, m.encoder.d_h,
                        m.pool.representation_width(), m.exploit, rng);
    m.cohorts_enabled = true;
    const auto train = data.indices(Split::kTrain);
    const auto valid = data.indices(Split::kValid);
    if (cfg.joint_finetune) {
      std::vector<JointSample> tr, va;
      for (auto p : train) tr.push_back({p, identify_cohorts(grids[p], m.pool)});
      for (auto p : valid) va.push_back({p, identify_cohorts(grids[p], m.pool)});
      res.stage4_log = joint_finetune(m, data, tr, va, cfg);
      return 0;
    }
    std::vector<ExploitSample> tr, va;
    for (auto p : train) tr.push_back(make_sample(encoded[p], grids[p], m.pool, data.records[p].label));
    for (auto p : valid) va.push_back(make_sample(encoded[p], grids[p], m.pool, data.records[p].label));
    ExploitTrainOptions opt;
    opt.epochs = cfg.epochs_stage4;
    opt.batch_size = cfg.batch_size;
    opt.learning_rate = cfg.learning_rate;
    opt.patience = cfg.patience;
    opt.train_head = cfg.finetune_head;
    opt.seed = cfg.seed + kStage4Stream;
    res.stage4_log = train_exploitation(m.params, m.pool, tr, va, opt);
    return 0;
  });
  res.timings.stage4 = seconds_since(t0);

  res.test = run_stage(4, [&] { return evaluate_split(m, data, Split::kTest); });
  return res;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const Dataset data = load_pipeline_data(cfg);
  return run_pipeline(cfg, data);
}

PatientAnalysis analyze_patient(const TrainedModel& m, const PatientRecord& rec) {
  if (rec.num_features != m.encoder.num_features || rec.num_steps != m.encoder.num_steps) {
    throw DimensionError("patient shape does not match the model");
  }
  PatientAnalysis a;
  a.encoding = encode_patient(rec, m.params, m.encoder);
  const auto h_last = last_step_h(a.encoding);
  const auto ht = a.encoding.h_tilde_at(m.encoder.num_steps - 1);
  if (m.cohorts_enabled) {
    a.states = assign_state_grid(a.encoding.o, rec, m.states);
    a.bitmap = identify_cohorts(a.states, m.pool);
    a.report = predict(ht, h_last, a.bitmap, m.pool, m.params);
  } else {
    a.report.base_logit = base_logit(a.encoding, m.params);
    a.report.logit = a.report.base_logit;
    a.report.probability = a.report.base_probability = sigmoid(a.report.base_logit);
  }
  return a;
}

std::vector<double> predict_probabilities(const TrainedModel& m, const Dataset& data,
                                          std::span<const std::size_t> idx, bool stage1_only) {
  if (stage1_only || !m.cohorts_enabled) return stage1_probabilities(m.params, m.encoder, data, idx);
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto p : idx) {
    const auto& rec = data.records[p];
    const EncoderOutput enc = encode_patient(rec, m.params, m.encoder);
    const StateGrid g = assign_state_grid(enc.o, rec, m.states);
    const CohortBitmap bm = identify_cohorts(g, m.pool);
    out.push_back(
        predict(enc.h_tilde_at(m.encoder.num_steps - 1), last_step_h(enc), bm, m.pool, m.params)
            .probability);
  }
  return out;
}

std::vector<StateGrid> split_state_grids(const TrainedModel& m, const Dataset& data, Split split) {
  if (m.states.size() != m.encoder.num_features) throw StateError("model has no state models");
  std::vector<StateGrid> out;
  for (auto p : data.indices(split)) {
    const auto& rec = data.records[p];
    out.push_back(assign_state_grid(encode_patient(rec, m.params, m.encoder).o, rec, m.states));
  }
  return out;
}

EvalResult evaluate_split(const TrainedModel& m, const Dataset& data, Split split,
                          bool stage1_only) {
  const auto idx = data.indices(split);
  const auto probs = predict_probabilities(m, data, idx, stage1_only);
  return evaluate(probs, labels_of(data, idx));
}

// --- persistence -----------------------------------------------------------

std::string serialize_states(const std::vector<FeatureStateModel>& states,
                             std::span<const std::string> names) {
  json arr = json::array();
  for (const auto& m : states) {
    json s;
    s["feature"] = m.feature;
    if (m.feature < names.size()) s["name"] = names[m.feature];
    s["requested_k"] = m.requested_k;
    s["k"] = m.k;
    s["dim"] = m.dim;
    s["centroids"] = m.centroids;
    s["inertia_history"] = m.inertia_history;
    json sums = json::array();
    for (const auto& sm : m.summaries) sums.push_back({{"mean_raw", sm.mean_raw}, {"count", sm.count}});
    s["summaries"] = sums;
    arr.push_back(s);
  }
  return json{{"format", "cohortnet-states"}, {"version", 1}, {"features", arr}}.dump();
}

std::vector<FeatureStateModel> deserialize_states(const std::string& text) {
  std::vector<FeatureStateModel> out;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "cohortnet-states") throw ParseError("states: wrong format tag");
    for (const auto& s : j.at("features")) {
      FeatureStateModel m;
      m.feature = s.at("feature").get<std::size_t>();
      m.requested_k = s.at("requested_k").get<std::size_t>();
      m.k = s.at("k").get<std::size_t>();
      m.dim = s.at("dim").get<std::size_t>();
      m.centroids = s.at("centroids").get<std::vector<double>>();
      m.inertia_history = s.at("inertia_history").get<std::vector<double>>();
      for (const auto& sm : s.at("summaries")) {
        m.summaries.push_back({sm.at("mean_raw").get<double>(), sm.at("count").get<std::size_t>()});
      }
      if (m.centroids.size() != m.k * m.dim || m.summaries.size() != m.k + 1) {
        throw ParseError("states: inconsistent sizes for feature " + std::to_string(m.feature));
      }
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("states: ") + e.what());
  }
  return out;
}

std::string eval_to_json(const EvalResult& e) {
  return json{{"auc_roc", e.auc_roc}, {"auc_pr", e.auc_pr}, {"f1", e.f1},
              {"tp", e.tp},           {"fp", e.fp},         {"tn", e.tn},
              {"fn", e.fn}}
      .dump();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_model(const TrainedModel& m, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);
  json meta;
  meta["format"] = "cohortnet-model";
  meta["version"] = 1;
  meta["config"] = json::parse(config_to_json(m.config));
  json feats = json::array();
  for (const auto& f : m.encoder.bounds) {
    feats.push_back({{"name", f.name}, {"lower", f.lower}, {"upper", f.upper}});
  }
  meta["features"] = feats;
  meta["num_steps"] = m.encoder.num_steps;
  meta["encoder"] = {{"d_e", m.encoder.d_e}, {"d_t", m.encoder.d_t}, {"d_o", m.encoder.d_o},
                     {"d_h", m.encoder.d_h}, {"d_p", m.encoder.d_p}};
  meta["exploit"] = {{"d_a", m.exploit.d_a}, {"d_v", m.exploit.d_v}};
  meta["standardization"] = {{"mean", m.stats.mean}, {"stddev", m.stats.stddev}};
  meta["cohorts_enabled"] = m.cohorts_enabled;
  write_text(root / "model.json", meta.dump(2));
  save_params(m.params, (root / "model.params").string());
  write_text(root / "states.json", serialize_states(m.states, m.feature_names()));
  save_pool(m.pool, (root / "pool.jsonl").string());
}

TrainedModel load_model(const std::string& dir) {
  const fs::path root(dir);
  TrainedModel m;
  try {
    const json meta = json::parse(read_text(root / "model.json"));
    if (meta.value("format", "") != "cohortnet-model") throw ParseError("model.json: wrong format tag");
    m.config = parse_config(meta.at("config").dump());
    for (const auto& f : meta.at("features")) {
      m.encoder.bounds.push_back(
          {f.at("name").get<std::string>(), f.at("lower").get<double>(), f.at("upper").get<double>()});
    }
    m.encoder.num_features = m.encoder.bounds.size();
    m.encoder.num_steps = meta.at("num_steps").get<std::size_t>();
    const auto& e = meta.at("encoder");
    m.encoder.d_e = e.at("d_e");
    m.encoder.d_t = e.at("d_t");
    m.encoder.d_o = e.at("d_o");
    m.encoder.d_h = e.at("d_h");
    m.encoder.d_p = e.at("d_p");
    m.exploit.d_a = meta.at("exploit").at("d_a");
    m.exploit.d_v = meta.at("exploit").at("d_v");
    m.stats.mean = meta.at("standardization").at("mean").get<std::vector<double>>();
    m.stats.stddev = meta.at("standardization").at("stddev").get<std::vector<double>>();
    m.cohorts_enabled = meta.at("cohorts_enabled").get<bool>();
  } catch (const json::exception& ex) {
    throw ParseError(std::string("model.json: ") + ex.what());
  }
  m.encoder.validate();
  m.params = load_params((root / "model.params").string());
  m.states = deserialize_states(read_text(root / "states.json"));
  m.pool = load_pool((root / "pool.jsonl").string());
  if (m.cohorts_enabled && m.states.size() != m.encoder.num_features) {
    throw ParseError("states.json: expected one state model per feature");
  }
  return m;
}

}  // namespace cohortnet
