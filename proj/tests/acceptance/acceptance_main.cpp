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

// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "cohortnet/config.hpp"
#include "cohortnet/data.hpp"
#include "cohortnet/discovery.hpp"
#include "cohortnet/encoder.hpp"
#include "cohortnet/exploit.hpp"
#include "cohortnet/metrics.hpp"
#include "cohortnet/nn.hpp"
#include "cohortnet/optim.hpp"
#include "cohortnet/pipeline.hpp"
#include "cohortnet/pool.hpp"
#include "cohortnet/rng.hpp"
#include "cohortnet/tape.hpp"

using namespace cohortnet;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random record with some absent features and unobserved cells.
PatientRecord random_record(Rng& rng, std::size_t F, std::size_t T) {
  PatientRecord r;
  r.id = "r";
  r.label = rng.bernoulli(0.5) ? 1 : 0;
  r.num_features = F;
  r.num_steps = T;
  r.values.resize(F * T);
  r.observed.assign(F * T, 1);
  r.present.assign(F, 1);
  for (auto& v : r.values) v = rng.normal(0.0, 1.5);
  if (F > 1) r.present[rng.below(F)] = 0;
  for (std::size_t f = 0; f < F; ++f) {
    if (!r.present[f]) {
      for (std::size_t t = 0; t < T; ++t) r.values[f * T + t] = 0.0, r.observed[f * T + t] = 0;
    }
  }
  return r;
}

EncoderConfig small_encoder(std::size_t F, std::size_t T) {
  EncoderConfig c;
  c.num_features = F;
  c.num_steps = T;
  c.d_e = 4;
  c.d_t = 5;
  c.d_o = 3;
  c.d_h = 6;
  c.d_p = 2;
  for (std::size_t f = 0; f < F; ++f) c.bounds.push_back({"f" + std::to_string(f), -2.0, 2.0});
  return c;
}

// ---------------------------------------------------------------------------
Outcome criterion1() {
  const auto t0 = Clock::now();
  const std::size_t F = 3, T = 4;
  double worst_enc = 0.0, worst_cem = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const EncoderConfig cfg = small_encoder(F, T);
    ParamStore params;
    init_encoder_params(params, cfg, rng);
    std::vector<PatientRecord> batch;
    for (int b = 0; b < 3; ++b) batch.push_back(random_record(rng, F, T));
    batch[0].present.assign(F, 1);
    for (std::size_t k = 0; k < F * T; ++k) batch[0].values[k] = rng.normal(0.0, 1.5);

    const auto enc_loss = [&] {
      double acc = 0.0;
      for (const auto& r : batch) {
        Tape tape;
        const auto tr = record_encoder(tape, params, nullptr, cfg, r);
        acc += tape.scalar(tape.bce_with_logit(tr.logit, r.label, 1.0 / batch.size()));
      }
      return acc;
    };
    const auto enc_grad = [&] {
      for (const auto& r : batch) {
        Tape tape;
        const auto tr = record_encoder(tape, params, &params, cfg, r);
        tape.backward(tape.bce_with_logit(tr.logit, r.label, 1.0 / batch.size()));
      }
    };
    const auto g1 = check_gradients(params, enc_loss, enc_grad);
    worst_enc = std::max(worst_enc, g1.max_rel_error);
    checked += g1.checked;

    // Exploitation: random pool over F anchors, one sample per patient.
    const std::size_t R = cfg.d_h + LabelStats::kWidth;
    CohortPool pool(F, R);
    for (std::size_t a = 0; a < F; ++a) {
      for (StateId s = 1; s <= 3; ++s) {
        Cohort c;
        c.pattern.anchor = a;
        c.pattern.items = {{static_cast<std::uint32_t>(a), s}};
        c.representation.resize(R);
        for (auto& v : c.representation) v = rng.normal();
        pool.add(std::move(c));
      }
    }
    init_exploit_params(params, F, cfg.d_h, R, {5, 3}, rng);
    for (auto& v : params.at(pname::kCalibration).value.values) v = rng.normal(0.0, 0.5);
    std::vector<ExploitSample> samples(3);
    for (auto& s : samples) {
      s.h_tilde_last.resize(F * cfg.d_p);
      s.h_last.resize(F * cfg.d_h);
      for (auto& v : s.h_tilde_last) v = rng.normal();
      for (auto& v : s.h_last) v = rng.normal();
      s.bitmap.bits.assign(F, std::vector<std::uint8_t>(3, 0));
      for (auto& row : s.bitmap.bits)
        for (auto& b : row) b = rng.bernoulli(0.6) ? 1 : 0;
      s.label = rng.bernoulli(0.5) ? 1 : 0;
    }
    const auto cem_loss = [&] {
      double acc = 0.0;
      for (const auto& s : samples) {
        Tape tape;
        const Var z = record_exploitation(tape, params, nullptr, s, pool, true);
        acc += tape.scalar(tape.bce_with_logit(z, s.label, 1.0 / samples.size()));
      }
      return acc;
    };
    const auto cem_grad = [&] {
      for (const auto& s : samples) {
        Tape tape;
        const Var z = record_exploitation(tape, params, &params, s, pool, true);
        tape.backward(tape.bce_with_logit(z, s.label, 1.0 / samples.size()));
      }
    };
    auto names = params.names_with_prefix("cem.");
    names.push_back(pname::kHeadWeight);
    names.push_back(pname::kHeadBias);
    const auto g2 = check_gradients(params, cem_loss, cem_grad, names);
    worst_cem = std::max(worst_cem, g2.max_rel_error);
    checked += g2.checked;
  }
  const double secs = elapsed(t0);
  return {worst_enc < 1e-4 && worst_cem < 1e-4 && secs < 60.0,
          fmt("max rel err encoder+head %.2e, exploitation %.2e over %zu entries, 20 seeds, %.1fs",
              worst_enc, worst_cem, checked, secs)};
}

// ---------------------------------------------------------------------------
Outcome criterion2() {
  const auto t0 = Clock::now();
  SyntheticPlan plan;
  plan.num_records = 625;
  plan.seed = 11;
  plan.planted.push_back({{0, 2}, {{1.5, 3.0}, {1.5, 3.0}}, 0.7, 0.3});
  const Dataset data = generate_synthetic(plan);
  Rng rng(5);
  EncoderConfig cfg = small_encoder(data.num_features(), data.num_steps);
  cfg.bounds = data.features;
  ParamStore params;
  init_encoder_params(params, cfg, rng);
  const auto encoded = encode_all(params, cfg, data);
  auto models = fit_state_models(encoded, data, cfg, 3, 3, {});
  const auto grids = assign_all_states(encoded, data, models);
  const CohortPool pool = build_train_pool(encoded, grids, data, cfg, 1, {5, 2});
  init_exploit_params(params, cfg.num_features, cfg.d_h, pool.representation_width(), {8, 4}, rng);
  for (auto& v : params.at(pname::kCalibration).value.values) v = rng.normal();

  double worst_z = 0.0, worst_feature = 0.0;
  std::size_t patients = 0, matched_cohorts = 0;
  for (std::size_t p = 0; p < data.size() && patients < 500; ++p, ++patients) {
    const auto& e = encoded[p];
    std::vector<double> h_last;
    const std::size_t T = cfg.num_steps;
    for (std::size_t i = 0; i < cfg.num_features; ++i) {
      h_last.insert(h_last.end(), e.h.begin() + (i * T + T - 1) * cfg.d_h,
                    e.h.begin() + (i * T + T) * cfg.d_h);
    }
    const CohortBitmap bm = identify_cohorts(grids[p], pool);
    matched_cohorts += bm.count();
    const CalibrationReport r = predict(e.h_tilde_last, h_last, bm, pool, params);
    double z = 0.0;
    for (const auto& fc : r.features) {
      double s = 0.0;
      for (double c : fc.cohort_scores) s += c;
      worst_feature = std::max(worst_feature, std::abs(fc.score - s));
      z += fc.score;
    }
    worst_z = std::max(worst_z, std::abs(r.z - z));
    worst_z = std::max(worst_z, std::abs(r.logit - (r.base_logit + r.z)));
  }
  return {patients == 500 && worst_z < 1e-12 && worst_feature < 1e-12 && matched_cohorts > 0,
          fmt("%zu patients, %zu matched cohorts, |z - sum| = %.1e, |feature - sum| = %.1e, %.1fs",
              patients, matched_cohorts, worst_z, worst_feature, elapsed(t0))};
}

// ---------------------------------------------------------------------------
std::vector<StateGrid> random_grids(Rng& rng, std::size_t P, std::size_t F, std::size_t T,
                                    std::size_t k) {
  std::vector<StateGrid> grids(P);
  for (auto& g : grids) {
    g.num_features = F;
    g.num_steps = T;
    g.states.resize(F * T);
    for (std::size_t f = 0; f < F; ++f) {
      const bool absent = rng.bernoulli(0.05);
      for (std::size_t t = 0; t < T; ++t) {
        g.at(f, t) = absent ? kMissingState : static_cast<StateId>(1 + rng.below(k));
      }
    }
  }
  return grids;
}

std::vector<std::vector<double>> random_alphas(Rng& rng, std::size_t P, std::size_t F,
                                               std::size_t T) {
  std::vector<std::vector<double>> out(P, std::vector<double>(F * T * F, 0.0));
  for (auto& a : out) {
    for (std::size_t i = 0; i < F; ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> logits;
        for (std::size_t j = 0; j < F; ++j)
          if (j != i) logits.push_back(rng.normal());
        const auto w = softmax(logits);
        for (std::size_t j = 0, m = 0; j < F; ++j)
          if (j != i) a[(i * T + t) * F + j] = w[m++];
      }
    }
  }
  return out;
}

bool cell_matches(const StateGrid& g, std::size_t t, const CohortPattern& pat) {
  for (const auto& it : pat.items)
    if (g.at(it.feature, t) != it.state) return false;
  return true;
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  const std::size_t P = 200, F = 5, T = 8, k = 3, d = 4;
  Rng rng(33);
  const auto grids = random_grids(rng, P, F, T, k);
  const auto alphas = random_alphas(rng, P, F, T);
  std::vector<double> reps(P * F * T * d);
  for (auto& v : reps) v = rng.normal();
  std::vector<int> labels(P);
  for (auto& l : labels) l = rng.bernoulli(0.3) ? 1 : 0;
  const RepresentationFn repfn = [&](std::size_t p, std::size_t a, std::size_t t) {
    return std::span<const double>(reps.data() + ((p * F + a) * T + t) * d, d);
  };
  const CohortPool pool = build_pool(grids, alphas, repfn, labels, 1, {8, 4}, d);
  const StateIndex index(grids);

  std::size_t retrieval_mismatch = 0, bitmap_mismatch = 0;
  for (std::size_t a = 0; a < F; ++a) {
    for (const auto& c : pool.cohorts(a)) {
      std::vector<Occurrence> brute;
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t t = 0; t < T; ++t)
          if (cell_matches(grids[p], t, c.pattern))
            brute.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(t)});
      if (retrieve_patients(c.pattern, index) != brute) ++retrieval_mismatch;
    }
  }
  for (std::size_t p = 0; p < P; ++p) {
    const CohortBitmap bm = identify_cohorts(grids[p], pool);
    for (std::size_t a = 0; a < F; ++a) {
      for (std::size_t q = 0; q < pool.cohorts(a).size(); ++q) {
        bool hit = false;
        for (std::size_t t = 0; t < T && !hit; ++t) hit = cell_matches(grids[p], t, pool.cohort(a, q).pattern);
        if (static_cast<bool>(bm.bits[a][q]) != hit) ++bitmap_mismatch;
      }
    }
  }
  const double secs = elapsed(t0);
  return {pool.size() >= 30 && retrieval_mismatch == 0 && bitmap_mismatch == 0 && secs < 60.0,
          fmt("%zu patients, %zu cohorts, retrieval mismatches %zu, bitmap mismatches %zu, %.2fs", P,
              pool.size(), retrieval_mismatch, bitmap_mismatch, secs)};
}

// ---------------------------------------------------------------------------
Outcome criterion4() {
  const std::size_t P = 40, F = 5, T = 6;
  Rng rng(44);
  const auto grids = random_grids(rng, P, F, T, 3);
  const auto alphas = random_alphas(rng, P, F, T);
  std::size_t patterns = 0, bad = 0, occurrences = 0;
  for (std::size_t n = 0; n < F; ++n) {
    for (const auto& po : enumerate_patterns(grids, alphas, n)) {
      ++patterns;
      occurrences += po.occurrences.size();
      const auto feats = po.pattern.features();
      const std::set<std::uint32_t> uniq(feats.begin(), feats.end());
      if (po.pattern.items.size() != n + 1 || uniq.size() != n + 1 ||
          !po.pattern.contains_feature(po.pattern.anchor)) {
        ++bad;
      }
    }
  }
  // Every (patient, step, anchor) triple is accounted for once per n.
  const bool complete = occurrences == F * P * T * F;
  return {bad == 0 && complete && patterns > 0,
          fmt("%zu patterns for n = 0..%zu, %zu violations, %zu occurrences (expected %zu)",
              patterns, F - 1, bad, occurrences, F * P * T * F)};
}

// ---------------------------------------------------------------------------
Outcome criterion5() {
  // Inertia monotonicity on random clouds.
  std::size_t increases = 0, runs = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const std::size_t dim = 1 + seed % 4, n = 150;
    std::vector<double> pts(n * dim);
    for (auto& v : pts) v = rng.normal(0.0, 3.0);
    const auto km = kmeans(pts, dim, 2 + seed % 6, seed);
    ++runs;
    for (std::size_t i = 1; i < km.inertia_history.size(); ++i) {
      const double prev = km.inertia_history[i - 1];
      if (km.inertia_history[i] > prev + 1e-12 * std::max(1.0, prev)) ++increases;
    }
  }
  // Brute-force optimum over every assignment of 9 points to 3 clusters.
  const std::vector<double> pts{0, 1, 2, 10, 11, 12, 20, 21, 22};
  double best = INFINITY;
  std::vector<double> best_centres;
  std::vector<int> lab(9, 0);
  for (int code = 0; code < 19683; ++code) {
    int c = code;
    for (auto& l : lab) l = c % 3, c /= 3;
    double sum[3] = {0, 0, 0};
    int cnt[3] = {0, 0, 0};
    for (int i = 0; i < 9; ++i) sum[lab[i]] += pts[i], ++cnt[lab[i]];
    if (!cnt[0] || !cnt[1] || !cnt[2]) continue;
    double sse = 0.0;
    for (int i = 0; i < 9; ++i) {
      const double m = sum[lab[i]] / cnt[lab[i]];
      sse += (pts[i] - m) * (pts[i] - m);
    }
    if (sse < best - 1e-12) {
      best = sse;
      best_centres = {sum[0] / cnt[0], sum[1] / cnt[1], sum[2] / cnt[2]};
      std::sort(best_centres.begin(), best_centres.end());
    }
  }
  const auto km = kmeans(pts, 1, 3, 7);
  const bool optimal = best_centres == std::vector<double>{1, 11, 21} && km.centroids == best_centres &&
                       std::abs(km.inertia - best) < 1e-9;

  // Absent features map to s0 for every representation.
  FeatureStateModel model = fit_states(0, pts, 1, 3, 7);
  bool missing_ok = true;
  for (double x : {-50.0, 0.0, 11.0, 1e6}) {
    const std::vector<double> o{x};
    missing_ok = missing_ok && assign_state(o, false, model) == kMissingState &&
                 assign_state(o, true, model) != kMissingState;
  }
  SyntheticPlan plan;
  plan.num_records = 300;
  plan.absence_rate = 0.2;
  plan.seed = 5;
  const Dataset data = generate_synthetic(plan);
  Rng rng(2);
  EncoderConfig cfg = small_encoder(data.num_features(), data.num_steps);
  cfg.bounds = data.features;
  ParamStore params;
  init_encoder_params(params, cfg, rng);
  const auto enc = encode_all(params, cfg, data);
  const auto models = fit_state_models(enc, data, cfg, 4, 1, {});
  const auto grids = assign_all_states(enc, data, models);
  std::size_t absent_cells = 0;
  for (std::size_t p = 0; p < data.size(); ++p) {
    for (std::size_t f = 0; f < data.num_features(); ++f) {
      for (std::size_t t = 0; t < data.num_steps; ++t) {
        const bool s0 = grids[p].at(f, t) == kMissingState;
        if (s0 != !data.records[p].is_present(f)) missing_ok = false;
        absent_cells += s0;
      }
    }
  }
  return {increases == 0 && optimal && missing_ok && absent_cells > 0,
          fmt("%zu runs, %zu inertia increases; 9-point centroids {%g,%g,%g} vs brute force "
              "{%g,%g,%g}; %zu absent cells all s0 = %s",
              runs, increases, km.centroids[0], km.centroids[1], km.centroids[2], best_centres[0],
              best_centres[1], best_centres[2], absent_cells, missing_ok ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
SyntheticPlan planted_plan(std::uint64_t seed) {
  SyntheticPlan plan;
  plan.num_features = 5;
  plan.num_steps = 8;
  plan.num_records = 2000;
  plan.base_rate = 0.1;
  plan.seed = seed;
  plan.planted.push_back({{0, 2}, {{1.5, 3.0}, {1.5, 3.0}}, 0.7, 0.3});
  return plan;
}

PipelineConfig planted_config(std::uint64_t seed) {
  PipelineConfig c;
  c.synthetic = planted_plan(seed);
  c.seed = seed;
  c.k = 5;
  c.n = 1;
  return c;
}

struct SeedRun {
  bool recovered = false;
  double best_pos_rate = 0.0;
  double overall_rate = 0.0;
  double full_pr = 0.0;
  double stage1_pr = 0.0;
  double seconds = 0.0;
};

std::vector<SeedRun>& planted_runs() {
  static std::vector<SeedRun> runs;
  if (!runs.empty()) return runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t0 = Clock::now();
    const PipelineConfig cfg = planted_config(seed);
    const Dataset data = load_pipeline_data(cfg);
    const PipelineResult res = run_pipeline(cfg, data);
    SeedRun r;
    const auto& plan = *cfg.synthetic;
    for (std::size_t a = 0; a < res.model.pool.num_features(); ++a) {
      for (const auto& c : res.model.pool.cohorts(a)) {
        if (!c.pattern.contains_feature(0) || !c.pattern.contains_feature(2)) continue;
        r.best_pos_rate = std::max(r.best_pos_rate, c.pos_rate);
        if (c.pos_rate > plan.base_rate + 0.15) r.recovered = true;
      }
    }
    std::size_t pos = 0;
    const auto train = data.indices(Split::kTrain);
    for (auto p : train) pos += data.records[p].label;
    r.overall_rate = static_cast<double>(pos) / train.size();
    r.full_pr = res.test.auc_pr;
    r.stage1_pr = res.test_stage1.auc_pr;
    r.seconds = elapsed(t0);
    std::printf("  seed %llu: pool %zu, best planted-pair pos-rate %.3f (train rate %.3f), "
                "AUC-PR full %.4f vs stage-1 %.4f, %.1fs\n",
                static_cast<unsigned long long>(seed), res.model.pool.size(), r.best_pos_rate,
                r.overall_rate, r.full_pr, r.stage1_pr, r.seconds);
    runs.push_back(r);
  }
  return runs;
}

Outcome criterion6() {
  const auto& runs = planted_runs();
  std::size_t ok = 0;
  double total = 0.0;
  for (const auto& r : runs) ok += r.recovered, total += r.seconds;
  return {ok >= 4 && total < 600.0,
          fmt("planted pair recovered with pos-rate > 0.25 in %zu/5 seeds, %.0fs total", ok, total)};
}

Outcome criterion7() {
  const auto& runs = planted_runs();
  std::size_t ok = 0;
  double mean = 0.0;
  for (const auto& r : runs) {
    ok += r.full_pr >= r.stage1_pr;
    mean += (r.full_pr - r.stage1_pr) / runs.size();
  }
  return {ok >= 4 && mean > 0.0,
          fmt("full >= stage-1 AUC-PR in %zu/5 seeds, mean improvement %+.4f", ok, mean)};
}

// ---------------------------------------------------------------------------
double brute_roc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

double brute_ap(const std::vector<double>& s, const std::vector<int>& y) {
  // Rank r of item i: items with a higher score, or an equal score and an
  // earlier position, come first.
  const std::size_t n = s.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
    rank[i] = r;
  }
  double total = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!y[i]) continue;
    ++positives;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (y[j] && rank[j] <= rank[i]) ++hits;
    total += static_cast<double>(hits) / static_cast<double>(rank[i] + 1);
  }
  return total / static_cast<double>(positives);
}

double brute_f1(const std::vector<double>& s, const std::vector<int>& y) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool pred = s[i] >= 0.5;
    tp += pred && y[i];
    fp += pred && !y[i];
    fn += !pred && y[i];
  }
  const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
}

Outcome criterion8() {
  Rng rng(88);
  double worst = 0.0;
  std::size_t instances = 0;
  while (instances < 1000) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.bernoulli(0.3) ? static_cast<double>(rng.below(4)) / 4.0 : rng.uniform();
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    const int pos = std::accumulate(y.begin(), y.end(), 0);
    if (pos == 0 || pos == static_cast<int>(n)) continue;
    ++instances;
    worst = std::max(worst, std::abs(auc_roc(s, y) - brute_roc(s, y)));
    worst = std::max(worst, std::abs(auc_pr(s, y) - brute_ap(s, y)));
    worst = std::max(worst, std::abs(f1_score(s, y) - brute_f1(s, y)));
  }
  const std::vector<double> s4{0.9, 0.8, 0.7, 0.6};
  const std::vector<int> y4{1, 0, 1, 0};
  const double ap = auc_pr(s4, y4);
  return {worst < 1e-12 && ap == 5.0 / 6.0,
          fmt("%zu instances, max deviation %.1e; 4-point AP = %.17g (5/6 = %.17g)", instances,
              worst, ap, 5.0 / 6.0)};
}

// ---------------------------------------------------------------------------
struct StageCost {
  double stage1 = 0.0;
  double stage23 = 0.0;
};

// Minimum over repeats, stage 1 limited to a fixed number of epochs.
StageCost measure(std::size_t F, std::size_t N, int repeats) {
  StageCost best{INFINITY, INFINITY};
  for (int r = 0; r < repeats; ++r) {
    PipelineConfig cfg;
    SyntheticPlan plan;
    plan.num_features = F;
    plan.num_steps = 8;
    plan.num_records = N;
    plan.seed = 3;
    plan.planted.push_back({{0, 2}, {{1.5, 3.0}, {1.5, 3.0}}, 0.7, 0.3});
    cfg.synthetic = plan;
    cfg.seed = 3;
    cfg.epochs_stage1 = 1;
    cfg.epochs_stage4 = 0;
    const Dataset data = load_pipeline_data(cfg);
    const PipelineResult res = run_pipeline(cfg, data);
    best.stage1 = std::min(best.stage1, res.timings.stage1);
    best.stage23 = std::min(best.stage23, res.timings.stage2 + res.timings.stage3);
  }
  return best;
}

Outcome criterion9() {
  const StageCost f5 = measure(5, 1000, 3);
  const StageCost f10 = measure(10, 1000, 3);
  const StageCost n1 = measure(5, 1000, 3);
  const StageCost n2 = measure(5, 2000, 3);
  const StageCost n4 = measure(5, 4000, 3);
  const double r_s1 = f10.stage1 / f5.stage1;
  const double r_s23 = f10.stage23 / f5.stage23;
  const double r_n12 = n2.stage23 / n1.stage23;
  const double r_n24 = n4.stage23 / n2.stage23;
  const bool pass = r_s1 < 4.0 && r_s23 < 8.0 && r_n12 > 2.0 && r_n12 < 4.0 && r_n24 > 2.0 &&
                    r_n24 < 4.0;
  return {pass, fmt("doubling F: stage-1 x%.2f, stage-2/3 x%.2f; doubling N: stage-2/3 "
                    "x%.2f (1000->2000), x%.2f (2000->4000)",
                    r_s1, r_s23, r_n12, r_n24)};
}

// ---------------------------------------------------------------------------
Outcome criterion10() {
  PipelineConfig cfg = planted_config(9);
  cfg.synthetic->num_records = 600;
  cfg.epochs_stage1 = 4;
  cfg.epochs_stage4 = 4;
  cfg.filter = {20, 5};
  const PipelineResult a = run_pipeline(cfg);
  const PipelineResult b = run_pipeline(cfg);
  const bool params_same = serialize_params(a.model.params) == serialize_params(b.model.params);
  const bool pool_same = serialize_pool(a.model.pool) == serialize_pool(b.model.pool);
  const auto names = a.model.feature_names();
  const bool states_same =
      serialize_states(a.model.states, names) == serialize_states(b.model.states, names);
  const bool eval_same = a.test == b.test && a.test_stage1 == b.test_stage1;
  return {params_same && pool_same && states_same && eval_same && !a.model.pool.empty(),
          fmt("checkpoint %s, pool (%zu cohorts) %s, states %s, EvalResult %s",
              params_same ? "identical" : "DIFFERS", a.model.pool.size(),
              pool_same ? "identical" : "DIFFERS", states_same ? "identical" : "DIFFERS",
              eval_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 gradient correctness", criterion1},
      {"2 calibration identities", criterion2},
      {"3 retrieval and bitmap oracle", criterion3},
      {"4 pattern cardinality", criterion4},
      {"5 k-means properties", criterion5},
      {"6 planted-pattern recovery", criterion6},
      {"7 ablation analog", criterion7},
      {"8 metric oracles", criterion8},
      {"9 complexity smoke", criterion9},
      {"10 determinism", criterion10},
  };
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) only.insert(argv[i]);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const std::string id = std::string(name).substr(0, std::string(name).find(' '));
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[PRIMARY] %s: %s (%s)\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
