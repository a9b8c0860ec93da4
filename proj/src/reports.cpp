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

#include "cohortnet/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cohortnet/errors.hpp"
#include "json.hpp"

namespace cohortnet {

using json = nlohmann::json;

std::size_t FeatureStateReport::total_transitions() const {
  std::size_t n = 0;
  for (const auto& row : transitions) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

StateReport build_state_report(std::span<const FeatureStateModel> models,
                               std::span<const StateGrid> grids,
                               std::span<const std::string> names) {
  StateReport rep;
  rep.patients = grids.size();
  const std::size_t F = models.size();
  rep.num_steps = grids.empty() ? 0 : grids.front().num_steps;
  rep.features.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    auto& fr = rep.features[f];
    const std::size_t S = models[f].num_states();
    fr.feature = f;
    fr.name = f < names.size() ? names[f] : "f" + std::to_string(f);
    fr.summaries = models[f].summaries;
    fr.transitions.assign(S, std::vector<std::size_t>(S, 0));
    fr.coexistence.resize(F);
    for (std::size_t g = 0; g < F; ++g) {
      if (g == f) continue;
      fr.coexistence[g].assign(S, std::vector<std::size_t>(models[g].num_states(), 0));
    }
  }
  for (const auto& grid : grids) {
    if (grid.num_features != F || grid.num_steps != rep.num_steps) {
      throw DimensionError("state report: grid shape mismatch");
    }
    for (std::size_t f = 0; f < F; ++f) {
      auto& fr = rep.features[f];
      for (std::size_t t = 0; t < grid.num_steps; ++t) {
        const StateId a = grid.at(f, t);
        if (t + 1 < grid.num_steps) ++fr.transitions.at(a).at(grid.at(f, t + 1));
        for (std::size_t g = 0; g < F; ++g) {
          if (g != f) ++fr.coexistence[g].at(a).at(grid.at(g, t));
        }
      }
    }
  }
  return rep;
}

std::string state_report_ndjson(const StateReport& rep) {
  std::ostringstream out;
  for (const auto& fr : rep.features) {
    json j;
    j["feature"] = fr.name;
    j["index"] = fr.feature;
    json states = json::array();
    for (std::size_t s = 0; s < fr.summaries.size(); ++s) {
      states.push_back({{"state", "S" + std::to_string(s)},
                        {"mean_raw", fr.summaries[s].mean_raw},
                        {"count", fr.summaries[s].count}});
    }
    j["states"] = states;
    j["transitions"] = fr.transitions;
    json co = json::object();
    for (std::size_t g = 0; g < fr.coexistence.size(); ++g) {
      if (!fr.coexistence[g].empty()) co[rep.features[g].name] = fr.coexistence[g];
    }
    j["coexistence"] = co;
    j["total_transitions"] = fr.total_transitions();
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string alpha_heatmap_ndjson(const EncoderOutput& enc, std::span<const std::string> names,
                                 const std::string& patient_id) {
  std::ostringstream out;
  for (std::size_t i = 0; i < enc.num_features; ++i) {
    for (std::size_t t = 0; t < enc.num_steps; ++t) {
      json w = json::object();
      const auto a = enc.alpha_at(i, t);
      for (std::size_t j = 0; j < enc.num_features; ++j) {
        if (j != i) w[names[j]] = a[j];
      }
      out << json{{"patient", patient_id}, {"feature", names[i]}, {"step", t}, {"alpha", w}}.dump()
          << '\n';
    }
  }
  return out.str();
}

namespace {

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * x);
  return buf;
}

struct Row {
  std::size_t anchor;
  std::size_t q;
};

std::vector<Row> table_order(const CohortPool& pool) {
  std::vector<Row> rows;
  for (std::size_t a = 0; a < pool.num_features(); ++a) {
    std::vector<Row> block;
    for (std::size_t q = 0; q < pool.cohorts(a).size(); ++q) block.push_back({a, q});
    std::stable_sort(block.begin(), block.end(), [&](const Row& x, const Row& y) {
      return pool.cohort(x.anchor, x.q).frequency > pool.cohort(y.anchor, y.q).frequency;
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

std::string cohort_label(std::size_t anchor, std::size_t q) {
  return "C" + std::to_string(anchor) + "." + std::to_string(q);
}

}  // namespace

std::string cohort_table(const CohortPool& pool, std::span<const std::string> names) {
  const std::vector<std::string> header{"Cohort", "Frequency", "Patients", "Pos-Rate",
                                        "Cohort Pattern"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : table_order(pool)) {
    const Cohort& c = pool.cohort(r.anchor, r.q);
    cells.push_back({cohort_label(r.anchor, r.q), std::to_string(c.frequency),
                     std::to_string(c.patients), percent(c.pos_rate), c.pattern.describe(names)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) width[k] = header[k].size();
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  }
  std::ostringstream out;
  const auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << " | ";
      out << row[k];
      if (k + 1 < row.size()) out << std::string(width[k] - row[k].size(), ' ');
    }
    out << '\n';
  };
  emit(header);
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) out << "-+-";
    out << std::string(width[k], '-');
  }
  out << '\n';
  for (const auto& row : cells) emit(row);
  return out.str();
}

std::string cohort_ndjson(const CohortPool& pool, std::span<const std::string> names) {
  std::ostringstream out;
  for (const auto& r : table_order(pool)) {
    const Cohort& c = pool.cohort(r.anchor, r.q);
    json items = json::array();
    for (const auto& it : c.pattern.items) {
      items.push_back({{"feature", names[it.feature]}, {"state", "S" + std::to_string(it.state)}});
    }
    out << json{{"cohort", cohort_label(r.anchor, r.q)},
                {"anchor", names[r.anchor]},
                {"pattern", c.pattern.describe(names)},
                {"items", items},
                {"frequency", c.frequency},
                {"patients", c.patients},
                {"pos_rate", c.pos_rate}}
               .dump()
        << '\n';
  }
  return out.str();
}

std::string calibration_report_json(const TrainedModel& m, const PatientAnalysis& a,
                                    const std::string& patient_id) {
  const auto names = m.feature_names();
  const CalibrationReport& r = a.report;
  json features = json::array();
  for (std::size_t i = 0; i < r.features.size(); ++i) {
    const auto& fc = r.features[i];
    json cohorts = json::array();
    for (std::size_t k = 0; k < fc.cohorts.size(); ++k) {
      const Cohort& c = m.pool.cohort(i, fc.cohorts[k]);
      cohorts.push_back({{"cohort", cohort_label(i, fc.cohorts[k])},
                         {"pattern", c.pattern.describe(names)},
                         {"beta", fc.beta[k]},
                         {"score", fc.cohort_scores[k]},
                         {"frequency", c.frequency},
                         {"patients", c.patients},
                         {"pos_rate", c.pos_rate}});
    }
    features.push_back({{"feature", names[i]}, {"score", fc.score}, {"cohorts", cohorts}});
  }
  json j{{"patient", patient_id},
         {"base_logit", r.base_logit},
         {"z", r.z},
         {"logit", r.logit},
         {"base_probability", r.base_probability},
         {"probability", r.probability},
         {"cohorts_enabled", m.cohorts_enabled},
         {"features", features}};
  if (m.cohorts_enabled) {
    json states = json::object();
    for (std::size_t f = 0; f < names.size(); ++f) {
      std::vector<std::string> row;
      for (std::size_t t = 0; t < a.states.num_steps; ++t) {
        row.push_back("S" + std::to_string(a.states.at(f, t)));
      }
      states[names[f]] = row;
    }
    j["states"] = states;
  }
  return j.dump(2);
}

void emit_model_reports(const TrainedModel& m, std::span<const StateGrid> train_grids,
                        const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto names = m.feature_names();
  const auto write = [&](const std::string& file, const std::string& text) {
    const auto path = std::filesystem::path(dir) / file;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
  };
  write("states.ndjson", state_report_ndjson(build_state_report(m.states, train_grids, names)));
  write("cohorts.ndjson", cohort_ndjson(m.pool, names));
  write("cohort_table.txt", cohort_table(m.pool, names));
}

}  // namespace cohortnet
