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

#include "cohortnet/pool.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cohortnet/errors.hpp"
#include "json.hpp"

namespace cohortnet {

using json = nlohmann::json;

namespace {
constexpr const char* kPoolFormat = "cohortnet-pool";
constexpr int kPoolVersion = 1;
}  // namespace

std::string state_key(std::span<const StateId> states) {
  std::string key(states.size() * sizeof(StateId), '\0');
  for (std::size_t j = 0; j < states.size(); ++j) {
    key[2 * j] = static_cast<char>(states[j] & 0xff);
    key[2 * j + 1] = static_cast<char>(states[j] >> 8);
  }
  return key;
}

CohortPool::CohortPool(std::size_t num_features, std::size_t representation_width)
    : representation_width_(representation_width),
      by_anchor_(num_features),
      buckets_(num_features) {}

std::size_t CohortPool::size() const {
  std::size_t n = 0;
  for (const auto& c : by_anchor_) n += c.size();
  return n;
}

std::size_t CohortPool::add(Cohort cohort) {
  const std::size_t anchor = cohort.pattern.anchor;
  if (anchor >= by_anchor_.size()) throw ValidationError("cohort anchor out of range");
  if (!cohort.pattern.contains_feature(anchor)) throw ValidationError("cohort pattern lacks its anchor");
  if (cohort.representation.size() != representation_width_) {
    throw ValidationError("cohort representation has width " +
                          std::to_string(cohort.representation.size()) + ", pool expects " +
                          std::to_string(representation_width_));
  }
  const auto features = cohort.pattern.features();
  std::vector<StateId> states;
  for (const auto& it : cohort.pattern.items) states.push_back(it.state);
  auto& buckets = buckets_[anchor];
  auto bucket = std::find_if(buckets.begin(), buckets.end(),
                             [&](const Bucket& b) { return b.features == features; });
  if (bucket == buckets.end()) {
    buckets.push_back(Bucket{features, {}});
    bucket = std::prev(buckets.end());
  }
  const auto q = static_cast<std::uint32_t>(by_anchor_[anchor].size());
  if (!bucket->lookup.emplace(state_key(states), q).second) {
    throw ValidationError("duplicate cohort pattern for anchor " + std::to_string(anchor));
  }
  by_anchor_[anchor].push_back(std::move(cohort));
  return q;
}

std::optional<std::size_t> CohortPool::find(const CohortPattern& pattern) const {
  if (pattern.anchor >= buckets_.size()) return std::nullopt;
  const auto features = pattern.features();
  for (const auto& b : buckets_[pattern.anchor]) {
    if (b.features != features) continue;
    std::vector<StateId> states;
    for (const auto& it : pattern.items) states.push_back(it.state);
    auto it = b.lookup.find(state_key(states));
    if (it != b.lookup.end()) return it->second;
  }
  return std::nullopt;
}

void CohortPool::match_step(const StateGrid& grid, std::size_t t, std::size_t anchor,
                            std::vector<std::uint32_t>& out) const {
  std::vector<StateId> states;
  for (const auto& b : buckets_[anchor]) {
    states.clear();
    for (auto f : b.features) states.push_back(grid.at(f, t));
    auto it = b.lookup.find(state_key(states));
    if (it != b.lookup.end()) out.push_back(it->second);
  }
}

StateIndex::StateIndex(std::span<const StateGrid> grids) {
  if (grids.empty()) return;
  num_features_ = grids[0].num_features;
  num_steps_ = grids[0].num_steps;
  postings_.assign(num_features_, {});
  for (std::size_t p = 0; p < grids.size(); ++p) {
    const auto& g = grids[p];
    if (g.num_features != num_features_ || g.num_steps != num_steps_) {
      throw DimensionError("StateIndex: grids disagree in shape");
    }
    for (std::size_t f = 0; f < num_features_; ++f) {
      for (std::size_t t = 0; t < num_steps_; ++t) {
        const StateId s = g.at(f, t);
        auto& lists = postings_[f];
        if (lists.size() <= s) lists.resize(s + 1);
        lists[s].push_back(static_cast<std::uint32_t>(p * num_steps_ + t));
      }
    }
  }
}

std::vector<Occurrence> StateIndex::retrieve(const CohortPattern& pattern) const {
  std::vector<const std::vector<std::uint32_t>*> lists;
  for (const auto& it : pattern.items) {
    if (it.feature >= postings_.size() || it.state >= postings_[it.feature].size()) return {};
    lists.push_back(&postings_[it.feature][it.state]);
  }
  if (lists.empty()) return {};
  std::sort(lists.begin(), lists.end(),
            [](const auto* a, const auto* b) { return a->size() < b->size(); });
  std::vector<std::uint32_t> cells = *lists[0];
  std::vector<std::uint32_t> scratch;
  for (std::size_t k = 1; k < lists.size() && !cells.empty(); ++k) {
    scratch.clear();
    std::set_intersection(cells.begin(), cells.end(), lists[k]->begin(), lists[k]->end(),
                          std::back_inserter(scratch));
    cells.swap(scratch);
  }
  std::vector<Occurrence> out;
  out.reserve(cells.size());
  for (auto c : cells) {
    out.push_back({static_cast<std::uint32_t>(c / num_steps_), static_cast<std::uint32_t>(c % num_steps_)});
  }
  return out;
}

std::vector<Occurrence> retrieve_patients(const CohortPattern& pattern, const StateIndex& index) {
  return index.retrieve(pattern);
}

std::vector<PatternOccurrences> apply_frequency_filter(std::span<const PatternOccurrences> patterns,
                                                       const FrequencyFilter& filter) {
  std::vector<PatternOccurrences> out;
  for (const auto& p : patterns) {
    if (p.occurrences.size() >= filter.min_occurrences &&
        p.distinct_patients() >= filter.min_patients) {
      out.push_back(p);
    }
  }
  return out;
}

Cohort build_cohort(const CohortPattern& pattern, std::span<const Occurrence> occurrences,
                    const RepresentationFn& representation, std::span<const int> labels,
                    std::size_t train_patients, std::size_t num_steps) {
  if (occurrences.empty()) throw ValidationError("build_cohort: no occurrences");
  Cohort c;
  c.pattern = pattern;
  const std::size_t dim = representation(occurrences[0].patient, pattern.anchor, occurrences[0].step).size();
  std::vector<double> mean(dim, 0.0);
  std::size_t positives = 0;
  std::uint32_t last_patient = UINT32_MAX;
  for (const auto& occ : occurrences) {
    const auto h = representation(occ.patient, pattern.anchor, occ.step);
    for (std::size_t j = 0; j < dim; ++j) mean[j] += h[j];
    if (occ.patient != last_patient) {
      ++c.patients;
      if (labels[occ.patient] == 1) ++positives;
      last_patient = occ.patient;
    }
  }
  for (double& v : mean) v /= static_cast<double>(occurrences.size());
  c.frequency = occurrences.size();
  c.pos_rate = static_cast<double>(positives) / static_cast<double>(c.patients);

  LabelStats l;
  l.pos_rate = c.pos_rate;
  const double cells = static_cast<double>(std::max<std::size_t>(1, train_patients * num_steps));
  const double people = static_cast<double>(std::max<std::size_t>(1, train_patients));
  l.log_frequency = std::log1p(static_cast<double>(c.frequency)) / std::log1p(cells);
  l.log_patients = std::log1p(static_cast<double>(c.patients)) / std::log1p(people);
  c.representation = std::move(mean);
  c.representation.push_back(l.pos_rate);
  c.representation.push_back(l.log_frequency);
  c.representation.push_back(l.log_patients);
  return c;
}

CohortPool build_pool(std::span<const StateGrid> states, std::span<const std::vector<double>> alphas,
                      const RepresentationFn& representation, std::span<const int> labels,
                      std::size_t n, const FrequencyFilter& filter, std::size_t rep_dim,
                      PoolBuildStats* stats) {
  if (filter.min_occurrences < 1 || filter.min_patients < 1) {
    throw ConfigError("frequency filter thresholds must be >= 1");
  }
  if (labels.size() != states.size()) throw DimensionError("build_pool: label count mismatch");
  const std::size_t F = states.empty() ? 0 : states[0].num_features;
  const std::size_t T = states.empty() ? 0 : states[0].num_steps;
  CohortPool pool(F, rep_dim + LabelStats::kWidth);
  const auto enumerated = enumerate_patterns(states, alphas, n);
  const auto kept = apply_frequency_filter(enumerated, filter);
  if (stats) {
    stats->enumerated_patterns = enumerated.size();
    stats->surviving_patterns = kept.size();
  }
  const StateIndex index(states);
  for (const auto& p : kept) {
    const auto occ = index.retrieve(p.pattern);
    pool.add(build_cohort(p.pattern, occ, representation, labels, states.size(), T));
  }
  return pool;
}

std::string serialize_pool(const CohortPool& pool) {
  std::ostringstream out;
  out << json{{"format", kPoolFormat},
              {"version", kPoolVersion},
              {"num_features", pool.num_features()},
              {"representation_width", pool.representation_width()},
              {"size", pool.size()}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < pool.num_features(); ++i) {
    for (const auto& c : pool.cohorts(i)) {
      json items = json::array();
      for (const auto& it : c.pattern.items) items.push_back({it.feature, it.state});
      out << json{{"anchor", c.pattern.anchor},
                  {"pattern", items},
                  {"frequency", c.frequency},
                  {"patients", c.patients},
                  {"pos_rate", c.pos_rate},
                  {"representation", c.representation}}
                 .dump()
          << '\n';
    }
  }
  return out.str();
}

CohortPool deserialize_pool(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty pool file");
  try {
    const json head = json::parse(line);
    if (head.value("format", "") != kPoolFormat) throw ParseError("not a cohort pool file");
    if (head.value("version", 0) != kPoolVersion) throw ParseError("unsupported pool version");
    CohortPool pool(head.at("num_features").get<std::size_t>(),
                    head.at("representation_width").get<std::size_t>());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Cohort c;
      c.pattern.anchor = j.at("anchor").get<std::size_t>();
      for (const auto& it : j.at("pattern")) {
        c.pattern.items.push_back({it.at(0).get<std::uint32_t>(), it.at(1).get<StateId>()});
      }
      c.frequency = j.at("frequency").get<std::size_t>();
      c.patients = j.at("patients").get<std::size_t>();
      c.pos_rate = j.at("pos_rate").get<double>();
      c.representation = j.at("representation").get<std::vector<double>>();
      pool.add(std::move(c));
    }
    if (pool.size() != head.at("size").get<std::size_t>()) throw ParseError("pool file truncated");
    return pool;
  } catch (const json::exception& e) {
    throw ParseError(std::string("pool file: ") + e.what());
  }
}

void save_pool(const CohortPool& pool, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize_pool(pool);
}

CohortPool load_pool(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_pool(ss.str());
}

}  // namespace cohortnet
