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

#include "cohortnet/data.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "cohortnet/errors.hpp"
#include "cohortnet/rng.hpp"
#include "json.hpp"

namespace cohortnet {

using json = nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::find(const std::string& id) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id == id) return i;
  }
  throw LookupError("unknown patient id '" + id + "'");
}

std::vector<Split> split(std::size_t n, const SplitRatios& r, std::uint64_t seed) {
  if (r.train < 0 || r.valid < 0 || r.test < 0 ||
      std::abs(r.train + r.valid + r.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const auto count = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  };
  const std::size_t n_valid = count(r.valid);
  const std::size_t n_test = count(r.test);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());
  std::vector<Split> out(n, Split::kTrain);
  const std::size_t n_train = n - n_valid - n_test;
  for (std::size_t k = n_train; k < n_train + n_valid; ++k) out[perm[k]] = Split::kValid;
  for (std::size_t k = n_train + n_valid; k < n; ++k) out[perm[k]] = Split::kTest;
  return out;
}

Dataset build_dataset(std::vector<FeatureSpec> features, std::size_t num_steps,
                      const std::vector<RawRecord>& raw, const SplitRatios& ratios,
                      std::uint64_t seed) {
  const std::size_t F = features.size();
  const std::size_t T = num_steps;
  for (const auto& fs : features) {
    if (!(fs.lower < fs.upper) || !std::isfinite(fs.lower) || !std::isfinite(fs.upper)) {
      throw ConfigError("feature '" + fs.name + "': bounds must be finite with lower < upper");
    }
  }
  Dataset ds;
  ds.features = std::move(features);
  ds.num_steps = T;
  ds.splits = split(raw.size(), ratios, seed);

  for (const auto& r : raw) {
    if (r.values.size() != F * T) {
      throw ParseError("record '" + r.id + "': expected " + std::to_string(F * T) +
                       " cells, got " + std::to_string(r.values.size()));
    }
    if (r.label != 0 && r.label != 1) throw ValidationError("record '" + r.id + "': label must be 0 or 1");
    for (double v : r.values) {
      if (std::isinf(v)) throw ValidationError("record '" + r.id + "': non-finite value");
    }
  }

  // Population mean/std over observed train cells.
  ds.stats.mean.assign(F, 0.0);
  ds.stats.stddev.assign(F, 1.0);
  for (std::size_t f = 0; f < F; ++f) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (ds.splits[k] != Split::kTrain) continue;
      for (std::size_t t = 0; t < T; ++t) {
        const double v = raw[k].values[f * T + t];
        if (!std::isnan(v)) {
          sum += v;
          ++count;
        }
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (ds.splits[k] != Split::kTrain) continue;
      for (std::size_t t = 0; t < T; ++t) {
        const double v = raw[k].values[f * T + t];
        if (!std::isnan(v)) ss += (v - mean) * (v - mean);
      }
    }
    const double sd = std::sqrt(ss / static_cast<double>(count));
    ds.stats.mean[f] = mean;
    ds.stats.stddev[f] = sd > 0.0 ? sd : 1.0;
  }

  ds.records.reserve(raw.size());
  for (const auto& r : raw) {
    PatientRecord p;
    p.id = r.id;
    p.label = r.label;
    p.num_features = F;
    p.num_steps = T;
    p.values.assign(F * T, 0.0);
    p.observed.assign(F * T, 0);
    p.present.assign(F, 0);
    for (std::size_t f = 0; f < F; ++f) {
      double last = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double v = r.values[f * T + t];
        if (!std::isnan(v)) {
          last = (v - ds.stats.mean[f]) / ds.stats.stddev[f];
          p.observed[f * T + t] = 1;
          p.present[f] = 1;
        }
        p.values[f * T + t] = last;
      }
    }
    ds.records.push_back(std::move(p));
  }
  return ds;
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read schema " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("schema " + path + ": " + e.what());
  }
  Schema s;
  if (!j.contains("features") || !j["features"].is_array()) {
    throw ParseError("schema " + path + ": missing 'features' array");
  }
  for (const auto& f : j["features"]) {
    FeatureSpec fs;
    if (f.is_string()) {
      fs.name = f.get<std::string>();
    } else {
      fs.name = f.at("name").get<std::string>();
      fs.lower = f.value("lower", fs.lower);
      fs.upper = f.value("upper", fs.upper);
    }
    s.features.push_back(fs);
  }
  s.num_steps = j.value("num_steps", std::size_t{0});
  return s;
}

void save_schema(const Schema& schema, const std::string& path) {
  json j;
  j["features"] = json::array();
  for (const auto& f : schema.features) {
    j["features"].push_back({{"name", f.name}, {"lower", f.lower}, {"upper", f.upper}});
  }
  j["num_steps"] = schema.num_steps;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

namespace {

RawRecord parse_record_line(const std::string& line, std::size_t line_no, Schema& schema,
                            const std::unordered_map<std::string, std::size_t>& index) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  RawRecord r;
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
    throw ParseError("line " + std::to_string(line_no) + ": record needs a string 'id'");
  }
  r.id = j["id"].get<std::string>();
  const auto fail = [&](const std::string& why) {
    throw ParseError("record '" + r.id + "': " + why);
  };
  if (!j.contains("label") || !j["label"].is_number_integer()) fail("'label' must be 0 or 1");
  r.label = j["label"].get<int>();
  if (r.label != 0 && r.label != 1) fail("'label' must be 0 or 1");
  if (!j.contains("features") || !j["features"].is_object()) fail("missing 'features' object");

  const std::size_t F = schema.features.size();
  if (schema.num_steps == 0) {
    for (const auto& [name, arr] : j["features"].items()) {
      if (arr.is_array()) {
        schema.num_steps = arr.size();
        break;
      }
    }
    if (schema.num_steps == 0) fail("cannot infer the number of time steps");
  }
  const std::size_t T = schema.num_steps;
  r.values.assign(F * T, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [name, arr] : j["features"].items()) {
    auto it = index.find(name);
    if (it == index.end()) fail("unknown feature '" + name + "'");
    if (!arr.is_array() || arr.size() != T) {
      fail("feature '" + name + "' must have " + std::to_string(T) + " cells");
    }
    for (std::size_t t = 0; t < T; ++t) {
      const auto& cell = arr[t];
      if (cell.is_null()) continue;
      if (!cell.is_number()) fail("feature '" + name + "' has a non-numeric cell");
      const double v = cell.get<double>();
      if (!std::isfinite(v)) {
        throw ValidationError("record '" + r.id + "': non-finite value in '" + name + "'");
      }
      r.values[it->second * T + t] = v;
    }
  }
  return r;
}

}  // namespace

std::vector<RawRecord> parse_records(const std::string& text, Schema& schema) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t f = 0; f < schema.features.size(); ++f) index[schema.features[f].name] = f;
  std::vector<RawRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record_line(line, line_no, schema, index));
  }
  return out;
}

std::vector<RawRecord> read_records(const std::string& path, Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_records(ss.str(), schema);
}

std::string format_record(const Schema& schema, const RawRecord& r) {
  const std::size_t T = schema.num_steps;
  json feats = json::object();
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    bool any = false;
    json arr = json::array();
    for (std::size_t t = 0; t < T; ++t) {
      const double v = r.values[f * T + t];
      if (std::isnan(v)) {
        arr.push_back(nullptr);
      } else {
        arr.push_back(v);
        any = true;
      }
    }
    if (any) feats[schema.features[f].name] = std::move(arr);
  }
  json j = {{"id", r.id}, {"label", r.label}, {"features", std::move(feats)}};
  return j.dump();
}

void write_records(const std::string& path, const Schema& schema,
                   const std::vector<RawRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : records) out << format_record(schema, r) << '\n';
}

Dataset load_dataset(const std::string& path, const std::string& schema_path,
                     const SplitRatios& ratios, std::uint64_t seed) {
  Schema schema = load_schema(schema_path);
  auto raw = read_records(path, schema);
  return build_dataset(schema.features, schema.num_steps, raw, ratios, seed);
}

// ---------------------------------------------------------------------------

void validate_plan(const SyntheticPlan& p) {
  if (p.num_features == 0 || p.num_steps == 0) throw ConfigError("plan: F and T must be >= 1");
  if (!(p.base_rate > 0.0 && p.base_rate < 1.0)) throw ConfigError("plan: base rate must be in (0,1)");
  if (p.missing_rate < 0.0 || p.missing_rate >= 1.0) throw ConfigError("plan: missing rate must be in [0,1)");
  if (p.absence_rate < 0.0 || p.absence_rate >= 1.0) throw ConfigError("plan: absence rate must be in [0,1)");
  if (!(p.noise_std >= 0.0)) throw ConfigError("plan: noise std must be >= 0");
  for (const auto& pp : p.planted) {
    if (pp.features.empty() || pp.features.size() != pp.ranges.size()) {
      throw ConfigError("plan: each planted pattern needs one range per feature");
    }
    for (std::size_t f : pp.features) {
      if (f >= p.num_features) throw ConfigError("plan: planted feature index out of range");
    }
    for (const auto& [lo, hi] : pp.ranges) {
      if (!(lo <= hi)) throw ConfigError("plan: planted range must have lo <= hi");
    }
    if (!(pp.boosted_rate > p.base_rate) || pp.boosted_rate > 1.0) {
      throw ConfigError("plan: boosted rate must exceed the base rate");
    }
    if (pp.injection_prob < 0.0 || pp.injection_prob > 1.0) {
      throw ConfigError("plan: injection probability must be in [0,1]");
    }
  }
}

SyntheticData generate_records(const SyntheticPlan& plan) {
  validate_plan(plan);
  const std::size_t F = plan.num_features;
  const std::size_t T = plan.num_steps;
  SyntheticData out;
  for (std::size_t f = 0; f < F; ++f) out.schema.features.push_back({"f" + std::to_string(f)});
  out.schema.num_steps = T;
  out.records.reserve(plan.num_records);
  out.planted.reserve(plan.num_records);

  Rng rng(plan.seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < plan.num_records; ++k) {
    RawRecord r;
    r.id = "p" + std::to_string(k);
    r.values.assign(F * T, nan);

    int which = -1;
    for (std::size_t q = 0; q < plan.planted.size(); ++q) {
      if (rng.bernoulli(plan.planted[q].injection_prob)) {
        which = static_cast<int>(q);
        break;
      }
    }
    std::vector<std::uint8_t> protected_feature(F, 0);
    if (which >= 0) {
      for (std::size_t f : plan.planted[which].features) protected_feature[f] = 1;
    }

    for (std::size_t f = 0; f < F; ++f) {
      const bool absent = !protected_feature[f] && rng.bernoulli(plan.absence_rate);
      const double baseline = rng.normal(0.0, 0.5);
      for (std::size_t t = 0; t < T; ++t) {
        const double v = baseline + rng.normal(0.0, plan.noise_std);
        const bool missing = rng.bernoulli(plan.missing_rate);
        if (!absent && !missing) r.values[f * T + t] = v;
      }
      // Guarantee at least one observation for protected rows.
      if (protected_feature[f] && std::isnan(r.values[f * T])) r.values[f * T] = baseline;
    }

    double rate = plan.base_rate;
    if (which >= 0) {
      const auto& pp = plan.planted[which];
      const std::size_t t_star = rng.below(T);
      for (std::size_t j = 0; j < pp.features.size(); ++j) {
        const auto [lo, hi] = pp.ranges[j];
        r.values[pp.features[j] * T + t_star] = rng.uniform(lo, hi);
      }
      rate = pp.boosted_rate;
    }
    r.label = rng.bernoulli(rate) ? 1 : 0;
    out.records.push_back(std::move(r));
    out.planted.push_back(which);
  }
  return out;
}

Dataset generate_synthetic(const SyntheticPlan& plan, const SplitRatios& ratios) {
  auto data = generate_records(plan);
  Dataset ds = build_dataset(data.schema.features, data.schema.num_steps, data.records, ratios,
                             plan.seed);
  ds.planted = std::move(data.planted);
  return ds;
}

SyntheticPlan parse_plan(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic plan: ") + e.what());
  }
  SyntheticPlan p;
  try {
    p.num_features = j.value("F", p.num_features);
    p.num_steps = j.value("T", p.num_steps);
    p.num_records = j.value("N", p.num_records);
    p.base_rate = j.value("base_rate", p.base_rate);
    p.missing_rate = j.value("missing_rate", p.missing_rate);
    p.absence_rate = j.value("absence_rate", p.absence_rate);
    p.noise_std = j.value("noise_std", p.noise_std);
    p.seed = j.value("seed", p.seed);
    if (j.contains("planted")) {
      for (const auto& q : j["planted"]) {
        PlantedPattern pp;
        pp.features = q.at("features").get<std::vector<std::size_t>>();
        for (const auto& r : q.at("ranges")) pp.ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
        pp.boosted_rate = q.value("boosted_rate", pp.boosted_rate);
        pp.injection_prob = q.value("injection_prob", pp.injection_prob);
        p.planted.push_back(std::move(pp));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic plan: ") + e.what());
  }
  validate_plan(p);
  return p;
}

std::string plan_to_json(const SyntheticPlan& p) {
  json j = {{"F", p.num_features},     {"T", p.num_steps},
            {"N", p.num_records},      {"base_rate", p.base_rate},
            {"missing_rate", p.missing_rate}, {"absence_rate", p.absence_rate},
            {"noise_std", p.noise_std}, {"seed", p.seed}};
  j["planted"] = json::array();
  for (const auto& pp : p.planted) {
    json ranges = json::array();
    for (const auto& [lo, hi] : pp.ranges) ranges.push_back({lo, hi});
    j["planted"].push_back({{"features", pp.features},
                            {"ranges", ranges},
                            {"boosted_rate", pp.boosted_rate},
                            {"injection_prob", pp.injection_prob}});
  }
  return j.dump(2);
}

}  // namespace cohortnet
