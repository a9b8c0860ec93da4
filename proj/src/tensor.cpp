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

#include "cohortnet/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cohortnet/errors.hpp"
#include "cohortnet/rng.hpp"

namespace cohortnet {

namespace {
constexpr const char* kCheckpointMagic = "cohortnet-params";
constexpr int kCheckpointVersion = 1;
}  // namespace

Tensor2::Tensor2(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw DimensionError("Tensor2: " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " needs " + std::to_string(rows * cols) + " values, got " +
                         std::to_string(values.size()));
  }
}

bool Tensor2::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor2::fill(double v) {
  for (double& x : values) x = v;
}

ParamStore::Entry& ParamStore::add(const std::string& name, std::size_t rows,
                                   std::size_t cols) {
  auto [it, inserted] = entries_.try_emplace(name, Entry{Tensor2(rows, cols), Tensor2(rows, cols)});
  if (!inserted) throw ConfigError("duplicate parameter '" + name + "'");
  return it->second;
}

ParamStore::Entry& ParamStore::add_uniform(const std::string& name, std::size_t rows,
                                           std::size_t cols, std::size_t fan_in, Rng& rng) {
  Entry& e = add(name, rows, cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& v : e.value.values) v = rng.uniform(-s, s);
  return e;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw LookupError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw LookupError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

void ParamStore::zero_grad(std::span<const std::string> names) {
  for (const auto& n : names) at(n).grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || !(a->second.value == b->second.value)) return false;
  }
  return true;
}

std::string serialize_params(const ParamStore& store) {
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << ' ' << store.size() << '\n';
  char buf[64];
  for (const auto& [name, e] : store) {
    out << name << ' ' << e.value.rows << ' ' << e.value.cols << '\n';
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", e.value.values[i]);
      out << buf << (i + 1 == e.value.size() ? '\n' : ' ');
    }
    if (e.value.size() == 0) out << '\n';
  }
  return out.str();
}

ParamStore deserialize_params(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != kCheckpointMagic) {
    throw ParseError("not a parameter checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  ParamStore store;
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw ParseError("truncated checkpoint header");
    auto& e = store.add(name, rows, cols);
    for (double& v : e.value.values) {
      std::string tok;
      if (!(in >> tok)) throw ParseError("truncated values for '" + name + "'");
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw ParseError("bad value '" + tok + "' in '" + name + "'");
      }
    }
  }
  return store;
}

void save_params(const ParamStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize_params(store);
}

ParamStore load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_params(ss.str());
}

}  // namespace cohortnet
