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
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cohortnet {

class Rng;

// Dense row-major matrix of doubles. Vectors are stored as rows x 1.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  Tensor2(std::size_t r, std::size_t c, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }

  bool same_shape(const Tensor2& other) const {
    return rows == other.rows && cols == other.cols;
  }
  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

// Named parameters with gradient accumulators. std::map keeps iteration
// order (and therefore checkpoints and optimizer traversal) deterministic.
class ParamStore {
 public:
  struct Entry {
    Tensor2 value;
    Tensor2 grad;
  };

  // Adds a zero-initialised parameter. Throws ConfigError on a duplicate name.
  Entry& add(const std::string& name, std::size_t rows, std::size_t cols);

  // Initialises every value with uniform(-s, s), s = 1/sqrt(fan_in).
  Entry& add_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                     std::size_t fan_in, Rng& rng);

  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  void zero_grad();
  void zero_grad(std::span<const std::string> names);
  std::size_t parameter_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  // Bit-exact comparison of all values (gradients ignored).
  bool values_equal(const ParamStore& other) const;

 private:
  std::map<std::string, Entry> entries_;
};

// Versioned text checkpoint. Values are written as hex floats so a
// save/load round trip is bit-exact.
void save_params(const ParamStore& store, const std::string& path);
ParamStore load_params(const std::string& path);
std::string serialize_params(const ParamStore& store);
ParamStore deserialize_params(const std::string& text);

}  // namespace cohortnet
