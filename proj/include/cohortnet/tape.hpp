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
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cohortnet/tensor.hpp"

namespace cohortnet {

// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Reverse-mode tape over the fixed set of primitives the model needs.
// Every op appends a node holding its forward value and a closure that
// propagates the node's gradient to its inputs. Parameter leaves copy their
// value from a ParamStore entry once per tape; backward() adds the leaf
// gradients into the entry's accumulator, so gradients from several tapes
// (one per sample) sum in call order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant leaf (no gradient leaves the tape).
  Var constant(std::vector<double> values);
  Var constant(std::vector<double> values, std::size_t rows, std::size_t cols);
  // Parameter leaf; repeated calls with the same entry return the same Var.
  Var param(ParamStore::Entry& entry);

  std::span<const double> value(Var v) const;
  double scalar(Var v) const;
  std::size_t size(Var v) const;
  // Gradient of the last backward() with respect to v.
  std::span<const double> grad(Var v) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var sigmoid(Var a);
  Var tanh(Var a);

  // w is rows x cols, x has cols entries.
  Var matvec(Var w, Var x);
  Var affine(Var w, Var x, Var b);
  Var row(Var w, std::size_t r);
  // ca * w_a[r] + cb * w_b[r]
  Var blend_rows(Var wa, Var wb, std::size_t r, double ca, double cb);
  Var concat(std::span<const Var> parts);
  Var dot(Var a, Var b);
  // [a . b_0, a . b_1, ...]
  Var dots(Var a, std::span<const Var> bs);
  Var softmax(Var a);
  // sum_k weights[k] * vecs[k]
  Var weighted_sum(Var weights, std::span<const Var> vecs);
  Var sum(std::span<const Var> parts);
  Var gru_cell(Var w, Var u, Var b, Var x, Var h, std::size_t input, std::size_t hidden);
  // weight * BCE(sigmoid(logit), label) with the probability clamped to
  // [1e-7, 1 - 1e-7]. The gradient is zero while the clamp is active.
  Var bce_with_logit(Var logit, double label, double weight = 1.0);

  // Propagates d loss / d node for every node. Throws StateError when
  // nothing was recorded, when loss is not a scalar, or when called twice.
  void backward(Var loss);

  void clear();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::size_t rows = 0;
    std::size_t cols = 1;
    ParamStore::Entry* param = nullptr;
    std::function<void()> back;
  };

  Var push(std::vector<double> value, std::size_t rows, std::size_t cols);
  Node& node(Var v);
  const Node& node(Var v) const;
  void require_same_size(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  std::unordered_map<const ParamStore::Entry*, Var> param_vars_;
  bool spent_ = false;
};

}  // namespace cohortnet
