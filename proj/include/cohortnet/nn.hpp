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
#include <span>
#include <vector>

namespace cohortnet {

double sigmoid(double x);

// Numerically shifted softmax. Empty input gives empty output.
std::vector<double> softmax(std::span<const double> x);

// View over one GRU cell's weights. Gate blocks are stacked in the order
// [update z; reset r; candidate n]:
//   w: 3H x I, u: 3H x H, b: 3H.
// The cell computes
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * h + z * n
struct GruWeights {
  std::span<const double> w;
  std::span<const double> u;
  std::span<const double> b;
  std::size_t input = 0;
  std::size_t hidden = 0;
};

// Intermediate gate activations, kept for the backward pass.
struct GruGates {
  std::vector<double> z, r, n, rh;
};

// One GRU step. Throws DimensionError when x, h or the weights disagree
// with the declared sizes.
std::vector<double> gru_cell_step(std::span<const double> x, std::span<const double> h,
                                  const GruWeights& weights, GruGates* gates = nullptr);

}  // namespace cohortnet
