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

#include "cohortnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cohortnet/errors.hpp"

namespace cohortnet {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  const double m = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> gru_cell_step(std::span<const double> x, std::span<const double> h,
                                  const GruWeights& wt, GruGates* gates) {
  const std::size_t in = wt.input;
  const std::size_t hid = wt.hidden;
  if (x.size() != in || h.size() != hid || wt.w.size() != 3 * hid * in ||
      wt.u.size() != 3 * hid * hid || wt.b.size() != 3 * hid) {
    throw DimensionError("gru_cell_step: expected x[" + std::to_string(in) + "], h[" +
                         std::to_string(hid) + "], got x[" + std::to_string(x.size()) +
                         "], h[" + std::to_string(h.size()) + "]");
  }
  GruGates local;
  GruGates& g = gates ? *gates : local;
  g.z.assign(hid, 0.0);
  g.r.assign(hid, 0.0);
  g.n.assign(hid, 0.0);
  g.rh.assign(hid, 0.0);

  auto gate_pre = [&](std::size_t block, std::size_t j, std::span<const double> hv) {
    const std::size_t row = block * hid + j;
    double acc = wt.b[row];
    const double* wr = wt.w.data() + row * in;
    for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
    const double* ur = wt.u.data() + row * hid;
    for (std::size_t c = 0; c < hid; ++c) acc += ur[c] * hv[c];
    return acc;
  };

  for (std::size_t j = 0; j < hid; ++j) {
    g.z[j] = sigmoid(gate_pre(0, j, h));
    g.r[j] = sigmoid(gate_pre(1, j, h));
  }
  for (std::size_t j = 0; j < hid; ++j) g.rh[j] = g.r[j] * h[j];
  std::vector<double> out(hid);
  for (std::size_t j = 0; j < hid; ++j) {
    g.n[j] = std::tanh(gate_pre(2, j, g.rh));
    out[j] = (1.0 - g.z[j]) * h[j] + g.z[j] * g.n[j];
  }
  return out;
}

}  // namespace cohortnet
