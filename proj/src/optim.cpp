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

#include "cohortnet/optim.hpp"

#include <algorithm>
#include <cmath>

#include "cohortnet/errors.hpp"

namespace cohortnet {

AdamState make_adam_state(const ParamStore& params, AdamOptions options,
                          std::vector<std::string> names) {
  AdamState state;
  state.options = options;
  state.names = names.empty() ? params.names() : std::move(names);
  for (const auto& n : state.names) {
    const auto& e = params.at(n);
    state.first_moment.emplace(n, Tensor2(e.value.rows, e.value.cols));
    state.second_moment.emplace(n, Tensor2(e.value.rows, e.value.cols));
  }
  return state;
}

void adam_step(ParamStore& params, AdamState& state) {
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (const auto& name : state.names) {
    auto& e = params.at(name);
    auto& m = state.first_moment.at(name);
    auto& v = state.second_moment.at(name);
    if (!m.same_shape(e.value) || !v.same_shape(e.value) || !e.grad.same_shape(e.value)) {
      throw DimensionError("adam_step: shape mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad.values[i];
      m.values[i] = o.beta1 * m.values[i] + (1.0 - o.beta1) * g;
      v.values[i] = o.beta2 * v.values[i] + (1.0 - o.beta2) * g * g;
      const double mhat = m.values[i] / c1;
      const double vhat = v.values[i] / c2;
      e.value.values[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
    e.grad.fill(0.0);
  }
}

GradCheckResult check_gradients(ParamStore& params, const std::function<double()>& loss,
                                const std::function<void()>& accumulate,
                                const std::vector<std::string>& names, double step,
                                double floor) {
  const std::vector<std::string> targets = names.empty() ? params.names() : names;
  params.zero_grad();
  accumulate();
  GradCheckResult res;
  for (const auto& name : targets) {
    auto& e = params.at(name);
    const std::vector<double> analytic = e.grad.values;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double orig = e.value.values[i];
      e.value.values[i] = orig + step;
      const double up = loss();
      e.value.values[i] = orig - step;
      const double down = loss();
      e.value.values[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double rel = abs_err / denom;
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      if (rel > res.max_rel_error || res.checked == 0) {
        res.max_rel_error = std::max(res.max_rel_error, rel);
        if (rel >= res.max_rel_error) {
          res.worst_param = name;
          res.worst_index = i;
        }
      }
      ++res.checked;
    }
  }
  params.zero_grad();
  return res;
}

}  // namespace cohortnet
