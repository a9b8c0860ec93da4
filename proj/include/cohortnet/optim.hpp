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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cohortnet/tensor.hpp"

namespace cohortnet {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for a fixed subset of a ParamStore.
struct AdamState {
  AdamOptions options;
  std::vector<std::string> names;
  std::map<std::string, Tensor2> first_moment;
  std::map<std::string, Tensor2> second_moment;
  std::uint64_t step = 0;
};

// Prepares state for the named parameters (all of them when names is empty).
AdamState make_adam_state(const ParamStore& params, AdamOptions options = {},
                          std::vector<std::string> names = {});

// One bias-corrected Adam update of every tracked parameter, then zeroes the
// tracked gradient accumulators.
void adam_step(ParamStore& params, AdamState& state);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Compares analytic gradients with central finite differences.
//   loss:       forward-only evaluation at the current parameter values.
//   accumulate: fills the gradient accumulators (they are zeroed first).
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult check_gradients(ParamStore& params, const std::function<double()>& loss,
                                const std::function<void()>& accumulate,
                                const std::vector<std::string>& names = {},
                                double step = 1e-5, double floor = 1e-6);

}  // namespace cohortnet
