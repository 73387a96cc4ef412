// Copyright 2026 The ctxnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctxn/tensor.hpp"

namespace ctxn {

struct GradCheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
};

/// |a − n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// derivative is ~0 from reporting noise as a large relative error.
double relative_error(double analytic, double numeric, double floor = 1e-7);

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// (f(θ+eps) − f(θ−eps)) / 2eps. `samples` entries are drawn uniformly over
/// all parameter elements using `seed`; samples == 0 checks every element.
/// `loss_fn` must be deterministic in the parameter values.
GradCheckReport finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                  std::vector<NamedTensor<double>> params, double eps = 1e-5,
                                  std::size_t samples = 0, std::uint64_t seed = 0);

/// Central-difference derivative of a scalar function.
double central_difference(const std::function<double(double)>& fn, double x, double eps = 1e-6);

}  // namespace ctxn
