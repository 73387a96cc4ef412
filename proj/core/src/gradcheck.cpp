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

#include "ctxn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ctxn {

double GradCheckReport::max_rel_error() const {
  double worst = 0;
  for (const auto& e : entries) worst = std::max(worst, e.rel_error);
  return worst;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double(double)>& fn, double x, double eps) {
  return (fn(x + eps) - fn(x - eps)) / (2 * eps);
}

GradCheckReport finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                  std::vector<NamedTensor<double>> params, double eps, std::size_t samples,
                                  std::uint64_t seed) {
  for (auto& p : params) p.tensor.zero_grad();
  {
    auto loss = loss_fn();
    backward(loss);
  }

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  if (samples == 0 || samples >= total) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].tensor.numel(); ++j) picks.emplace_back(i, j);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> flat(0, total - 1);
    for (std::size_t s = 0; s < samples; ++s) {
      std::size_t k = flat(rng);
      std::size_t i = 0;
      while (k >= params[i].tensor.numel()) k -= params[i++].tensor.numel();
      picks.emplace_back(i, k);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (auto [i, j] : picks) {
    auto& tensor = params[i].tensor;
    const double analytic = tensor.has_grad() ? tensor.grad()[j] : 0.0;
    const double original = tensor.data()[j];
    tensor.data()[j] = original + eps;
    const double up = loss_fn().item();
    tensor.data()[j] = original - eps;
    const double down = loss_fn().item();
    tensor.data()[j] = original;
    const double numeric = (up - down) / (2 * eps);
    report.entries.push_back({params[i].name, j, analytic, numeric, relative_error(analytic, numeric)});
  }
  return report;
}

}  // namespace ctxn
