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

#include "ctxn/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxn {

template <typename T>
AdamW<T>::AdamW(std::vector<NamedTensor<T>> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0)) throw std::invalid_argument("AdamW: lr must be > 0");
  if (!(options_.beta1 > 0 && options_.beta1 < 1) || !(options_.beta2 > 0 && options_.beta2 < 1))
    throw std::invalid_argument("AdamW: betas must lie in (0, 1)");
  if (!(options_.eps > 0)) throw std::invalid_argument("AdamW: eps must be > 0");
  if (options_.weight_decay < 0) throw std::invalid_argument("AdamW: weight_decay must be >= 0");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), T(0));
    v_.emplace_back(p.tensor.numel(), T(0));
  }
}

template <typename T>
void AdamW<T>::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("AdamW: non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(options_.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(options_.beta2, t));
  const T lr = static_cast<T>(options_.lr), eps = static_cast<T>(options_.eps);
  const T wd = static_cast<T>(options_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& tensor = params_[i].tensor;
    const bool has_grad = tensor.has_grad();
    auto theta = tensor.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const T g = has_grad ? tensor.grad()[j] : T(0);
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      theta[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * theta[j]);
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace ctxn
