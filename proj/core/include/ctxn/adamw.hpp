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
#include <vector>

#include "ctxn/tensor.hpp"

namespace ctxn {

struct AdamWOptions {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay:
///   θ ← θ − lr·( m̂/(√v̂ + eps) + weight_decay·θ )
/// with bias-corrected first and second moments.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<NamedTensor<T>> params, AdamWOptions options);

  /// Applies one update from the accumulated gradients. A parameter
  /// without a gradient buffer is treated as having a zero gradient.
  /// Throws NumericError naming the parameter on a non-finite gradient,
  /// before touching any parameter.
  void step();

  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }
  const AdamWOptions& options() const { return options_; }
  const std::vector<T>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<T>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<NamedTensor<T>> params_;
  AdamWOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t step_count_ = 0;
};

}  // namespace ctxn
