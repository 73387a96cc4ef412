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

#include <cstddef>

#include "ctxn/tensor.hpp"

namespace ctxn {

enum class Mode { train, eval };
enum class Activation { relu, tanh, sigmoid };

// Convolutions and pooling, NCHW layout.

/// Cross-correlation. weight is C_out×C_in×k×k, bias has C_out entries.
/// Output extent is floor((H + 2·padding − k)/stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

/// 2×2 max pooling with stride 2. Ties route the gradient to the first
/// element in row-major window order.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input);

/// 2×2 stride-2 transposed convolution; weight is C_in×C_out×2×2.
template <typename T>
Tensor<T> upconv2(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

/// Running statistics for batchnorm2d. running_var tracks the unbiased
/// batch variance, as torch does.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNormState create(std::size_t channels);
};

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode);

// Elementwise.

template <typename T>
Tensor<T> elementwise(const Tensor<T>& input, Activation kind);

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  return elementwise(input, Activation::relu);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor);

/// Adds a vector of length shape.back() to every row.
template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& input, const Tensor<T>& bias);

// Matrix products.

/// m×k · k×n.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Batched B×m×k · B×k×n.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b);

/// Swaps the last two axes (rank 2 or 3).
template <typename T>
Tensor<T> transpose(const Tensor<T>& input);

/// Softmax along the last axis, with per-row max subtraction. Entries equal
/// to -inf get probability zero; a row must keep at least one finite entry.
template <typename T>
Tensor<T> rowsoftmax(const Tensor<T>& input);

// Layout.

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape);

/// N×C×H×W → N×(H·W)×C, one row per pixel.
template <typename T>
Tensor<T> pixels_to_rows(const Tensor<T>& input);

/// Inverse of pixels_to_rows.
template <typename T>
Tensor<T> rows_to_pixels(const Tensor<T>& input, std::size_t height, std::size_t width);

/// Channel concatenation, a first.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Concatenation along the batch axis (dim 0); trailing dims must agree.
template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts);

// Reductions and losses.

template <typename T>
Tensor<T> sum(const Tensor<T>& input);

template <typename T>
Tensor<T> mean(const Tensor<T>& input);

/// Mean binary cross-entropy on logits, stable for large |z|.
/// Targets must be exactly 0 or 1.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

}  // namespace ctxn
