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
#include <span>
#include <vector>

#include "ctxn/checkpoint.hpp"
#include "ctxn/ops.hpp"
#include "ctxn/tensor.hpp"
#include "ctxn/textenc.hpp"

namespace ctxn::nn {

enum class Architecture { contextual, unet };

struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t depth = 3;
  std::vector<std::size_t> channels{8, 16, 32};
  std::size_t bottleneck = 64;
  std::size_t d_e = 32;
  std::size_t max_tokens = 32;
  bool attend_padding = true;
  std::uint64_t init_seed = 0;
  Architecture arch = Architecture::contextual;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // in × out
  Tensor<T> bias;    // out
};

template <typename T>
struct ConvBlock {
  Tensor<T> conv1_w, conv1_b, bn1_gamma, bn1_beta;
  BatchNormState<T> bn1;
  Tensor<T> conv2_w, conv2_b, bn2_gamma, bn2_beta;
  BatchNormState<T> bn2;
};

template <typename T>
struct UpConv {
  Tensor<T> weight;  // C_in × C_out × 2 × 2
  Tensor<T> bias;
};

/// Per-level attention weights: text_proj maps d_e → c, then Wq/Wk/Wv are
/// c → c.
template <typename T>
struct CrossAttnParams {
  Linear<T> text_proj, wq, wk, wv;
};

/// Constant report embeddings for a batch: N×l×d_e plus per-item valid
/// lengths. Carries no gradient.
template <typename T>
struct TextBatch {
  Tensor<T> embeddings;
  std::vector<std::size_t> valid_len;

  static TextBatch from(std::span<const text::ReportEmbedding* const> items);
};

/// Optional capture of intermediate maps per decoder level (level 1 is the
/// finest): the attention input Q, the gate tanh(A) and the gated output Q*.
template <typename T>
struct AttentionTrace {
  struct Level {
    std::size_t level = 0;
    Tensor<T> query, gate, gated;
  };
  std::vector<Level> levels;
};

template <typename T>
Tensor<T> linear(const Tensor<T>& rows, const Linear<T>& layer);

/// Two (3×3 conv, pad 1 → batchnorm → ReLU) sub-layers.
template <typename T>
Tensor<T> encoder_layer(const Tensor<T>& input, ConvBlock<T>& block, Mode mode);

/// Single-head pixel-to-token attention gate. For each batch item, with
/// Q̄ the h·w×c pixel rows of `query` and K = V = E·text_proj:
///   A  = softmax((Q̄·Wq)(K·Wk)ᵀ / √c) · (V·Wv)
///   Q* = tanh(A) ⊙ Q
/// The softmax runs over token positions. With attend_padding false,
/// positions at or past valid_len are excluded (position 0 always stays).
template <typename T>
Tensor<T> cross_attention(const Tensor<T>& query, const TextBatch<T>& text, const CrossAttnParams<T>& params,
                          bool attend_padding, AttentionTrace<T>* trace = nullptr, std::size_t level = 0);

template <typename T>
class Network {
 public:
  /// Builds the network and initializes weights deterministically from
  /// config.init_seed (Kaiming-uniform fan-in, zero biases, γ=1, β=0).
  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// Logits of shape N×1×S×S. `text` is required for the contextual
  /// architecture and ignored by the baseline U-Net.
  Tensor<T> forward(const Tensor<T>& images, const TextBatch<T>* text, Mode mode,
                    AttentionTrace<T>* trace = nullptr);

  /// Trainable tensors in checkpoint order.
  std::vector<NamedTensor<T>> parameters();
  /// Everything in the checkpoint: parameters plus batchnorm running stats.
  std::vector<NamedTensor<T>> state();
  std::size_t parameter_count();

  Checkpoint to_checkpoint();
  static Network from_checkpoint(const Checkpoint& checkpoint);
  static ModelConfig config_from_checkpoint(const Checkpoint& checkpoint);

  CrossAttnParams<T>& attention(std::size_t level) { return xattn_.at(level - 1); }

 private:
  void collect(std::vector<NamedTensor<T>>& out, bool include_buffers);

  ModelConfig config_;
  std::vector<ConvBlock<T>> encoders_;  // depth + 1, last is the bottleneck
  std::vector<UpConv<T>> ups_;          // index i-1 produces level i
  std::vector<CrossAttnParams<T>> xattn_;
  std::vector<ConvBlock<T>> decoders_;
  Tensor<T> head_w_, head_b_;
};

template <typename T>
Tensor<T> contextual_forward(Network<T>& net, const Tensor<T>& images, const TextBatch<T>& text, Mode mode);

template <typename T>
Tensor<T> unet_forward(Network<T>& net, const Tensor<T>& images, Mode mode);

/// sigmoid(logit) > threshold, elementwise.
template <typename T>
std::vector<std::uint8_t> predict_mask(std::span<const T> logits, double threshold = 0.5);

}  // namespace ctxn::nn
