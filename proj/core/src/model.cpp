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

#include "ctxn/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ctxn/rng.hpp"

namespace ctxn::nn {

void ModelConfig::validate() const {
  if (depth < 1) throw ConfigError("model.depth must be >= 1");
  if (channels.size() != depth) {
    throw ConfigError("model.channels has " + std::to_string(channels.size()) + " entries but model.depth is " +
                      std::to_string(depth));
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == 0) throw ConfigError("model.channels entries must be >= 1");
    if (i > 0 && channels[i] <= channels[i - 1]) throw ConfigError("model.channels must be strictly increasing");
  }
  if (bottleneck <= channels.back()) throw ConfigError("model.bottleneck must exceed the last channel count");
  if (image_size == 0 || (image_size & (image_size - 1)) != 0)
    throw ConfigError("model.image_size must be a power of two");
  if (image_size % (std::size_t{1} << depth) != 0)
    throw ConfigError("model.image_size must be divisible by 2^depth");
  if (d_e == 0) throw ConfigError("model.d_e must be >= 1");
  if (max_tokens == 0) throw ConfigError("model.max_tokens must be >= 1");
}

template <typename T>
TextBatch<T> TextBatch<T>::from(std::span<const text::ReportEmbedding* const> items) {
  if (items.empty()) throw ShapeError("TextBatch: empty batch");
  const std::size_t l = items.front()->length, d = items.front()->width;
  TextBatch batch;
  std::vector<T> values;
  values.reserve(items.size() * l * d);
  for (const auto* e : items) {
    if (e->length != l || e->width != d) {
      throw ShapeError("TextBatch: embedding dims " + std::to_string(e->length) + "x" + std::to_string(e->width) +
                       " differ from " + std::to_string(l) + "x" + std::to_string(d));
    }
    for (float v : e->matrix) values.push_back(static_cast<T>(v));
    batch.valid_len.push_back(e->valid_len);
  }
  batch.embeddings = Tensor<T>::from({items.size(), l, d}, std::move(values));
  return batch;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& rows, const Linear<T>& layer) {
  return add_row_bias(matmul(rows, layer.weight), layer.bias);
}

template <typename T>
Tensor<T> encoder_layer(const Tensor<T>& input, ConvBlock<T>& block, Mode mode) {
  auto x = conv2d(input, block.conv1_w, block.conv1_b, 1, 1);
  x = relu(batchnorm2d(x, block.bn1_gamma, block.bn1_beta, block.bn1, mode));
  x = conv2d(x, block.conv2_w, block.conv2_b, 1, 1);
  return relu(batchnorm2d(x, block.bn2_gamma, block.bn2_beta, block.bn2, mode));
}

template <typename T>
Tensor<T> cross_attention(const Tensor<T>& query, const TextBatch<T>& text, const CrossAttnParams<T>& params,
                          bool attend_padding, AttentionTrace<T>* trace, std::size_t level) {
  if (query.rank() != 4) throw ShapeError("cross_attention: query must be NCHW, got " + shape_str(query.shape()));
  const std::size_t n = query.dim(0), c = query.dim(1), h = query.dim(2), w = query.dim(3);
  const auto& emb = text.embeddings;
  if (!emb.defined() || emb.rank() != 3) throw ShapeError("cross_attention: text embeddings must be N×l×d_e");
  const std::size_t l = emb.dim(1), d = emb.dim(2);
  if (l == 0) throw ShapeError("cross_attention: report has zero token positions (l = 0)");
  if (emb.dim(0) != n) {
    throw ShapeError("cross_attention: text batch (dim 0) is " + std::to_string(emb.dim(0)) + ", query batch is " +
                     std::to_string(n));
  }
  if (params.wq.weight.dim(0) != c) {
    throw ShapeError("cross_attention: level expects " + std::to_string(params.wq.weight.dim(0)) +
                     " channels, query has " + std::to_string(c) + " (dim 1)");
  }

  const std::size_t hw = h * w;
  auto q_rows = reshape(pixels_to_rows(query), {n * hw, c});
  auto q_proj = reshape(linear(q_rows, params.wq), {n, hw, c});
  auto kv = linear(reshape(emb, {n * l, d}), params.text_proj);
  auto keys = reshape(linear(kv, params.wk), {n, l, c});
  auto values = reshape(linear(kv, params.wv), {n, l, c});

  auto scores = scale(bmm(q_proj, transpose(keys)), T(1) / std::sqrt(static_cast<T>(c)));
  for (T s : scores.data()) {
    if (!std::isfinite(s)) throw NumericError("cross_attention: non-finite attention logit");
  }
  if (!attend_padding) {
    auto mask = Tensor<T>::zeros({n, hw, l});
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t keep = std::max<std::size_t>(1, std::min(text.valid_len.at(b), l));
      for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t t = keep; t < l; ++t) mask.data()[(b * hw + p) * l + t] = -std::numeric_limits<T>::infinity();
    }
    scores = add(scores, mask);
  }
  auto attended = bmm(rowsoftmax(scores), values);
  auto gate = rows_to_pixels(elementwise(attended, Activation::tanh), h, w);
  auto gated = mul(gate, query);
  if (trace) trace->levels.push_back({level, query, gate, gated});
  return gated;
}

namespace {

template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, std::uint64_t seed, const std::string& name) {
  Rng rng(derive_seed({seed, text::fnv1a64(name)}));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(uniform(rng, -bound, bound));
  return Tensor<T>::from(std::move(shape), std::move(values), true);
}

template <typename T>
ConvBlock<T> make_block(std::size_t in, std::size_t out, std::uint64_t seed, const std::string& prefix) {
  ConvBlock<T> b;
  b.conv1_w = kaiming_uniform<T>({out, in, 3, 3}, in * 9, seed, prefix + ".conv1.w");
  b.conv1_b = Tensor<T>::zeros({out}, true);
  b.bn1_gamma = Tensor<T>::full({out}, T(1), true);
  b.bn1_beta = Tensor<T>::zeros({out}, true);
  b.bn1 = BatchNormState<T>::create(out);
  b.conv2_w = kaiming_uniform<T>({out, out, 3, 3}, out * 9, seed, prefix + ".conv2.w");
  b.conv2_b = Tensor<T>::zeros({out}, true);
  b.bn2_gamma = Tensor<T>::full({out}, T(1), true);
  b.bn2_beta = Tensor<T>::zeros({out}, true);
  b.bn2 = BatchNormState<T>::create(out);
  return b;
}

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, std::uint64_t seed, const std::string& prefix) {
  return {kaiming_uniform<T>({in, out}, in, seed, prefix + ".w"), Tensor<T>::zeros({out}, true)};
}

template <typename T>
void push_block(std::vector<NamedTensor<T>>& out, ConvBlock<T>& b, const std::string& p, bool buffers) {
  out.push_back({p + ".conv1.w", b.conv1_w});
  out.push_back({p + ".conv1.b", b.conv1_b});
  out.push_back({p + ".bn1.gamma", b.bn1_gamma});
  out.push_back({p + ".bn1.beta", b.bn1_beta});
  if (buffers) {
    out.push_back({p + ".bn1.mean", b.bn1.running_mean});
    out.push_back({p + ".bn1.var", b.bn1.running_var});
  }
  out.push_back({p + ".conv2.w", b.conv2_w});
  out.push_back({p + ".conv2.b", b.conv2_b});
  out.push_back({p + ".bn2.gamma", b.bn2_gamma});
  out.push_back({p + ".bn2.beta", b.bn2_beta});
  if (buffers) {
    out.push_back({p + ".bn2.mean", b.bn2.running_mean});
    out.push_back({p + ".bn2.var", b.bn2.running_var});
  }
}

constexpr const char* kMetaName = "meta.config";

}  // namespace

template <typename T>
Network<T>::Network(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto seed = config_.init_seed;
  const std::size_t depth = config_.depth;
  std::size_t in = 1;
  for (std::size_t i = 0; i <= depth; ++i) {
    const std::size_t out = i < depth ? config_.channels[i] : config_.bottleneck;
    encoders_.push_back(make_block<T>(in, out, seed, "enc" + std::to_string(i + 1)));
    in = out;
  }
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t c = config_.channels[i];
    const std::size_t below = i + 1 < depth ? config_.channels[i + 1] : config_.bottleneck;
    const std::string lvl = std::to_string(i + 1);
    ups_.push_back({kaiming_uniform<T>({below, c, 2, 2}, below, seed, "up" + lvl + ".w"), Tensor<T>::zeros({c}, true)});
    if (config_.arch == Architecture::contextual) {
      xattn_.push_back({make_linear<T>(config_.d_e, c, seed, "xattn" + lvl + ".tproj"),
                        make_linear<T>(c, c, seed, "xattn" + lvl + ".wq"),
                        make_linear<T>(c, c, seed, "xattn" + lvl + ".wk"),
                        make_linear<T>(c, c, seed, "xattn" + lvl + ".wv")});
    }
    decoders_.push_back(make_block<T>(2 * c, c, seed, "dec" + lvl));
  }
  head_w_ = kaiming_uniform<T>({1, config_.channels[0], 1, 1}, config_.channels[0], seed, "head.w");
  head_b_ = Tensor<T>::zeros({1}, true);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& images, const TextBatch<T>* text, Mode mode,
                              AttentionTrace<T>* trace) {
  const std::size_t s = config_.image_size;
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != s || images.dim(3) != s) {
    throw ShapeError("forward: expected N×1×" + std::to_string(s) + "×" + std::to_string(s) + " images, got " +
                     shape_str(images.shape()));
  }
  const bool contextual = config_.arch == Architecture::contextual;
  if (contextual && !text) throw std::invalid_argument("forward: contextual network needs report embeddings");
  if (contextual && text->embeddings.dim(2) != config_.d_e) {
    throw ShapeError("forward: embedding width (dim 2) is " + std::to_string(text->embeddings.dim(2)) +
                     ", model expects d_e = " + std::to_string(config_.d_e));
  }

  const std::size_t depth = config_.depth;
  std::vector<Tensor<T>> skips;
  Tensor<T> x = images;
  for (std::size_t i = 0; i < depth; ++i) {
    x = encoder_layer(x, encoders_[i], mode);
    skips.push_back(x);
    x = maxpool2(x);
  }
  x = encoder_layer(x, encoders_[depth], mode);
  for (std::size_t i = depth; i-- > 0;) {
    auto up = upconv2(x, ups_[i].weight, ups_[i].bias);
    if (contextual) up = cross_attention(up, *text, xattn_[i], config_.attend_padding, trace, i + 1);
    x = encoder_layer(concat_channels(up, skips[i]), decoders_[i], mode);
  }
  return conv2d(x, head_w_, head_b_, 1, 0);
}

template <typename T>
void Network<T>::collect(std::vector<NamedTensor<T>>& out, bool buffers) {
  for (std::size_t i = 0; i < encoders_.size(); ++i) push_block(out, encoders_[i], "enc" + std::to_string(i + 1), buffers);
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    const std::string lvl = std::to_string(i + 1);
    out.push_back({"up" + lvl + ".w", ups_[i].weight});
    out.push_back({"up" + lvl + ".b", ups_[i].bias});
  }
  for (std::size_t i = 0; i < xattn_.size(); ++i) {
    const std::string p = "xattn" + std::to_string(i + 1);
    auto& a = xattn_[i];
    for (auto& [name, layer] : std::initializer_list<std::pair<const char*, Linear<T>*>>{
             {".tproj", &a.text_proj}, {".wq", &a.wq}, {".wk", &a.wk}, {".wv", &a.wv}}) {
      out.push_back({p + name + ".w", layer->weight});
      out.push_back({p + name + ".b", layer->bias});
    }
  }
  for (std::size_t i = 0; i < decoders_.size(); ++i) push_block(out, decoders_[i], "dec" + std::to_string(i + 1), buffers);
  out.push_back({"head.w", head_w_});
  out.push_back({"head.b", head_b_});
}

template <typename T>
std::vector<NamedTensor<T>> Network<T>::parameters() {
  std::vector<NamedTensor<T>> out;
  collect(out, false);
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Network<T>::state() {
  std::vector<NamedTensor<T>> out;
  collect(out, true);
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

template <typename T>
Checkpoint Network<T>::to_checkpoint() {
  Checkpoint ckpt;
  std::vector<float> meta{static_cast<float>(config_.arch == Architecture::contextual ? 0 : 1),
                          static_cast<float>(config_.image_size),
                          static_cast<float>(config_.depth),
                          static_cast<float>(config_.bottleneck),
                          static_cast<float>(config_.d_e),
                          static_cast<float>(config_.max_tokens),
                          config_.attend_padding ? 1.0f : 0.0f};
  for (auto c : config_.channels) meta.push_back(static_cast<float>(c));
  ckpt.tensors.push_back({kMetaName, {static_cast<std::uint32_t>(meta.size())}, meta});
  for (const auto& entry : state()) ckpt.add(entry.name, entry.tensor);
  return ckpt;
}

template <typename T>
ModelConfig Network<T>::config_from_checkpoint(const Checkpoint& checkpoint) {
  const auto& meta = checkpoint.at(kMetaName).values;
  if (meta.size() < 8) throw FormatError("checkpoint meta.config is too short", 0);
  ModelConfig cfg;
  cfg.arch = meta[0] == 0 ? Architecture::contextual : Architecture::unet;
  cfg.image_size = static_cast<std::size_t>(meta[1]);
  cfg.depth = static_cast<std::size_t>(meta[2]);
  cfg.bottleneck = static_cast<std::size_t>(meta[3]);
  cfg.d_e = static_cast<std::size_t>(meta[4]);
  cfg.max_tokens = static_cast<std::size_t>(meta[5]);
  cfg.attend_padding = meta[6] != 0;
  cfg.channels.clear();
  for (std::size_t i = 7; i < meta.size(); ++i) cfg.channels.push_back(static_cast<std::size_t>(meta[i]));
  return cfg;
}

template <typename T>
Network<T> Network<T>::from_checkpoint(const Checkpoint& checkpoint) {
  Network net(config_from_checkpoint(checkpoint));
  for (auto& entry : net.state()) restore_tensor(checkpoint.at(entry.name), entry.tensor);
  return net;
}

template <typename T>
Tensor<T> contextual_forward(Network<T>& net, const Tensor<T>& images, const TextBatch<T>& text, Mode mode) {
  if (net.config().arch != Architecture::contextual) throw std::invalid_argument("contextual_forward: network is a U-Net");
  return net.forward(images, &text, mode);
}

template <typename T>
Tensor<T> unet_forward(Network<T>& net, const Tensor<T>& images, Mode mode) {
  if (net.config().arch != Architecture::unet) throw std::invalid_argument("unet_forward: network has attention");
  return net.forward(images, nullptr, mode);
}

template <typename T>
std::vector<std::uint8_t> predict_mask(std::span<const T> logits, double threshold) {
  std::vector<std::uint8_t> mask(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    mask[i] = p > threshold ? 1 : 0;
  }
  return mask;
}

#define CTXN_INSTANTIATE_MODEL(T)                                                                              \
  template struct TextBatch<T>;                                                                                \
  template class Network<T>;                                                                                   \
  template Tensor<T> linear(const Tensor<T>&, const Linear<T>&);                                               \
  template Tensor<T> encoder_layer(const Tensor<T>&, ConvBlock<T>&, Mode);                                     \
  template Tensor<T> cross_attention(const Tensor<T>&, const TextBatch<T>&, const CrossAttnParams<T>&, bool,   \
                                     AttentionTrace<T>*, std::size_t);                                         \
  template Tensor<T> contextual_forward(Network<T>&, const Tensor<T>&, const TextBatch<T>&, Mode);             \
  template Tensor<T> unet_forward(Network<T>&, const Tensor<T>&, Mode);                                        \
  template std::vector<std::uint8_t> predict_mask(std::span<const T>, double);

CTXN_INSTANTIATE_MODEL(float)
CTXN_INSTANTIATE_MODEL(double)

}  // namespace ctxn::nn
