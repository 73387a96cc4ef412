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

#include <random>

#include <benchmark/benchmark.h>

#include "ctxn/adamw.hpp"
#include "ctxn/augment.hpp"
#include "ctxn/model.hpp"
#include "ctxn/ops.hpp"
#include "ctxn/train.hpp"

using namespace ctxn;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(uniform(rng, -1, 1));
  return Tensor<float>::from(std::move(shape), std::move(v), grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  auto x = random_tensor({4, c, s, s}, 1);
  auto w = random_tensor({c, c, 3, 3}, 2);
  auto b = random_tensor({c}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1).data().data());
  state.SetItemsProcessed(state.iterations() * 4 * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv2dForward)->Args({8, 64})->Args({16, 32})->Args({32, 16});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  auto x = random_tensor({4, c, s, s}, 1, true);
  auto w = random_tensor({c, c, 3, 3}, 2, true);
  auto b = random_tensor({c}, 3, true);
  for (auto _ : state) {
    auto loss = sum(conv2d(x, w, b, 1, 1));
    backward(loss);
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 64})->Args({32, 16});

struct ModelFixture {
  nn::ModelConfig config;
  Tensor<float> images, masks;
  std::vector<text::ReportEmbedding> reports;

  explicit ModelFixture(std::size_t batch) {
    images = random_tensor({batch, 1, config.image_size, config.image_size}, 4);
    std::vector<float> m(images.numel());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (i % 7 == 0) ? 1.f : 0.f;
    masks = Tensor<float>::from(images.shape(), m);
    for (std::size_t i = 0; i < batch; ++i)
      reports.push_back(text::embed(text::tokenize("Large left apical pneumothorax. Heart size is normal.",
                                                   config.max_tokens),
                                    config.d_e, 0));
  }
  nn::TextBatch<float> text() const { return make_text_batch(reports); }
};

void BM_ModelForward(benchmark::State& state) {
  ModelFixture f(static_cast<std::size_t>(state.range(0)));
  if (state.range(1)) f.config.arch = nn::Architecture::unet;
  nn::Network<float> net(f.config);
  const auto text = f.text();
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(f.images, &text, Mode::eval).data().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ModelForward)->ArgNames({"batch", "unet"})->Args({1, 0})->Args({4, 0})->Args({4, 1});

void BM_TrainStep(benchmark::State& state) {
  ModelFixture f(4);
  nn::Network<float> net(f.config);
  AdamW<float> opt(net.parameters(), {});
  const auto text = f.text();
  for (auto _ : state) {
    opt.zero_grad();
    auto loss = bce_with_logits(net.forward(f.images, &text, Mode::train), f.masks);
    backward(loss);
    opt.step();
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_AugmentSample(benchmark::State& state) {
  data::GeneratorConfig gen;
  const auto sample = data::generate_sample(1, gen);
  aug::AugmentPolicy policy;
  policy.p_photometric = policy.p_distort = policy.p_ssr = 1.0;
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(aug::augment_sample(sample, policy, i++).image.data());
}
BENCHMARK(BM_AugmentSample);

}  // namespace

BENCHMARK_MAIN();
