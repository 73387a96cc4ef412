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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "ctxn/adamw.hpp"
#include "ctxn/errors.hpp"

using namespace ctxn;

TEST(AdamW, FirstStepMovesByLearningRateTimesSign) {
  auto p = Tensor<double>::from({1}, {1.0}, true);
  AdamW<double> opt({{"p", p}}, {0.1, 0.9, 0.999, 1e-8, 0.01});
  p.impl().ensure_grad();
  p.grad()[0] = 0.5;
  opt.step();
  // m̂ = g and v̂ = g², so the step is lr·(g/(|g|+eps) + wd·θ).
  EXPECT_NEAR(p.data()[0], 1.0 - 0.1 * (0.5 / (0.5 + 1e-8) + 0.01), 1e-15);
}

TEST(AdamW, SecondStepMatchesHandComputation) {
  auto p = Tensor<double>::from({1}, {1.0}, true);
  AdamW<double> opt({{"p", p}}, {0.1, 0.9, 0.999, 1e-8, 0.01});
  p.impl().ensure_grad();
  p.grad()[0] = 0.5;
  opt.step();
  const double theta1 = p.data()[0];
  p.grad()[0] = -0.25;
  opt.step();
  const double m = 0.02;          // 0.9·0.05 + 0.1·(−0.25)
  const double v = 0.00031225;    // 0.999·0.00025 + 0.001·0.0625
  const double mhat = m / 0.19;   // 1 − 0.9²
  const double vhat = v / 0.001999;  // 1 − 0.999²
  const double expected = theta1 - 0.1 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.01 * theta1);
  EXPECT_NEAR(p.data()[0], expected, 1e-12);
  EXPECT_NEAR(opt.first_moment(0)[0], m, 1e-15);
  EXPECT_NEAR(opt.second_moment(0)[0], v, 1e-15);
  EXPECT_EQ(opt.step_count(), 2u);
}

TEST(AdamW, MissingGradientOnlyDecays) {
  auto p = Tensor<double>::from({2}, {2.0, -4.0}, true);
  AdamW<double> opt({{"p", p}}, {0.5, 0.9, 0.999, 1e-8, 0.1});
  opt.step();
  EXPECT_DOUBLE_EQ(p.data()[0], 2.0 - 0.5 * 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(p.data()[1], -4.0 + 0.5 * 0.1 * 4.0);
}

TEST(AdamW, NonFiniteGradientNamesParameterAndLeavesValues) {
  auto a = Tensor<float>::from({1}, {1.f}, true);
  auto b = Tensor<float>::from({1}, {1.f}, true);
  AdamW<float> opt({{"alpha", a}, {"beta", b}}, {});
  a.impl().ensure_grad();
  b.impl().ensure_grad();
  a.grad()[0] = 1.f;
  b.grad()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    opt.step();
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
  EXPECT_EQ(a.data()[0], 1.f);
  EXPECT_EQ(opt.step_count(), 0u);
}
