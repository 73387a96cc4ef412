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

#include <gtest/gtest.h>

#include "ctxn/config.hpp"
#include "ctxn/errors.hpp"

using namespace ctxn;

TEST(Config, EmptyDocumentKeepsDefaults) {
  auto c = parse_config("{}");
  EXPECT_DOUBLE_EQ(c.lr, 5e-5);
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_EQ(c.batch_size, 4u);
  EXPECT_DOUBLE_EQ(c.weight_decay, 0.01);
  EXPECT_EQ(c.model.image_size, 64u);
  EXPECT_EQ(c.model.depth, 3u);
  EXPECT_EQ(c.model.channels, (std::vector<std::size_t>{8, 16, 32}));
  EXPECT_EQ(c.model.d_e, 32u);
  EXPECT_EQ(c.model.max_tokens, 32u);
  EXPECT_TRUE(c.model.attend_padding);
  EXPECT_DOUBLE_EQ(c.policy.p_photometric, 0.3);
  EXPECT_DOUBLE_EQ(c.policy.p_distort, 0.3);
  EXPECT_DOUBLE_EQ(c.policy.p_ssr, 0.5);
  EXPECT_DOUBLE_EQ(c.policy.p_hflip, 0.0);
  EXPECT_DOUBLE_EQ(c.split.train, 0.70);
  EXPECT_EQ(c.split.fold_seeds.size(), 5u);
  EXPECT_EQ(c.ablation, Ablation::full);
}

TEST(Config, OverridesApplyAndEchoRoundTrips) {
  auto c = parse_config(R"({"train": {"epochs": 7}})",
                        {"train.lr=0.001", "model.channels=[4,8,16]", "train.ablation=no_text", "data.n=64"});
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.model.channels, (std::vector<std::size_t>{4, 8, 16}));
  EXPECT_EQ(c.ablation, Ablation::no_text);
  EXPECT_EQ(c.data.n, 64u);
  const auto echo = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(echo)), echo);
}

TEST(Config, MisspelledKeySuggestsNearest) {
  try {
    parse_config(R"({"train": {"learning_rat": 0.1}})");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("train.learning_rat"), std::string::npos) << what;
  }
  try {
    parse_config("{}", {"model.dept=2"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("depth"), std::string::npos) << e.what();
  }
}

TEST(Config, TypeMismatchAndBadValuesRejected) {
  EXPECT_THROW(parse_config(R"({"train": {"epochs": "many"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"model": {"channels": [4, 8]}})"), ConfigError);  // depth 3
  EXPECT_THROW(parse_config("{}", {"train.lr=-1"}), ConfigError);
  EXPECT_THROW(parse_config("{}", {"train.ablation=sideways"}), ConfigError);
  EXPECT_THROW(parse_config("{}", {"no_equals_sign"}), ConfigError);
  EXPECT_THROW(parse_config("[1]"), ConfigError);
}

TEST(Config, ArmConfigs) {
  TrainConfig base;
  EXPECT_EQ(arm_config(base, Ablation::baseline_unet).model.arch, nn::Architecture::unet);
  EXPECT_DOUBLE_EQ(arm_config(base, Ablation::flip).policy.p_hflip, 0.5);
  EXPECT_DOUBLE_EQ(arm_config(base, Ablation::no_text).policy.p_hflip, 0.0);
  EXPECT_EQ(arm_config(base, Ablation::no_text).model.arch, nn::Architecture::contextual);
}

TEST(Config, FoldCount) {
  TrainConfig c;
  EXPECT_EQ(c.fold_count(), 5u);
  c.folds = 3;
  EXPECT_EQ(c.fold_count(), 3u);
}

TEST(EditDistance, Levenshtein) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("lr", "lr"), 0u);
}
