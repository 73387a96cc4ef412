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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctxn/adamw.hpp"
#include "ctxn/augment.hpp"
#include "ctxn/data.hpp"
#include "ctxn/model.hpp"

namespace ctxn {

enum class Ablation { full, no_text, flip, baseline_unet };

std::string_view to_string(Ablation arm);
Ablation parse_ablation(std::string_view s);

struct DataConfig {
  std::string dir;  // empty: generate in memory
  std::size_t n = 512;
  std::uint64_t seed = 0;
  data::GeneratorConfig generator;
  std::string lexicon;     // empty: built-in lexicon
  std::string embeddings;  // empty: hashed embedder
  std::uint64_t embed_seed = 0;
};

struct TrainConfig {
  double lr = 5e-5;
  std::size_t epochs = 100;
  std::size_t batch_size = 4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
  Ablation ablation = Ablation::full;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::size_t folds = 0;  // 0: one run per fold seed
  nn::ModelConfig model;
  aug::AugmentPolicy policy;
  data::SplitSpec split;
  DataConfig data;

  void validate() const;
  AdamWOptions optimizer() const;
  std::size_t fold_count() const;
};

/// The configuration an arm actually trains with: baseline_unet switches the
/// architecture, flip raises p_hflip to 0.5 when it is unset. Everything
/// else is left as in `base`.
TrainConfig arm_config(const TrainConfig& base, Ablation arm);

/// Config documents are JSON objects with sections "train", "model",
/// "augment", "split" and "data". Missing keys keep their defaults.
/// Unknown keys and type mismatches raise ConfigError naming the key path;
/// an unknown key also names the nearest valid one. Overrides have the form
/// "section.key=value" and apply last; values parse as JSON, falling back to
/// a bare string.
TrainConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides = {});
TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Full JSON echo; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const TrainConfig& config);
void write_config_echo(const TrainConfig& config, const std::filesystem::path& path);

/// Levenshtein distance, used for key suggestions.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace ctxn
