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

#include "ctxn/config.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxn/errors.hpp"

namespace ctxn {

using nlohmann::json;

std::string_view to_string(Ablation arm) {
  switch (arm) {
    case Ablation::full: return "full";
    case Ablation::no_text: return "no_text";
    case Ablation::flip: return "flip";
    case Ablation::baseline_unet: return "baseline_unet";
  }
  return "full";
}

Ablation parse_ablation(std::string_view s) {
  for (auto arm : {Ablation::full, Ablation::no_text, Ablation::flip, Ablation::baseline_unet}) {
    if (s == to_string(arm)) return arm;
  }
  throw ConfigError("train.ablation: unknown arm '" + std::string(s) +
                    "' (expected full, no_text, flip or baseline_unet)");
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train.lr must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("train.beta1/beta2 must lie in [0, 1)");
  if (!(eps > 0) || weight_decay < 0) throw ConfigError("train.eps must be > 0 and train.weight_decay >= 0");
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("train.threshold must lie in (0, 1)");
  if (folds > split.fold_seeds.size()) throw ConfigError("train.folds exceeds the number of split.fold_seeds");
  model.validate();
  policy.validate();
  split.validate();
}

AdamWOptions TrainConfig::optimizer() const { return {lr, beta1, beta2, eps, weight_decay}; }

std::size_t TrainConfig::fold_count() const { return folds == 0 ? split.fold_seeds.size() : folds; }

TrainConfig arm_config(const TrainConfig& base, Ablation arm) {
  TrainConfig c = base;
  c.ablation = arm;
  if (arm == Ablation::baseline_unet) c.model.arch = nn::Architecture::unet;
  if (arm == Ablation::flip && c.policy.p_hflip == 0.0) c.policy.p_hflip = 0.5;
  return c;
}

namespace {

json to_json(const TrainConfig& c) {
  const auto& m = c.model;
  const auto& p = c.policy;
  const auto& g = c.data.generator;
  return json{
      {"train",
       {{"lr", c.lr},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"eps", c.eps},
        {"weight_decay", c.weight_decay},
        {"ablation", std::string(to_string(c.ablation))},
        {"threshold", c.threshold},
        {"seed", c.seed},
        {"folds", c.folds}}},
      {"model",
       {{"image_size", m.image_size},
        {"depth", m.depth},
        {"channels", m.channels},
        {"bottleneck", m.bottleneck},
        {"d_e", m.d_e},
        {"max_tokens", m.max_tokens},
        {"attend_padding", m.attend_padding},
        {"init_seed", m.init_seed},
        {"arch", m.arch == nn::Architecture::contextual ? "contextual" : "unet"}}},
      {"augment",
       {{"p_hflip", p.p_hflip},
        {"p_photometric", p.p_photometric},
        {"p_distort", p.p_distort},
        {"p_ssr", p.p_ssr},
        {"text_shuffle", p.text_shuffle},
        {"text_synonym_p", p.text_synonym_p},
        {"brightness_limit", p.brightness_limit},
        {"contrast_min", p.contrast_min},
        {"contrast_max", p.contrast_max},
        {"gamma_min", p.gamma_min},
        {"gamma_max", p.gamma_max},
        {"elastic_alpha", p.elastic_alpha},
        {"elastic_sigma", p.elastic_sigma},
        {"grid_steps", p.grid_steps},
        {"grid_limit", p.grid_limit},
        {"optical_limit", p.optical_limit},
        {"shift_limit", p.shift_limit},
        {"scale_min", p.scale_min},
        {"scale_max", p.scale_max},
        {"rotate_limit_deg", p.rotate_limit_deg},
        {"max_mask_loss", p.max_mask_loss}}},
      {"split",
       {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}, {"fold_seeds", c.split.fold_seeds}}},
      {"data",
       {{"dir", c.data.dir},
        {"n", c.data.n},
        {"seed", c.data.seed},
        {"ambiguous_fraction", g.ambiguous_fraction},
        {"present_fraction", g.present_fraction},
        {"distractor_contrast", g.distractor_contrast},
        {"lexicon", c.data.lexicon},
        {"embeddings", c.data.embeddings},
        {"embed_seed", c.data.embed_seed}}},
  };
}

template <typename V>
void read(const json& j, const char* section, const char* key, V& out) {
  const auto& node = j.at(section).at(key);
  try {
    out = node.get<V>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + "." + key + ": type mismatch (got " + node.dump() + ")");
  }
}

TrainConfig from_json(const json& j) {
  TrainConfig c;
  read(j, "train", "lr", c.lr);
  read(j, "train", "epochs", c.epochs);
  read(j, "train", "batch_size", c.batch_size);
  read(j, "train", "beta1", c.beta1);
  read(j, "train", "beta2", c.beta2);
  read(j, "train", "eps", c.eps);
  read(j, "train", "weight_decay", c.weight_decay);
  std::string ablation;
  read(j, "train", "ablation", ablation);
  c.ablation = parse_ablation(ablation);
  read(j, "train", "threshold", c.threshold);
  read(j, "train", "seed", c.seed);
  read(j, "train", "folds", c.folds);

  auto& m = c.model;
  read(j, "model", "image_size", m.image_size);
  read(j, "model", "depth", m.depth);
  read(j, "model", "channels", m.channels);
  read(j, "model", "bottleneck", m.bottleneck);
  read(j, "model", "d_e", m.d_e);
  read(j, "model", "max_tokens", m.max_tokens);
  read(j, "model", "attend_padding", m.attend_padding);
  read(j, "model", "init_seed", m.init_seed);
  std::string arch;
  read(j, "model", "arch", arch);
  if (arch == "contextual") {
    m.arch = nn::Architecture::contextual;
  } else if (arch == "unet") {
    m.arch = nn::Architecture::unet;
  } else {
    throw ConfigError("model.arch: unknown architecture '" + arch + "' (expected contextual or unet)");
  }

  auto& p = c.policy;
  read(j, "augment", "p_hflip", p.p_hflip);
  read(j, "augment", "p_photometric", p.p_photometric);
  read(j, "augment", "p_distort", p.p_distort);
  read(j, "augment", "p_ssr", p.p_ssr);
  read(j, "augment", "text_shuffle", p.text_shuffle);
  read(j, "augment", "text_synonym_p", p.text_synonym_p);
  read(j, "augment", "brightness_limit", p.brightness_limit);
  read(j, "augment", "contrast_min", p.contrast_min);
  read(j, "augment", "contrast_max", p.contrast_max);
  read(j, "augment", "gamma_min", p.gamma_min);
  read(j, "augment", "gamma_max", p.gamma_max);
  read(j, "augment", "elastic_alpha", p.elastic_alpha);
  read(j, "augment", "elastic_sigma", p.elastic_sigma);
  read(j, "augment", "grid_steps", p.grid_steps);
  read(j, "augment", "grid_limit", p.grid_limit);
  read(j, "augment", "optical_limit", p.optical_limit);
  read(j, "augment", "shift_limit", p.shift_limit);
  read(j, "augment", "scale_min", p.scale_min);
  read(j, "augment", "scale_max", p.scale_max);
  read(j, "augment", "rotate_limit_deg", p.rotate_limit_deg);
  read(j, "augment", "max_mask_loss", p.max_mask_loss);

  read(j, "split", "train", c.split.train);
  read(j, "split", "val", c.split.val);
  read(j, "split", "test", c.split.test);
  read(j, "split", "fold_seeds", c.split.fold_seeds);

  auto& d = c.data;
  read(j, "data", "dir", d.dir);
  read(j, "data", "n", d.n);
  read(j, "data", "seed", d.seed);
  d.generator.image_size = m.image_size;
  read(j, "data", "ambiguous_fraction", d.generator.ambiguous_fraction);
  read(j, "data", "present_fraction", d.generator.present_fraction);
  read(j, "data", "distractor_contrast", d.generator.distractor_contrast);
  read(j, "data", "lexicon", d.lexicon);
  read(j, "data", "embeddings", d.embeddings);
  read(j, "data", "embed_seed", d.embed_seed);
  return c;
}

void collect_paths(const json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    out.push_back(path);
    if (it.value().is_object()) collect_paths(it.value(), path, out);
  }
}

[[noreturn]] void unknown_key(const json& defaults, const std::string& path) {
  std::vector<std::string> valid;
  collect_paths(defaults, "", valid);
  const auto best = std::min_element(valid.begin(), valid.end(), [&](const auto& a, const auto& b) {
    return edit_distance(a, path) < edit_distance(b, path);
  });
  throw ConfigError("unknown config key '" + path + "'; did you mean '" + *best + "'?");
}

bool compatible(const json& expected, const json& given) {
  if (expected.is_number_unsigned()) {
    return given.is_number_unsigned() || (given.is_number_integer() && given.get<std::int64_t>() >= 0);
  }
  if (expected.is_number()) return given.is_number();
  if (expected.is_boolean()) return given.is_boolean();
  if (expected.is_string()) return given.is_string();
  if (expected.is_array()) return given.is_array();
  if (expected.is_object()) return given.is_object();
  return false;
}

void set_value(json& target, const json& defaults, const std::string& path, const json& value) {
  if (!compatible(target, value)) {
    throw ConfigError(path + ": type mismatch (expected " + std::string(target.type_name()) + ", got " + value.dump() +
                      ")");
  }
  if (target.is_object()) {
    for (auto it = value.begin(); it != value.end(); ++it) {
      const std::string child = path + "." + it.key();
      if (!target.contains(it.key())) unknown_key(defaults, child);
      set_value(target[it.key()], defaults, child, it.value());
    }
    return;
  }
  target = value;
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t k = 1; k <= b.size(); ++k) {
      const std::size_t up = row[k];
      row[k] = std::min({row[k] + 1, row[k - 1] + 1, diag + (a[i - 1] == b[k - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

TrainConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides) {
  const json defaults = to_json(TrainConfig{});
  json merged = defaults;
  const bool blank = json_text.find_first_not_of(" \t\r\n") == std::string_view::npos;
  if (!blank) {
    json user;
    try {
      user = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = user.begin(); it != user.end(); ++it) {
      if (!merged.contains(it.key())) unknown_key(defaults, it.key());
      set_value(merged[it.key()], defaults, it.key(), it.value());
    }
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not of the form key=value");
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json* node = &merged;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) unknown_key(defaults, path);
      node = &(*node)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    set_value(*node, defaults, path, value);
  }
  TrainConfig config = from_json(merged);
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides);
}

std::string config_to_json(const TrainConfig& config) { return to_json(config).dump(2) + "\n"; }

void write_config_echo(const TrainConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write config echo '" + path.string() + "'");
  out << config_to_json(config);
}

}  // namespace ctxn
