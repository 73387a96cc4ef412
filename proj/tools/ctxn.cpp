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

// ctxn: command-line entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data/IO error,
// 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctxn/config.hpp"
#include "ctxn/data.hpp"
#include "ctxn/errors.hpp"
#include "ctxn/pgm.hpp"
#include "ctxn/tensor.hpp"
#include "ctxn/train.hpp"

namespace fs = std::filesystem;
using namespace ctxn;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double threshold = -1.0;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config, "JSON config document");
  app->add_option("--override", c.overrides, "Dotted key=value override, applied last (repeatable)");
  auto* out = app->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
  app->add_option("--threshold", c.threshold, "Mask threshold on sigmoid(logit)");
}

TrainConfig resolve_config(const Common& c) {
  auto overrides = c.overrides;
  if (c.seed_set) overrides.push_back("train.seed=" + std::to_string(c.seed));
  if (c.threshold >= 0) overrides.push_back("train.threshold=" + std::to_string(c.threshold));
  return c.config.empty() ? parse_config("", overrides) : load_config(c.config, overrides);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::vector<WordSwap> parse_swaps(const std::vector<std::string>& specs) {
  std::vector<WordSwap> swaps;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
      throw ConfigError("swap '" + s + "' is not of the form from:to");
    swaps.emplace_back(s.substr(0, colon), s.substr(colon + 1));
  }
  return swaps;
}

data::Sample sample_from_files(const fs::path& image_path, const std::string& report, const fs::path& truth_path) {
  const auto img = data::read_pgm(image_path);
  if (img.width != img.height) throw FormatError("image '" + image_path.string() + "' is not square", 1);
  data::Sample s;
  s.id = image_path.stem().string();
  s.size = img.width;
  for (auto p : img.pixels) s.image.push_back(static_cast<float>(p) / static_cast<float>(img.maxval));
  s.report = report;
  s.mask.assign(s.size * s.size, 0);
  if (!truth_path.empty()) {
    const auto truth = data::read_pgm(truth_path);
    if (truth.width != s.size || truth.height != s.size) throw FormatError("truth mask size differs from image", 1);
    for (std::size_t i = 0; i < truth.pixels.size(); ++i) s.mask[i] = truth.pixels[i] > 0 ? 1 : 0;
  }
  return s;
}

std::vector<data::Sample> dataset_for(const TrainConfig& config, const std::string& data_dir) {
  if (!data_dir.empty()) {
    auto samples = data::read_dataset(data_dir);
    if (samples.empty()) throw IoError("dataset '" + data_dir + "' is empty");
    return samples;
  }
  return load_or_generate(config);
}

std::vector<data::Sample> select(const std::vector<data::Sample>& all, const TrainConfig& config, int fold) {
  if (fold < 0) return all;
  data::SplitSpec spec = config.split;
  spec.fold_seeds = {config.split.fold_seeds.at(static_cast<std::size_t>(fold))};
  const auto split = data::mc_split(all.size(), spec).front();
  std::vector<data::Sample> out;
  for (auto i : split.test) out.push_back(all[i]);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxn: text-gated U-Net segmentation on synthetic report-annotated images"};
  app.require_subcommand(1);

  Common common;
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { common.seed = s, common.seed_set = true; }, "Global seed");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
  std::size_t gen_n = 0;
  add_common(gen, common, true);
  gen->add_option("--n", gen_n, "Number of samples (default: data.n)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train on one Monte Carlo fold");
  std::size_t train_fold = 0;
  add_common(train_cmd, common, true);
  train_cmd->add_option("--fold", train_fold, "Fold index into split.fold_seeds");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint, data_dir;
  int eval_fold = -1;
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_dir, "Dataset directory (default: from config)");
  eval_cmd->add_option("--fold", eval_fold, "Evaluate only this fold's test split");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the ablation arms across folds");
  std::size_t jobs = 1;
  add_common(ablate_cmd, common, true);
  ablate_cmd->add_option("--jobs", jobs, "Arms trained concurrently");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Word-swap probe on a checkpoint");
  std::vector<std::string> swap_specs;
  int probe_fold = -1;
  add_common(probe_cmd, common, true);
  probe_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  probe_cmd->add_option("--data", data_dir, "Dataset directory (default: from config)");
  probe_cmd->add_option("--fold", probe_fold, "Probe only this fold's test split");
  probe_cmd->add_option("--swap", swap_specs, "from:to word swap, applied simultaneously (default left:right right:left)");

  // viz
  auto* viz_cmd = app.add_subcommand("viz", "Dump attention maps for one sample");
  std::string sample_id;
  std::vector<std::string> viz_swaps;
  std::size_t channel = 0;
  add_common(viz_cmd, common, true);
  viz_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  viz_cmd->add_option("--data", data_dir, "Dataset directory (default: from config)");
  viz_cmd->add_option("--sample", sample_id, "Sample id (default: first)");
  viz_cmd->add_option("--swap", viz_swaps, "from:to word swap for the second report (default left:right right:left)");
  viz_cmd->add_option("--channel", channel, "Feature channel to render");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Segment one image given a report");
  std::string image_path, report, truth_path;
  add_common(predict_cmd, common, true);
  predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--image", image_path, "Input PGM")->required();
  predict_cmd->add_option("--report", report, "Report text");
  predict_cmd->add_option("--truth", truth_path, "Ground-truth mask PGM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const TrainConfig config = resolve_config(common);
    const fs::path out = common.out;

    if (*gen) {
      TrainConfig c = config;
      if (gen_n) c.data.n = gen_n;
      if (common.seed_set) c.data.seed = common.seed;
      c.data.dir.clear();
      const auto samples = load_or_generate(c);
      make_dir(out);
      data::write_dataset(samples, out, &c.data.generator);
      write_config_echo(c, out / "config.json");
      std::cout << "wrote " << samples.size() << " samples to " << out.string() << "\n";
      return 0;
    }

    if (*train_cmd) {
      const auto samples = load_or_generate(config);
      make_dir(out);
      write_config_echo(config, out / "config.json");
      if (verification_mode_requested()) {
        const auto report = verify_gradients(config, samples);
        std::cout << "gradient check (64-bit): max relative error " << report.max_rel_error() << " over "
                  << report.entries.size() << " parameters\n";
        if (!(report.max_rel_error() < 1e-3)) {
          std::cerr << "error: gradient check failed\n";
          return 3;
        }
      }
      TrainOptions options;
      options.out_dir = out;
      options.log = &std::cout;
      const auto result = train(config, samples, train_fold, options);
      std::cout << "test dice " << result.record.test.mean << " ± " << result.record.test.sd << " (best epoch "
                << result.record.best_epoch << ")\n";
      return 0;
    }

    if (*eval_cmd) {
      const auto ckpt = load_checkpoint(checkpoint);
      const auto all = dataset_for(config, data_dir);
      const auto samples = select(all, config, eval_fold);
      auto net = nn::Network<float>::from_checkpoint(ckpt);
      TrainConfig c = config;
      c.model = net.config();
      const auto text = TextSource::from_config(c);
      const auto result = evaluate(net, samples, text, config.threshold, config.ablation == Ablation::no_text);
      std::cout << "dice " << result.mean << " ± " << result.sd << " over " << result.scores.size()
                << " samples (ambiguous " << result.ambiguous_mean << " over " << result.ambiguous_count << ")\n";
      if (!common.out.empty()) {
        make_dir(out);
        nlohmann::json j{{"dice_mean", result.mean},
                         {"dice_sd", result.sd},
                         {"ambiguous_dice_mean", result.ambiguous_mean},
                         {"scores", result.scores}};
        write_text(out / "eval.json", j.dump(2) + "\n");
        write_config_echo(config, out / "config.json");
      }
      return 0;
    }

    if (*ablate_cmd) {
      const auto samples = load_or_generate(config);
      make_dir(out);
      write_config_echo(config, out / "config.json");
      TrainOptions options;
      options.out_dir = out;
      options.log = &std::cout;
      const auto table = ablate(config, samples, options, jobs);
      write_text(out / "ablation.csv", table.to_csv());
      nlohmann::json j = nlohmann::json::array();
      for (const auto& a : table.arms) {
        j.push_back({{"arm", std::string(to_string(a.arm))},
                     {"mean", a.cv.mean},
                     {"sd", a.cv.sd},
                     {"median", a.cv.median},
                     {"ambiguous_median", a.cv.ambiguous_median},
                     {"delta_vs_full", a.delta_vs_full}});
        std::cout << to_string(a.arm) << ": " << a.cv.mean << " ± " << a.cv.sd << " (delta vs full "
                  << a.delta_vs_full << ")\n";
      }
      write_text(out / "ablation.json", j.dump(2) + "\n");
      return 0;
    }

    if (*probe_cmd) {
      const auto ckpt = load_checkpoint(checkpoint);
      auto net = nn::Network<float>::from_checkpoint(ckpt);
      TrainConfig c = config;
      c.model = net.config();
      const auto samples = select(dataset_for(c, data_dir), c, probe_fold);
      const auto swaps = parse_swaps(swap_specs.empty() ? std::vector<std::string>{"left:right", "right:left"} : swap_specs);
      const auto text = TextSource::from_config(c);
      const auto report_out = word_swap_probe(net, samples, swaps, text, config.threshold);
      make_dir(out);
      write_text(out / "probe.json", report_out.to_json());
      write_config_echo(config, out / "config.json");
      std::cout << "applied " << report_out.applied << ", flip rate " << report_out.flip_rate_pct
                << "%, area ratio " << report_out.area_ratio_pct << "%, mean IoU " << report_out.mean_iou << "\n";
      return 0;
    }

    if (*viz_cmd) {
      const auto ckpt = load_checkpoint(checkpoint);
      auto net = nn::Network<float>::from_checkpoint(ckpt);
      TrainConfig c = config;
      c.model = net.config();
      const auto samples = dataset_for(c, data_dir);
      const data::Sample* chosen = &samples.front();
      if (!sample_id.empty()) {
        chosen = nullptr;
        for (const auto& s : samples) {
          if (s.id == sample_id) chosen = &s;
        }
        if (!chosen) throw IoError("sample '" + sample_id + "' not found");
      }
      const auto swaps = parse_swaps(viz_swaps.empty() ? std::vector<std::string>{"left:right", "right:left"} : viz_swaps);
      const auto swapped = swap_words(chosen->report, swaps);
      const auto dump = attention_dump(net, *chosen, swapped, out, TextSource::from_config(c), channel);
      write_config_echo(config, out / "config.json");
      std::cout << "wrote " << dump.maps.size() << " maps for " << chosen->id << "\n";
      return 0;
    }

    if (*predict_cmd) {
      const auto ckpt = load_checkpoint(checkpoint);
      auto net = nn::Network<float>::from_checkpoint(ckpt);
      TrainConfig c = config;
      c.model = net.config();
      const auto sample = sample_from_files(image_path, report, truth_path);
      const auto text = TextSource::from_config(c);
      const auto mask = nn::predict_mask<float>(predict_logits(net, sample, text.embed_text(report)), config.threshold);
      make_dir(out);
      data::PgmImage img{sample.size, sample.size, 255, {}};
      for (auto m : mask) img.pixels.push_back(m ? 255 : 0);
      data::write_pgm(img, out / "mask.pgm");
      write_config_echo(config, out / "config.json");
      std::cout << "wrote " << (out / "mask.pgm").string() << " (" << data::mask_area(mask) << " pixels)\n";
      if (!truth_path.empty()) std::cout << "dice " << data::dice(mask, sample.mask) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
