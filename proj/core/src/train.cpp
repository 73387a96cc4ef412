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

#include "ctxn/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ctxn/adamw.hpp"
#include "ctxn/augment.hpp"
#include "ctxn/errors.hpp"
#include "ctxn/rng.hpp"

namespace ctxn {

using nlohmann::json;

namespace {

std::mutex log_mutex;

void log_line(std::ostream* log, const std::string& line) {
  if (!log) return;
  std::lock_guard lock(log_mutex);
  *log << line << '\n';
  log->flush();
}

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace

TextSource::TextSource(std::size_t d_e, std::size_t max_tokens, std::uint64_t seed)
    : d_e_(d_e), max_tokens_(max_tokens), seed_(seed) {}

TextSource::TextSource(std::size_t d_e, std::size_t max_tokens, std::uint64_t seed,
                       std::shared_ptr<const text::EmbeddingTable> table)
    : d_e_(d_e), max_tokens_(max_tokens), seed_(seed), table_(std::move(table)) {}

TextSource TextSource::from_config(const TrainConfig& config) {
  if (config.data.embeddings.empty()) return {config.model.d_e, config.model.max_tokens, config.data.embed_seed};
  auto table = std::make_shared<const text::EmbeddingTable>(text::load_embeddings(config.data.embeddings));
  for (const auto& [id, e] : *table) {
    if (e.width != config.model.d_e || e.length != config.model.max_tokens) {
      throw ConfigError("embedding '" + id + "' is " + std::to_string(e.length) + "×" + std::to_string(e.width) +
                        " but the model expects " + std::to_string(config.model.max_tokens) + "×" +
                        std::to_string(config.model.d_e));
    }
  }
  return {config.model.d_e, config.model.max_tokens, config.data.embed_seed, std::move(table)};
}

text::ReportEmbedding TextSource::embed_text(const std::string& report) const {
  return text::embed(text::tokenize(report, max_tokens_), d_e_, seed_);
}

text::ReportEmbedding TextSource::embed(const data::Sample& sample, bool no_text) const {
  if (no_text) return embed_text("");
  if (table_) {
    auto it = table_->find(sample.id);
    if (it == table_->end()) throw IoError("no precomputed embedding for sample '" + sample.id + "'");
    return it->second;
  }
  return embed_text(sample.report);
}

nn::TextBatch<float> make_text_batch(std::span<const text::ReportEmbedding> items) {
  std::vector<const text::ReportEmbedding*> ptrs;
  for (const auto& e : items) ptrs.push_back(&e);
  return nn::TextBatch<float>::from(ptrs);
}

Tensor<float> stack_images(std::span<const data::Sample* const> samples) {
  const std::size_t s = samples.front()->size;
  std::vector<float> values;
  values.reserve(samples.size() * s * s);
  for (const auto* sample : samples) {
    if (sample->size != s) throw ShapeError("stack_images: mixed image sizes in one batch");
    values.insert(values.end(), sample->image.begin(), sample->image.end());
  }
  return Tensor<float>::from({samples.size(), 1, s, s}, std::move(values));
}

Tensor<float> stack_masks(std::span<const data::Sample* const> samples) {
  const std::size_t s = samples.front()->size;
  std::vector<float> values;
  values.reserve(samples.size() * s * s);
  for (const auto* sample : samples) {
    for (auto m : sample->mask) values.push_back(m ? 1.0f : 0.0f);
  }
  return Tensor<float>::from({samples.size(), 1, s, s}, std::move(values));
}

std::pair<double, double> mean_sd(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

namespace {

void check_size(const nn::Network<float>& net, const data::Sample& sample) {
  if (sample.size != net.config().image_size) {
    throw ShapeError("sample '" + sample.id + "' is " + std::to_string(sample.size) + "×" +
                     std::to_string(sample.size) + " but the model expects " +
                     std::to_string(net.config().image_size));
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

EvalResult evaluate(nn::Network<float>& net, std::span<const data::Sample> samples, const TextSource& text,
                    double threshold, bool no_text, std::size_t batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  NoGradGuard no_grad;
  EvalResult result;
  const std::size_t pixels = net.config().image_size * net.config().image_size;
  std::vector<double> ambiguous;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const data::Sample*> batch;
    std::vector<text::ReportEmbedding> reports;
    for (std::size_t i = start; i < end; ++i) {
      check_size(net, samples[i]);
      batch.push_back(&samples[i]);
      reports.push_back(text.embed(samples[i], no_text));
    }
    const auto text_batch = make_text_batch(reports);
    const auto logits = net.forward(stack_images(batch), &text_batch, Mode::eval);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto pred = nn::predict_mask<float>(logits.data().subspan(b * pixels, pixels), threshold);
      const double d = data::dice(pred, batch[b]->mask);
      result.scores.push_back(d);
      if (batch[b]->attrs.ambiguous) ambiguous.push_back(d);
    }
  }
  std::tie(result.mean, result.sd) = mean_sd(result.scores);
  result.ambiguous_mean = mean_sd(ambiguous).first;
  result.ambiguous_count = ambiguous.size();
  return result;
}

EvalResult evaluate(const Checkpoint& checkpoint, std::span<const data::Sample> samples, const TextSource& text,
                    double threshold, bool no_text) {
  auto net = nn::Network<float>::from_checkpoint(checkpoint);
  return evaluate(net, samples, text, threshold, no_text);
}

std::vector<float> predict_logits(nn::Network<float>& net, const data::Sample& sample,
                                  const text::ReportEmbedding& report, nn::AttentionTrace<float>* trace) {
  check_size(net, sample);
  NoGradGuard no_grad;
  const data::Sample* one[] = {&sample};
  const auto text_batch = make_text_batch(std::span(&report, 1));
  return net.forward(stack_images(one), &text_batch, Mode::eval, trace).values();
}

std::string RunRecord::to_json() const {
  json j;
  j["arm"] = arm;
  j["fold"] = fold;
  j["fold_seed"] = fold_seed;
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_dice", e.val_dice}});
  }
  j["epochs"] = epochs_json;
  j["best_epoch"] = best_epoch;
  j["best_val_dice"] = best_val_dice;
  json scores = json::object();
  for (std::size_t i = 0; i < test.scores.size() && i < test_ids.size(); ++i) scores[test_ids[i]] = test.scores[i];
  j["test"] = {{"dice_mean", test.mean},
               {"dice_sd", test.sd},
               {"ambiguous_dice_mean", test.ambiguous_mean},
               {"ambiguous_count", test.ambiguous_count},
               {"per_sample", scores}};
  j["checkpoint"] = checkpoint_path;
  j["text_gradient_seen"] = text_gradient_seen;
  j["config"] = config_echo.empty() ? json::object() : json::parse(config_echo);
  return j.dump(2) + "\n";
}

TrainResult train(const TrainConfig& base, std::span<const data::Sample> dataset, std::size_t fold,
                  const TrainOptions& options) {
  const TrainConfig config = arm_config(base, base.ablation);
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (fold >= config.split.fold_seeds.size()) throw std::invalid_argument("train: fold index out of range");
  for (const auto& s : dataset) {
    if (s.size != config.model.image_size) {
      throw ShapeError("train: sample '" + s.id + "' has size " + std::to_string(s.size) + ", model expects " +
                       std::to_string(config.model.image_size));
    }
  }

  data::SplitSpec one_fold = config.split;
  const std::uint64_t fold_seed = config.split.fold_seeds[fold];
  one_fold.fold_seeds = {fold_seed};
  const data::Fold split = data::mc_split(dataset.size(), one_fold).front();
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<data::Sample> out;
    for (auto i : idx) out.push_back(dataset[i]);
    return out;
  };
  const auto val_set = pick(split.val);
  const auto test_set = pick(split.test);

  std::optional<TextSource> own_text;
  if (!options.text) own_text = TextSource::from_config(config);
  const TextSource& text = options.text ? *options.text : *own_text;
  const bool no_text = config.ablation == Ablation::no_text;
  std::optional<aug::Lexicon> own_lexicon;
  const aug::Lexicon* lexicon = options.lexicon;
  if (!lexicon && !config.data.lexicon.empty()) {
    own_lexicon = aug::load_lexicon(config.data.lexicon);
    lexicon = &*own_lexicon;
  }

  nn::Network<float> net(config.model);
  AdamW<float> optimizer(net.parameters(), config.optimizer());

  RunRecord record;
  record.arm = std::string(to_string(config.ablation));
  record.fold = fold;
  record.fold_seed = fold_seed;
  record.config_echo = config_to_json(config);
  Checkpoint best;
  double best_val = -1.0;
  const std::uint64_t run_seed = derive_seed({config.seed, fold_seed});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    Rng shuffle_rng(derive_seed({run_seed, epoch, 0x5348554646ULL}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<data::Sample> augmented;
      std::vector<text::ReportEmbedding> reports;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        augmented.push_back(aug::augment_sample(dataset[idx], config.policy, aug::augment_seed(run_seed, epoch, idx),
                                                lexicon));
        reports.push_back(text.embed(augmented.back(), no_text));
      }
      std::vector<const data::Sample*> batch;
      for (const auto& s : augmented) batch.push_back(&s);
      const auto text_batch = make_text_batch(reports);

      auto logits = net.forward(stack_images(batch), &text_batch, Mode::train);
      auto loss = bce_with_logits(logits, stack_masks(batch));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError(format("train: non-finite loss at epoch %zu, step %zu (fold %zu)", epoch, steps + 1, fold));
      }
      optimizer.zero_grad();
      backward(loss);
      if (text_batch.embeddings.has_grad()) record.text_gradient_seen = true;
      optimizer.step();
      loss_sum += value;
      ++steps;
    }

    const double val_dice = val_set.empty() ? 0.0 : evaluate(net, val_set, text, config.threshold, no_text).mean;
    record.epochs.push_back({epoch, loss_sum / static_cast<double>(std::max<std::size_t>(1, steps)), val_dice});
    if (val_dice > best_val) {
      best_val = val_dice;
      record.best_epoch = epoch;
      best = net.to_checkpoint();
    }
    log_line(options.log, format("[%s fold %zu] epoch %zu/%zu loss %.5f val_dice %.4f", record.arm.c_str(), fold,
                                 epoch, config.epochs, record.epochs.back().train_loss, val_dice));
  }
  record.best_val_dice = best_val;

  auto best_net = nn::Network<float>::from_checkpoint(best);
  record.test = evaluate(best_net, test_set, text, config.threshold, no_text);
  for (const auto& s : test_set) record.test_ids.push_back(s.id);
  log_line(options.log, format("[%s fold %zu] best epoch %zu val %.4f test %.4f ± %.4f (ambiguous %.4f)",
                               record.arm.c_str(), fold, record.best_epoch, best_val, record.test.mean,
                               record.test.sd, record.test.ambiguous_mean));

  if (!options.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create '" + options.out_dir.string() + "': " + ec.message());
    const auto ckpt_path = options.out_dir / "best.ctxn";
    save_checkpoint(best, ckpt_path);
    record.checkpoint_path = ckpt_path.string();
    write_config_echo(config, options.out_dir / "config.json");
    write_text(options.out_dir / "runrecord.json", record.to_json());
  }
  return {std::move(record), std::move(best)};
}

CrossValidation cross_validate(const TrainConfig& config, std::span<const data::Sample> dataset,
                               const TrainOptions& options) {
  if (dataset.size() < 5 * config.batch_size) {
    throw std::invalid_argument("cross_validate: need at least 5·batch_size = " + std::to_string(5 * config.batch_size) +
                                " samples, got " + std::to_string(dataset.size()));
  }
  CrossValidation cv;
  std::vector<double> means, ambiguous;
  for (std::size_t k = 0; k < config.fold_count(); ++k) {
    TrainOptions fold_options = options;
    if (!options.out_dir.empty()) fold_options.out_dir = options.out_dir / ("fold" + std::to_string(k));
    auto result = train(config, dataset, k, fold_options);
    means.push_back(result.record.test.mean);
    ambiguous.push_back(result.record.test.ambiguous_mean);
    cv.records.push_back(std::move(result.record));
  }
  std::tie(cv.mean, cv.sd) = mean_sd(means);
  cv.median = median(means);
  cv.ambiguous_median = median(ambiguous);
  return cv;
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "arm,fold,dice,sd\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& a : arms) {
    for (const auto& r : a.cv.records) out << to_string(a.arm) << ',' << r.fold << ',' << r.test.mean << ',' << r.test.sd << '\n';
  }
  return out.str();
}

AblationTable ablate(const TrainConfig& base, std::span<const data::Sample> dataset, const TrainOptions& options,
                     std::size_t jobs, std::vector<Ablation> arms) {
  if (arms.empty()) arms = {Ablation::full, Ablation::no_text, Ablation::flip, Ablation::baseline_unet};
  AblationTable table;
  table.arms.resize(arms.size());
  std::vector<std::exception_ptr> errors(arms.size());
  auto run_arm = [&](std::size_t i) {
    try {
      TrainOptions arm_options = options;
      if (!options.out_dir.empty()) arm_options.out_dir = options.out_dir / std::string(to_string(arms[i]));
      table.arms[i].arm = arms[i];
      table.arms[i].cv = cross_validate(arm_config(base, arms[i]), dataset, arm_options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < arms.size(); start += jobs) {
    std::vector<std::thread> workers;
    for (std::size_t i = start; i < std::min(arms.size(), start + jobs); ++i) {
      if (jobs == 1) {
        run_arm(i);
      } else {
        workers.emplace_back(run_arm, i);
      }
    }
    for (auto& w : workers) w.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double full = 0.0;
  for (const auto& a : table.arms) {
    if (a.arm == Ablation::full) full = a.cv.median;
  }
  for (auto& a : table.arms) a.delta_vs_full = a.cv.median - full;
  return table;
}

GradCheckReport verify_gradients(const TrainConfig& base, std::span<const data::Sample> samples,
                                 std::size_t parameters, std::uint64_t seed) {
  const TrainConfig config = arm_config(base, base.ablation);
  if (samples.empty()) throw std::invalid_argument("verify_gradients: no samples");
  const std::size_t n = std::min<std::size_t>(2, samples.size());
  const std::size_t s = config.model.image_size;
  const TextSource text = TextSource::from_config(config);
  std::vector<text::ReportEmbedding> reports;
  std::vector<double> images, masks;
  for (std::size_t i = 0; i < n; ++i) {
    if (samples[i].size != s) throw ShapeError("verify_gradients: sample size does not match model.image_size");
    reports.push_back(text.embed(samples[i], config.ablation == Ablation::no_text));
    images.insert(images.end(), samples[i].image.begin(), samples[i].image.end());
    for (auto m : samples[i].mask) masks.push_back(m ? 1.0 : 0.0);
  }
  std::vector<const text::ReportEmbedding*> ptrs;
  for (const auto& r : reports) ptrs.push_back(&r);
  const auto text_batch = nn::TextBatch<double>::from(ptrs);
  const auto x = Tensor<double>::from({n, 1, s, s}, std::move(images));
  const auto y = Tensor<double>::from({n, 1, s, s}, std::move(masks));
  nn::Network<double> net(config.model);
  auto loss_fn = [&] { return bce_with_logits(net.forward(x, &text_batch, Mode::train), y); };
  return finite_diff_check(loss_fn, net.parameters(), 1e-5, parameters, seed);
}

std::vector<data::Sample> load_or_generate(const TrainConfig& config) {
  std::vector<data::Sample> samples;
  if (!config.data.dir.empty()) {
    samples = data::read_dataset(config.data.dir);
  } else {
    auto gen = config.data.generator;
    gen.image_size = config.model.image_size;
    samples = data::generate_dataset(config.data.n, config.data.seed, gen);
  }
  for (const auto& s : samples) {
    if (s.size != config.model.image_size) {
      throw ShapeError("dataset sample '" + s.id + "' is " + std::to_string(s.size) + " px, model.image_size is " +
                       std::to_string(config.model.image_size));
    }
  }
  return samples;
}

}  // namespace ctxn
