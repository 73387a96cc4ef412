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
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctxn/checkpoint.hpp"
#include "ctxn/config.hpp"
#include "ctxn/data.hpp"
#include "ctxn/gradcheck.hpp"
#include "ctxn/model.hpp"
#include "ctxn/textenc.hpp"

namespace ctxn {

/// Supplies the frozen report matrix for a sample. With a precomputed table
/// the matrix is looked up by sample id (text augmentation cannot apply);
/// otherwise reports are hashed by the token embedder. An empty report
/// ("no text") always maps to the all-padding matrix of the hashed embedder.
class TextSource {
 public:
  TextSource(std::size_t d_e, std::size_t max_tokens, std::uint64_t seed);
  TextSource(std::size_t d_e, std::size_t max_tokens, std::uint64_t seed,
             std::shared_ptr<const text::EmbeddingTable> table);

  static TextSource from_config(const TrainConfig& config);

  text::ReportEmbedding embed(const data::Sample& sample, bool no_text) const;
  text::ReportEmbedding embed_text(const std::string& report) const;
  bool precomputed() const { return table_ != nullptr; }

 private:
  std::size_t d_e_, max_tokens_;
  std::uint64_t seed_;
  std::shared_ptr<const text::EmbeddingTable> table_;
};

/// Images and masks of a batch as N×1×S×S tensors.
nn::TextBatch<float> make_text_batch(std::span<const text::ReportEmbedding> items);
Tensor<float> stack_images(std::span<const data::Sample* const> samples);
Tensor<float> stack_masks(std::span<const data::Sample* const> samples);

struct EvalResult {
  std::vector<double> scores;
  double mean = 0.0;
  double sd = 0.0;  // population
  double ambiguous_mean = 0.0;
  std::size_t ambiguous_count = 0;
};

/// Population mean and SD.
std::pair<double, double> mean_sd(std::span<const double> values);

/// Eval-mode forward in batches; per-sample Dice of predict_mask against the
/// truth. `no_text` feeds empty reports.
EvalResult evaluate(nn::Network<float>& net, std::span<const data::Sample> samples, const TextSource& text,
                    double threshold, bool no_text = false, std::size_t batch_size = 8);
EvalResult evaluate(const Checkpoint& checkpoint, std::span<const data::Sample> samples, const TextSource& text,
                    double threshold, bool no_text = false);

/// Eval-mode logits for one sample with an explicit report.
std::vector<float> predict_logits(nn::Network<float>& net, const data::Sample& sample,
                                  const text::ReportEmbedding& report, nn::AttentionTrace<float>* trace = nullptr);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_dice = 0.0;
};

struct RunRecord {
  std::string arm;
  std::size_t fold = 0;
  std::uint64_t fold_seed = 0;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_dice = 0.0;
  EvalResult test;
  std::vector<std::string> test_ids;
  std::string checkpoint_path;
  std::string config_echo;
  /// Set when any frozen text tensor ended a step holding a gradient.
  bool text_gradient_seen = false;

  std::string to_json() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  std::ostream* log = nullptr;
  const TextSource* text = nullptr;  // default: TextSource::from_config
  const aug::Lexicon* lexicon = nullptr;
};

struct TrainResult {
  RunRecord record;
  Checkpoint best;
};

/// One training run on fold `fold` of the Monte Carlo split. Every epoch
/// shuffles the training indices, augments, steps AdamW per batch and scores
/// validation Dice; the checkpoint with the best validation Dice (earliest on
/// ties) is kept and scored on the test indices. A non-finite loss raises
/// NumericError with epoch and step. With an output directory, writes
/// best.ctxn, runrecord.json and config.json there.
TrainResult train(const TrainConfig& config, std::span<const data::Sample> dataset, std::size_t fold = 0,
                  const TrainOptions& options = {});

struct CrossValidation {
  std::vector<RunRecord> records;
  double mean = 0.0;  // of per-fold test means
  double sd = 0.0;    // population SD across folds
  double median = 0.0;
  double ambiguous_median = 0.0;
};

/// One train per fold (config.fold_count()); outputs go to out_dir/fold{k}.
CrossValidation cross_validate(const TrainConfig& config, std::span<const data::Sample> dataset,
                               const TrainOptions& options = {});

struct AblationArm {
  Ablation arm;
  CrossValidation cv;
  double delta_vs_full = 0.0;  // median test Dice minus the full arm's
};

struct AblationTable {
  std::vector<AblationArm> arms;

  /// Columns arm,fold,dice,sd; one row per arm and fold.
  std::string to_csv() const;
};

/// Runs the arms {full, no_text, flip, baseline_unet} (or `arms` when
/// given) on shared folds and init seeds, up to `jobs` arms at a time.
/// Outputs go to out_dir/{arm}/fold{k}.
AblationTable ablate(const TrainConfig& base, std::span<const data::Sample> dataset, const TrainOptions& options = {},
                     std::size_t jobs = 1, std::vector<Ablation> arms = {});

/// Loads config.data.dir when set, otherwise generates config.data.n
/// samples in memory.
std::vector<data::Sample> load_or_generate(const TrainConfig& config);

/// 64-bit central-difference check of the configured model's loss on the
/// first (up to two) samples, over `parameters` randomly drawn entries.
GradCheckReport verify_gradients(const TrainConfig& config, std::span<const data::Sample> samples,
                                 std::size_t parameters = 50, std::uint64_t seed = 0);

// Probes ----------------------------------------------------------------

using WordSwap = std::pair<std::string, std::string>;

/// Applies all swaps simultaneously to whole words (case-insensitive match,
/// leading capital kept). Returns the text unchanged when nothing matches.
std::string swap_words(const std::string& text, std::span<const WordSwap> swaps, bool* changed = nullptr);

struct SwapOutcome {
  std::string id;
  bool applied = false;  // a swap word occurred in the report
  double dice_original = 0.0;
  data::Side side_before = data::Side::none, side_after = data::Side::none;
  std::size_t area_before = 0, area_after = 0;
  double iou = 1.0;
};

struct ProbeReport {
  std::vector<SwapOutcome> outcomes;
  std::size_t applied = 0;
  double flip_rate_pct = 0.0;    // side changes among applied samples with non-empty predictions
  double area_ratio_pct = 0.0;   // 100 · Σ area_after / Σ area_before over applied samples
  double mean_area_ratio = 0.0;  // mean per-sample area_after / area_before (area_before > 0)
  double mean_iou = 0.0;

  std::string to_json() const;
};

/// Predicts each sample with its original and swapped report. Throws
/// std::invalid_argument when no swap word occurs in any report.
ProbeReport word_swap_probe(nn::Network<float>& net, std::span<const data::Sample> samples,
                            std::span<const WordSwap> swaps, const TextSource& text, double threshold = 0.5);

/// Recomputes flip rate and area ratios over the outcomes accepted by `keep`.
ProbeReport summarize_probe(std::vector<SwapOutcome> outcomes, const std::function<bool(const SwapOutcome&)>& keep);

struct DumpedMap {
  std::filesystem::path file;
  std::size_t level = 0;
  std::string kind;    // query, gate or gated
  std::string report;  // original or swapped
  double min = 0.0, max = 0.0;
};

struct AttentionDump {
  std::vector<DumpedMap> maps;
  /// Per level, mean |tanh(A)_original − tanh(A)_swapped| over the whole map.
  std::vector<double> gate_difference;
};

/// Writes level{i}_{query,gate,gated}_{original,swapped}.pgm for channel
/// `channel` of every decoder level, each min-max normalized to 16 bits,
/// plus scales.txt with the raw range of each image.
AttentionDump attention_dump(nn::Network<float>& net, const data::Sample& sample, const std::string& swapped_report,
                             const std::filesystem::path& out_dir, const TextSource& text, std::size_t channel = 0);

}  // namespace ctxn
