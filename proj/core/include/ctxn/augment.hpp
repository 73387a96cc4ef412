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
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxn/data.hpp"
#include "ctxn/rng.hpp"

namespace ctxn::aug {

enum class Photometric { contrast, gamma, brightness };
enum class Warp { elastic, grid, optical, ssr };

/// Probabilities and magnitude bounds. Defaults keep every transform
/// left/right preserving; p_hflip is nonzero only for the flip ablation.
struct AugmentPolicy {
  double p_hflip = 0.0;
  double p_photometric = 0.3;
  double p_distort = 0.3;
  double p_ssr = 0.5;
  bool text_shuffle = false;
  double text_synonym_p = 0.0;

  double brightness_limit = 0.2;  // δ ∈ [−limit, limit]
  double contrast_min = 0.8, contrast_max = 1.2;
  double gamma_min = 0.8, gamma_max = 1.25;
  double elastic_alpha = 34.0;  // pixels per unit of smoothed noise
  double elastic_sigma = 4.0;
  std::size_t grid_steps = 5;
  double grid_limit = 0.2;      // node jitter as a fraction of a cell
  double optical_limit = 0.05;  // |k|
  double shift_limit = 0.06;    // fraction of width
  double scale_min = 0.9, scale_max = 1.1;
  double rotate_limit_deg = 10.0;
  double max_mask_loss = 0.25;

  void validate() const;
};

/// Thrown when a warp pushes too much of the mask out of frame. Retriable
/// with a different seed.
class AugmentRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mirrors image and mask about the vertical axis. The report is left
/// untouched, so this breaks image-text concordance on purpose.
data::Sample hflip(const data::Sample& sample);

/// brightness: clamp(x + δ); contrast: clamp(μ + α(x − μ)) with μ the image
/// mean; gamma: x^γ. Throws std::invalid_argument when the magnitude is
/// outside the policy bounds.
std::vector<float> photometric(std::span<const float> image, Photometric kind, double magnitude,
                               const AugmentPolicy& bounds = {});

struct WarpParams {
  Warp kind = Warp::ssr;
  double alpha = 0.0;  // elastic
  double sigma = 4.0;  // elastic
  std::size_t grid_steps = 5;
  double grid_limit = 0.0;
  double k = 0.0;  // optical: r' = r(1 + k r²), r normalized by half-size
  double shift_x = 0.0, shift_y = 0.0;  // ssr, fractions of width
  double scale = 1.0;
  double rotation_deg = 0.0;

  bool is_identity() const;
};

/// Draws warp parameters uniformly within the policy bounds.
WarpParams draw_warp(Warp kind, const AugmentPolicy& policy, Rng& rng);

/// Warps image (bilinear, edge-clamped) and mask (nearest neighbor, zero
/// outside) with the same map. Elastic fields and grid jitter come from
/// `rng`. Throws AugmentRejected when more than policy.max_mask_loss of the
/// mask leaves the frame.
data::Sample geometric_distort(const data::Sample& sample, const WarpParams& params, Rng& rng,
                               const AugmentPolicy& bounds = {});

/// Splits after '.', '!' and '?', shuffles uniformly, rejoins with single
/// spaces.
std::vector<std::string> split_sentences(const std::string& text);
std::string sentence_shuffle(const std::string& text, Rng& rng);

/// Term → synonyms; keys are lowercase.
using Lexicon = std::map<std::string, std::vector<std::string>>;

Lexicon parse_lexicon(const std::string& json_text);
Lexicon load_lexicon(const std::filesystem::path& path);
/// Small built-in radiology lexicon used when no file is given.
const Lexicon& default_lexicon();

struct SynonymStats {
  std::size_t candidates = 0;
  std::size_t replaced = 0;
};

/// Every whitespace token whose lowercase, punctuation-trimmed form is a
/// lexicon key is replaced with probability p by a uniformly chosen synonym;
/// surrounding punctuation and a leading capital are kept.
std::string synonym_replace(const std::string& text, const Lexicon& lexicon, double p, Rng& rng,
                            SynonymStats* stats = nullptr);

/// Per-sample augmentation seed, independent of iteration order.
std::uint64_t augment_seed(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t sample_index);

/// Full recipe, in order: hflip (p_hflip); one of contrast/gamma/brightness
/// (p_photometric); one of elastic/grid/optical (p_distort); ssr (p_ssr);
/// then sentence shuffle and synonym replacement per policy. A rejected
/// warp is retried once with a derived seed, after which the sample passes
/// through unaugmented.
data::Sample augment_sample(const data::Sample& sample, const AugmentPolicy& policy, std::uint64_t seed,
                            const Lexicon* lexicon = nullptr);

}  // namespace ctxn::aug
