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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxn::data {

enum class Side { none, left, right };
enum class Zone { none, apical, basal };
enum class Extent { none, small, large };

std::string_view to_string(Side side);
std::string_view to_string(Zone zone);
std::string_view to_string(Extent size);
Side parse_side(std::string_view s);
Zone parse_zone(std::string_view s);
Extent parse_extent(std::string_view s);

/// Images follow the radiographic convention: the patient's left is shown
/// on the image's right half.
Side side_of_column(double column, std::size_t image_size);

struct Attributes {
  bool present = false;
  Side side = Side::none;
  Zone zone = Zone::none;
  Extent size = Extent::none;
  bool ambiguous = false;

  bool operator==(const Attributes&) const = default;
};

struct Sample {
  std::string id;
  std::size_t size = 0;          // image is size × size
  std::vector<float> image;      // values in [0, 1]
  std::vector<std::uint8_t> mask;  // 0 or 1
  std::string report;
  Attributes attrs;
  std::uint64_t seed = 0;
};

struct GeneratorConfig {
  std::size_t image_size = 64;
  double ambiguous_fraction = 0.75;
  double present_fraction = 1.0;
  /// Darkness of the decoy crescent relative to the real one (1 = identical).
  double distractor_contrast = 1.0;
};

struct GeneratedSample {
  Sample sample;
  std::vector<std::uint8_t> decoy_mask;  // empty-valued when not ambiguous
};

/// Renders one synthetic chest-film-like sample: two elliptical lung fields
/// on smooth correlated noise and, when present, a dark crescent along the
/// lateral wall of one lung at the given zone. In ambiguous mode a mirrored
/// copy of the crescent is drawn on the other lung but left out of the mask,
/// so only the report tells them apart.
GeneratedSample render_sample(std::uint64_t seed, const GeneratorConfig& config, std::string id = {});
Sample generate_sample(std::uint64_t seed, const GeneratorConfig& config, std::string id = {});

/// Sample i uses seed derive_seed({seed, i}) and id "s%05d".
std::vector<Sample> generate_dataset(std::size_t n, std::uint64_t seed, const GeneratorConfig& config);

/// Returns human-readable violations of the sample invariants
/// (presence↔mask, side↔centroid, report↔attributes); empty when sound.
std::vector<std::string> check_sample(const Sample& sample);

/// Mean column of the mask's foreground, or a negative value when empty.
double mask_centroid_column(std::span<const std::uint8_t> mask, std::size_t size);
std::size_t mask_area(std::span<const std::uint8_t> mask);

// Dataset directory: images/{id}.pgm (16-bit), masks/{id}.pgm (8-bit,
// {0,255}), manifest.jsonl, meta.json.

void write_dataset(std::span<const Sample> samples, const std::filesystem::path& dir,
                   const GeneratorConfig* config = nullptr);
std::vector<Sample> read_dataset(const std::filesystem::path& dir);

/// 2|A∩B| / (|A|+|B|); two empty masks score 1.
double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::vector<std::uint64_t> fold_seeds{11, 22, 33, 44, 55};

  void validate() const;
};

struct Fold {
  std::vector<std::size_t> train, val, test;
};

/// Monte Carlo cross-validation: one independent permutation per fold seed,
/// cut by the split fractions.
std::vector<Fold> mc_split(std::size_t n, const SplitSpec& spec);

}  // namespace ctxn::data
