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

#include "ctxn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxn/errors.hpp"
#include "ctxn/pgm.hpp"
#include "ctxn/rng.hpp"
#include "ctxn/textenc.hpp"

namespace ctxn::data {

std::string_view to_string(Side side) {
  switch (side) {
    case Side::left: return "left";
    case Side::right: return "right";
    default: return "none";
  }
}

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::apical: return "apical";
    case Zone::basal: return "basal";
    default: return "none";
  }
}

std::string_view to_string(Extent size) {
  switch (size) {
    case Extent::small: return "small";
    case Extent::large: return "large";
    default: return "none";
  }
}

Side parse_side(std::string_view s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  if (s == "none") return Side::none;
  throw std::invalid_argument("unknown side '" + std::string(s) + "'");
}

Zone parse_zone(std::string_view s) {
  if (s == "apical") return Zone::apical;
  if (s == "basal") return Zone::basal;
  if (s == "none") return Zone::none;
  throw std::invalid_argument("unknown zone '" + std::string(s) + "'");
}

Extent parse_extent(std::string_view s) {
  if (s == "small") return Extent::small;
  if (s == "large") return Extent::large;
  if (s == "none") return Extent::none;
  throw std::invalid_argument("unknown size '" + std::string(s) + "'");
}

Side side_of_column(double column, std::size_t image_size) {
  return column >= static_cast<double>(image_size) / 2.0 ? Side::left : Side::right;
}

namespace {

constexpr const char* kDistractors[] = {
    "Heart size is normal.",       "No rib fracture.",
    "No pleural effusion.",        "The mediastinum is unremarkable.",
    "Lines and tubes are unchanged.", "No focal consolidation.",
    "The osseous structures are intact.", "Cardiomediastinal silhouette is stable.",
};

// Bilinear upsampling of a coarse random lattice: smooth noise in [-1, 1].
std::vector<double> smooth_noise(Rng& rng, std::size_t size, std::size_t cells) {
  std::vector<double> grid((cells + 1) * (cells + 1));
  for (auto& g : grid) g = uniform(rng, -1.0, 1.0);
  std::vector<double> out(size * size);
  const double step = static_cast<double>(cells) / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    const double gy = (static_cast<double>(y) + 0.5) * step;
    const auto y0 = std::min(static_cast<std::size_t>(gy), cells - 1);
    const double fy = gy - static_cast<double>(y0);
    for (std::size_t x = 0; x < size; ++x) {
      const double gx = (static_cast<double>(x) + 0.5) * step;
      const auto x0 = std::min(static_cast<std::size_t>(gx), cells - 1);
      const double fx = gx - static_cast<double>(x0);
      auto at = [&](std::size_t yy, std::size_t xx) { return grid[yy * (cells + 1) + xx]; };
      out[y * size + x] = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                          fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
    }
  }
  return out;
}

double gaussian(Rng& rng) {
  const double u1 = 1.0 - to_unit(rng());
  const double u2 = to_unit(rng());
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct Lung {
  double cx, cy, rx, ry;
  double lateral;  // -1 when the chest wall is toward column 0
};

// Crescent hugging the lateral wall, thickest toward the zone's corner and
// tapering to nothing 70° away from it.
bool in_crescent(const Lung& lung, Zone zone, double thickness, double px, double py) {
  const double dx = (px - lung.cx) / lung.rx;
  const double dy = (py - lung.cy) / lung.ry;
  const double r = std::hypot(dx, dy);
  if (r > 1.0 || r == 0.0) return false;
  const double vy = zone == Zone::apical ? -0.66 : 0.66;
  const double vx = lung.lateral * 0.75;
  const double vn = std::hypot(vx, vy);
  const double cosang = (dx * vx + dy * vy) / (r * vn);
  const double cutoff = std::cos(70.0 * std::numbers::pi / 180.0);
  if (cosang <= cutoff) return false;
  const double profile = std::pow((cosang - cutoff) / (1.0 - cutoff), 0.7);
  return r >= 1.0 - thickness * profile;
}

bool in_lung(const Lung& lung, double px, double py) {
  const double dx = (px - lung.cx) / lung.rx;
  const double dy = (py - lung.cy) / lung.ry;
  return dx * dx + dy * dy <= 1.0;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

GeneratedSample render_sample(std::uint64_t seed, const GeneratorConfig& config, std::string id) {
  if (config.image_size < 32) throw std::invalid_argument("generate_sample: image_size must be >= 32");
  const std::size_t size = config.image_size;
  const double s = static_cast<double>(size);
  Rng rng(seed);

  Attributes attrs;
  attrs.present = bernoulli(rng, config.present_fraction);
  const bool ambiguous_draw = bernoulli(rng, config.ambiguous_fraction);
  const Side side = bernoulli(rng, 0.5) ? Side::left : Side::right;
  const Zone zone = bernoulli(rng, 0.5) ? Zone::apical : Zone::basal;
  const Extent extent = bernoulli(rng, 0.5) ? Extent::large : Extent::small;
  const double thickness = extent == Extent::large ? uniform(rng, 0.60, 0.72) : uniform(rng, 0.18, 0.24);
  if (attrs.present) {
    attrs.side = side;
    attrs.zone = zone;
    attrs.size = extent;
    attrs.ambiguous = ambiguous_draw;
  }

  // Mirror-symmetric lung pair; pixel centers sit at x + 0.5.
  const double offset = s * uniform(rng, 0.21, 0.23);
  const double cy = s * uniform(rng, 0.50, 0.54);
  const double rx = s * uniform(rng, 0.15, 0.17);
  const double ry = s * uniform(rng, 0.31, 0.33);
  const Lung image_left{s / 2 - offset, cy, rx, ry, -1.0};
  const Lung image_right{s / 2 + offset, cy, rx, ry, +1.0};
  const Lung& target = side == Side::left ? image_right : image_left;
  const Lung& other = side == Side::left ? image_left : image_right;

  const double gain = uniform(rng, 0.92, 1.08);
  const double body = 0.62, lung_level = 0.32, ptx_level = 0.10;
  const double decoy_level = lung_level + config.distractor_contrast * (ptx_level - lung_level);
  const auto background = smooth_noise(rng, size, 6);
  const auto markings = smooth_noise(rng, size, size / 4);

  GeneratedSample out;
  Sample& sample = out.sample;
  sample.id = std::move(id);
  sample.size = size;
  sample.seed = seed;
  sample.image.resize(size * size);
  sample.mask.assign(size * size, 0);
  out.decoy_mask.assign(size * size, 0);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const std::size_t i = y * size + x;
      double v = body + 0.06 * background[i];
      if (in_lung(image_left, px, py) || in_lung(image_right, px, py)) v = lung_level + 0.05 * markings[i];
      if (attrs.present && in_crescent(target, zone, thickness, px, py)) {
        v = ptx_level;
        sample.mask[i] = 1;
      } else if (attrs.ambiguous && in_crescent(other, zone, thickness, px, py)) {
        v = decoy_level;
        out.decoy_mask[i] = 1;
      }
      v = gain * v + 0.015 * gaussian(rng);
      sample.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  std::vector<std::string> sentences;
  if (attrs.present) {
    const std::string sz(to_string(extent)), sd(to_string(side)), zn(to_string(zone));
    switch (uniform_index(rng, 3)) {
      case 0: sentences.push_back("There is a " + sz + " " + sd + " " + zn + " pneumothorax."); break;
      case 1: sentences.push_back("A " + sz + " " + sd + " " + zn + " pneumothorax is present."); break;
      default: sentences.push_back(capitalize(sz) + " " + sd + " " + zn + " pneumothorax."); break;
    }
  } else {
    sentences.push_back(bernoulli(rng, 0.5) ? "No pneumothorax." : "There is no pneumothorax.");
  }
  std::vector<std::size_t> pool(std::size(kDistractors));
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  const std::size_t extra = 1 + uniform_index(rng, 3);
  for (std::size_t k = 0; k < extra; ++k) {
    const std::size_t j = k + uniform_index(rng, pool.size() - k);
    std::swap(pool[k], pool[j]);
    sentences.emplace_back(kDistractors[pool[k]]);
  }
  for (std::size_t i = sentences.size(); i > 1; --i) std::swap(sentences[i - 1], sentences[uniform_index(rng, i)]);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) sample.report += ' ';
    sample.report += sentences[i];
  }
  sample.attrs = attrs;
  return out;
}

Sample generate_sample(std::uint64_t seed, const GeneratorConfig& config, std::string id) {
  return render_sample(seed, config, std::move(id)).sample;
}

std::vector<Sample> generate_dataset(std::size_t n, std::uint64_t seed, const GeneratorConfig& config) {
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    samples.push_back(generate_sample(derive_seed({seed, i}), config, id));
  }
  return samples;
}

double mask_centroid_column(std::span<const std::uint8_t> mask, std::size_t size) {
  double total = 0, count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      total += static_cast<double>(i % size) + 0.5;
      count += 1;
    }
  }
  return count > 0 ? total / count : -1.0;
}

std::size_t mask_area(std::span<const std::uint8_t> mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto v) { return v != 0; }));
}

std::vector<std::string> check_sample(const Sample& sample) {
  std::vector<std::string> problems;
  const auto area = mask_area(sample.mask);
  if (sample.attrs.present != (area > 0)) problems.push_back("presence does not match mask");
  for (auto v : sample.mask)
    if (v > 1) {
      problems.push_back("mask is not binary");
      break;
    }
  for (float v : sample.image)
    if (!(v >= 0.0f && v <= 1.0f)) {
      problems.push_back("image value outside [0,1]");
      break;
    }

  const auto tokens = text::tokenize(sample.report, 4096).tokens;
  auto has = [&](std::string_view w) { return std::find(tokens.begin(), tokens.end(), w) != tokens.end(); };
  if (sample.attrs.present) {
    const double c = mask_centroid_column(sample.mask, sample.size);
    if (area > 0 && side_of_column(c, sample.size) != sample.attrs.side) problems.push_back("centroid on wrong side");
    for (auto w : {to_string(sample.attrs.side), to_string(sample.attrs.zone), to_string(sample.attrs.size)})
      if (!has(w)) problems.push_back("report lacks '" + std::string(w) + "'");
    const auto opposite = sample.attrs.side == Side::left ? "right" : "left";
    if (has(opposite)) problems.push_back("report mentions the opposite side");
    if (!has("pneumothorax")) problems.push_back("report lacks 'pneumothorax'");
  } else {
    if (!has("no") || !has("pneumothorax")) problems.push_back("negative report lacks 'no pneumothorax'");
    if (has("left") || has("right")) problems.push_back("negative report names a side");
  }
  return problems;
}

// --- dataset IO -------------------------------------------------------------

namespace {

using nlohmann::json;

json attrs_to_json(const Attributes& a) {
  return json{{"present", a.present},
              {"side", to_string(a.side)},
              {"zone", to_string(a.zone)},
              {"size", to_string(a.size)},
              {"ambiguous", a.ambiguous}};
}

Attributes attrs_from_json(const json& j) {
  Attributes a;
  a.present = j.at("present").get<bool>();
  a.side = parse_side(j.at("side").get<std::string>());
  a.zone = parse_zone(j.at("zone").get<std::string>());
  a.size = parse_extent(j.at("size").get<std::string>());
  a.ambiguous = j.at("ambiguous").get<bool>();
  return a;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

void write_dataset(std::span<const Sample> samples, const std::filesystem::path& dir, const GeneratorConfig* config) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  std::filesystem::create_directories(dir / "masks", ec);
  if (ec) throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());

  std::string manifest;
  for (const auto& s : samples) {
    if (s.id.empty()) throw std::invalid_argument("write_dataset: sample without id");
    const std::string image_rel = "images/" + s.id + ".pgm";
    const std::string mask_rel = "masks/" + s.id + ".pgm";
    PgmImage image{s.size, s.size, 65535, {}};
    image.pixels.reserve(s.image.size());
    for (float v : s.image) image.pixels.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0)));
    write_pgm(image, dir / image_rel);
    PgmImage mask{s.size, s.size, 255, {}};
    mask.pixels.reserve(s.mask.size());
    for (auto v : s.mask) mask.pixels.push_back(v ? 255 : 0);
    write_pgm(mask, dir / mask_rel);
    json line{{"id", s.id},         {"image", image_rel},
              {"mask", mask_rel},   {"report", s.report},
              {"attrs", attrs_to_json(s.attrs)}, {"seed", s.seed}};
    manifest += line.dump() + "\n";
  }
  write_text(dir / "manifest.jsonl", manifest);

  json meta{{"count", samples.size()}};
  if (config) {
    meta["generator"] = json{{"image_size", config->image_size},
                             {"ambiguous_fraction", config->ambiguous_fraction},
                             {"present_fraction", config->present_fraction},
                             {"distractor_contrast", config->distractor_contrast}};
  }
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

std::vector<Sample> read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open '" + manifest_path.string() + "'");
  std::vector<Sample> samples;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw FormatError(manifest_path.string() + ":" + std::to_string(line_no) + ": " + what, line_no);
    };
    Sample s;
    std::string image_rel, mask_rel;
    try {
      const json j = json::parse(line);
      s.id = j.at("id").get<std::string>();
      image_rel = j.at("image").get<std::string>();
      mask_rel = j.at("mask").get<std::string>();
      s.report = j.at("report").get<std::string>();
      s.attrs = attrs_from_json(j.at("attrs"));
      s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      fail(e.what());
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    PgmImage image, mask;
    try {
      image = read_pgm(dir / image_rel);
      mask = read_pgm(dir / mask_rel);
    } catch (const FormatError& e) {
      fail(e.what());
    }
    if (image.width != image.height) fail("image is not square");
    if (mask.width != image.width || mask.height != image.height) fail("mask and image extents differ");
    s.size = image.width;
    s.image.reserve(image.pixels.size());
    for (auto v : image.pixels) s.image.push_back(static_cast<float>(v) / static_cast<float>(image.maxval));
    s.mask.reserve(mask.pixels.size());
    for (auto v : mask.pixels) {
      if (v != 0 && v != mask.maxval) fail("mask pixel is neither 0 nor maxval");
      s.mask.push_back(v ? 1 : 0);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

// --- metric and splits ------------------------------------------------------

double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("dice: mask sizes differ (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()) + ")");
  }
  std::size_t both = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

void SplitSpec::validate() const {
  if (train <= 0 || val < 0 || test <= 0) throw ConfigError("split fractions must be positive (val may be 0)");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (fold_seeds.empty()) throw ConfigError("split.fold_seeds must not be empty");
}

std::vector<Fold> mc_split(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n < 10) throw std::invalid_argument("mc_split: need at least 10 samples, got " + std::to_string(n));
  const auto n_train = static_cast<std::size_t>(std::lround(spec.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::lround(spec.val * static_cast<double>(n)));
  if (n_train + n_val >= n) throw std::invalid_argument("mc_split: fractions leave no test samples");
  std::vector<Fold> folds;
  for (auto seed : spec.fold_seeds) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    Fold f;
    f.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    f.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    f.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace ctxn::data
