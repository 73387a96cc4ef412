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

#include "ctxn/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxn/errors.hpp"

namespace ctxn::aug {

void AugmentPolicy::validate() const {
  for (double p : {p_hflip, p_photometric, p_distort, p_ssr, text_synonym_p}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augment probabilities must lie in [0, 1]");
  }
  if (brightness_limit < 0 || contrast_min > contrast_max || gamma_min > gamma_max || gamma_min <= 0 ||
      elastic_alpha < 0 || elastic_sigma <= 0 || grid_steps < 1 || grid_limit < 0 || grid_limit >= 0.5 ||
      optical_limit < 0 || shift_limit < 0 || scale_min <= 0 || scale_min > scale_max || rotate_limit_deg < 0 ||
      max_mask_loss < 0 || max_mask_loss > 1) {
    throw ConfigError("augment magnitude bounds are inconsistent");
  }
}

data::Sample hflip(const data::Sample& sample) {
  data::Sample out = sample;
  const std::size_t n = sample.size;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      out.image[y * n + x] = sample.image[y * n + (n - 1 - x)];
      out.mask[y * n + x] = sample.mask[y * n + (n - 1 - x)];
    }
  }
  return out;
}

std::vector<float> photometric(std::span<const float> image, Photometric kind, double magnitude,
                               const AugmentPolicy& bounds) {
  auto check = [&](double lo, double hi, const char* what) {
    if (!(magnitude >= lo && magnitude <= hi)) {
      throw std::invalid_argument(std::string("photometric: ") + what + " " + std::to_string(magnitude) +
                                  " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  };
  std::vector<float> out(image.begin(), image.end());
  switch (kind) {
    case Photometric::brightness: {
      check(-bounds.brightness_limit, bounds.brightness_limit, "brightness delta");
      if (magnitude == 0.0) return out;
      for (auto& v : out) v = static_cast<float>(std::clamp(v + magnitude, 0.0, 1.0));
      break;
    }
    case Photometric::contrast: {
      check(bounds.contrast_min, bounds.contrast_max, "contrast factor");
      if (magnitude == 1.0) return out;
      double mu = 0;
      for (float v : image) mu += v;
      mu /= static_cast<double>(std::max<std::size_t>(1, image.size()));
      for (auto& v : out) v = static_cast<float>(std::clamp(mu + magnitude * (v - mu), 0.0, 1.0));
      break;
    }
    case Photometric::gamma: {
      check(bounds.gamma_min, bounds.gamma_max, "gamma");
      if (magnitude == 1.0) return out;
      for (auto& v : out) v = static_cast<float>(std::clamp(std::pow(static_cast<double>(v), magnitude), 0.0, 1.0));
      break;
    }
  }
  return out;
}

bool WarpParams::is_identity() const {
  switch (kind) {
    case Warp::elastic: return alpha == 0.0;
    case Warp::grid: return grid_limit == 0.0;
    case Warp::optical: return k == 0.0;
    case Warp::ssr: return shift_x == 0.0 && shift_y == 0.0 && scale == 1.0 && rotation_deg == 0.0;
  }
  return false;
}

WarpParams draw_warp(Warp kind, const AugmentPolicy& policy, Rng& rng) {
  WarpParams p;
  p.kind = kind;
  switch (kind) {
    case Warp::elastic:
      p.alpha = policy.elastic_alpha;
      p.sigma = policy.elastic_sigma;
      break;
    case Warp::grid:
      p.grid_steps = policy.grid_steps;
      p.grid_limit = policy.grid_limit;
      break;
    case Warp::optical:
      p.k = uniform(rng, -policy.optical_limit, policy.optical_limit);
      break;
    case Warp::ssr:
      p.shift_x = uniform(rng, -policy.shift_limit, policy.shift_limit);
      p.shift_y = uniform(rng, -policy.shift_limit, policy.shift_limit);
      p.scale = uniform(rng, policy.scale_min, policy.scale_max);
      p.rotation_deg = uniform(rng, -policy.rotate_limit_deg, policy.rotate_limit_deg);
      break;
  }
  return p;
}

namespace {

// Separable Gaussian blur with reflected borders.
std::vector<double> gaussian_blur(const std::vector<double>& in, std::size_t n, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= total;
  const int size = static_cast<int>(n);
  auto reflect = [size](int i) {
    while (i < 0 || i >= size) i = i < 0 ? -i - 1 : 2 * size - i - 1;
    return i;
  };
  std::vector<double> tmp(in.size()), out(in.size());
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double s = 0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * in[y * size + reflect(x + k)];
      tmp[y * size + x] = s;
    }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double s = 0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp[reflect(y + k) * size + x];
      out[y * size + x] = s;
    }
  return out;
}

// Piecewise-linear displacement along one axis from jittered lattice nodes;
// border nodes stay fixed.
std::vector<double> grid_axis(std::size_t n, std::size_t steps, double limit, Rng& rng) {
  const double cell = static_cast<double>(n) / static_cast<double>(steps);
  std::vector<double> node(steps + 1, 0.0);
  for (std::size_t i = 1; i < steps; ++i) node[i] = uniform(rng, -limit, limit) * cell;
  std::vector<double> disp(n);
  for (std::size_t x = 0; x < n; ++x) {
    const double g = (static_cast<double>(x) + 0.5) / cell;
    const auto i = std::min(static_cast<std::size_t>(g), steps - 1);
    const double f = g - static_cast<double>(i);
    disp[x] = (1 - f) * node[i] + f * node[i + 1];
  }
  return disp;
}

}  // namespace

data::Sample geometric_distort(const data::Sample& sample, const WarpParams& params, Rng& rng,
                               const AugmentPolicy& bounds) {
  const double eps = 1e-12;
  switch (params.kind) {
    case Warp::elastic:
      if (params.alpha < 0 || params.alpha > bounds.elastic_alpha + eps || params.sigma <= 0)
        throw std::invalid_argument("geometric_distort: elastic parameters out of bounds");
      break;
    case Warp::grid:
      if (params.grid_steps < 1 || params.grid_limit < 0 || params.grid_limit > bounds.grid_limit + eps)
        throw std::invalid_argument("geometric_distort: grid parameters out of bounds");
      break;
    case Warp::optical:
      if (std::abs(params.k) > bounds.optical_limit + eps)
        throw std::invalid_argument("geometric_distort: optical k out of bounds");
      break;
    case Warp::ssr:
      if (std::abs(params.shift_x) > bounds.shift_limit + eps || std::abs(params.shift_y) > bounds.shift_limit + eps ||
          params.scale < bounds.scale_min - eps || params.scale > bounds.scale_max + eps ||
          std::abs(params.rotation_deg) > bounds.rotate_limit_deg + eps)
        throw std::invalid_argument("geometric_distort: shift/scale/rotate parameters out of bounds");
      break;
  }
  if (params.is_identity()) return sample;

  const std::size_t n = sample.size;
  const double s = static_cast<double>(n);
  const double c = s / 2.0;
  // Source position (pixel-center coordinates) for each output pixel.
  std::vector<double> sx(n * n), sy(n * n);
  std::vector<double> dxf, dyf, gx, gy;
  if (params.kind == Warp::elastic) {
    std::vector<double> rx(n * n), ry(n * n);
    for (auto& v : rx) v = uniform(rng, -1.0, 1.0);
    for (auto& v : ry) v = uniform(rng, -1.0, 1.0);
    dxf = gaussian_blur(rx, n, params.sigma);
    dyf = gaussian_blur(ry, n, params.sigma);
  } else if (params.kind == Warp::grid) {
    gx = grid_axis(n, params.grid_steps, params.grid_limit, rng);
    gy = grid_axis(n, params.grid_steps, params.grid_limit, rng);
  }
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t i = y * n + x;
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      switch (params.kind) {
        case Warp::elastic:
          sx[i] = px + params.alpha * dxf[i];
          sy[i] = py + params.alpha * dyf[i];
          break;
        case Warp::grid:
          sx[i] = px + gx[x];
          sy[i] = py + gy[y];
          break;
        case Warp::optical: {
          const double ux = (px - c) / c, uy = (py - c) / c;
          const double factor = 1.0 + params.k * (ux * ux + uy * uy);
          sx[i] = c + ux * factor * c;
          sy[i] = c + uy * factor * c;
          break;
        }
        case Warp::ssr: {
          // Inverse of: rotate by θ, scale, then shift.
          const double qx = px - c - params.shift_x * s, qy = py - c - params.shift_y * s;
          sx[i] = c + (cs * qx + sn * qy) / params.scale;
          sy[i] = c + (-sn * qx + cs * qy) / params.scale;
          break;
        }
      }
    }
  }

  data::Sample out = sample;
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  auto clamp_idx = [last](std::ptrdiff_t v) { return std::clamp<std::ptrdiff_t>(v, 0, last); };
  for (std::size_t i = 0; i < n * n; ++i) {
    // Back to array coordinates.
    const double ax = sx[i] - 0.5, ay = sy[i] - 0.5;
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(ax));
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(ay));
    const double fx = ax - static_cast<double>(x0), fy = ay - static_cast<double>(y0);
    auto at = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) {
      return static_cast<double>(sample.image[clamp_idx(yy) * static_cast<std::ptrdiff_t>(n) + clamp_idx(xx)]);
    };
    const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                     fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
    out.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));

    const auto nx = static_cast<std::ptrdiff_t>(std::floor(sx[i]));
    const auto ny = static_cast<std::ptrdiff_t>(std::floor(sy[i]));
    out.mask[i] = (nx < 0 || ny < 0 || nx > last || ny > last) ? 0 : sample.mask[ny * static_cast<std::ptrdiff_t>(n) + nx];
  }

  const auto before = data::mask_area(sample.mask);
  const auto after = data::mask_area(out.mask);
  if (before > 0 && static_cast<double>(after) < (1.0 - bounds.max_mask_loss) * static_cast<double>(before)) {
    throw AugmentRejected("geometric_distort: warp removed " + std::to_string(before - after) + " of " +
                          std::to_string(before) + " mask pixels");
  }
  return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  auto flush = [&] {
    const auto b = current.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
      const auto e = current.find_last_not_of(" \t\r\n");
      sentences.push_back(current.substr(b, e - b + 1));
    }
    current.clear();
  };
  for (char ch : text) {
    current.push_back(ch);
    if (ch == '.' || ch == '!' || ch == '?') flush();
  }
  flush();
  return sentences;
}

std::string sentence_shuffle(const std::string& text, Rng& rng) {
  auto sentences = split_sentences(text);
  for (std::size_t i = sentences.size(); i > 1; --i) std::swap(sentences[i - 1], sentences[uniform_index(rng, i)]);
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += ' ';
    out += sentences[i];
  }
  return out;
}

Lexicon parse_lexicon(const std::string& json_text) {
  Lexicon lexicon;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("lexicon: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw FormatError("lexicon: top level must be an object", 0);
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string key = it.key();
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (!it.value().is_array()) throw FormatError("lexicon: entry '" + it.key() + "' must be an array", 0);
    std::vector<std::string> synonyms;
    for (const auto& s : it.value()) {
      if (!s.is_string()) throw FormatError("lexicon: entry '" + it.key() + "' holds a non-string", 0);
      synonyms.push_back(s.get<std::string>());
    }
    if (!synonyms.empty()) lexicon[key] = std::move(synonyms);
  }
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_lexicon(buffer.str());
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon{
      {"pneumothorax", {"ptx"}},
      {"large", {"big", "sizable"}},
      {"small", {"tiny", "minimal"}},
      {"apical", {"apex"}},
      {"basal", {"basilar"}},
      {"normal", {"unremarkable"}},
      {"effusion", {"fluid"}},
  };
  return lexicon;
}

std::string synonym_replace(const std::string& text, const Lexicon& lexicon, double p, Rng& rng,
                            SynonymStats* stats) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("synonym_replace: p must lie in [0, 1]");
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    const std::string token = text.substr(i, j - i);
    i = j;

    std::size_t b = 0, e = token.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(token[e - 1]))) --e;
    std::string core = token.substr(b, e - b);
    std::transform(core.begin(), core.end(), core.begin(), [](unsigned char ch) { return std::tolower(ch); });
    auto it = core.empty() ? lexicon.end() : lexicon.find(core);
    if (it == lexicon.end()) {
      out += token;
      continue;
    }
    if (stats) ++stats->candidates;
    if (bernoulli(rng, p)) {
      if (stats) ++stats->replaced;
      std::string choice = it->second[uniform_index(rng, it->second.size())];
      if (std::isupper(static_cast<unsigned char>(token[b])) && !choice.empty()) {
        choice[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(choice[0])));
      }
      out += token.substr(0, b) + choice + token.substr(e);
    } else {
      out += token;
    }
  }
  return out;
}

std::uint64_t augment_seed(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t sample_index) {
  return derive_seed({global_seed, epoch, sample_index});
}

namespace {

data::Sample augment_once(const data::Sample& sample, const AugmentPolicy& policy, std::uint64_t seed,
                          const Lexicon* lexicon) {
  Rng rng(seed);
  data::Sample out = sample;
  if (bernoulli(rng, policy.p_hflip)) out = hflip(out);
  if (bernoulli(rng, policy.p_photometric)) {
    const auto kind = static_cast<Photometric>(uniform_index(rng, 3));
    double magnitude = 0;
    switch (kind) {
      case Photometric::contrast: magnitude = uniform(rng, policy.contrast_min, policy.contrast_max); break;
      case Photometric::gamma: magnitude = uniform(rng, policy.gamma_min, policy.gamma_max); break;
      case Photometric::brightness: magnitude = uniform(rng, -policy.brightness_limit, policy.brightness_limit); break;
    }
    out.image = photometric(out.image, kind, magnitude, policy);
  }
  if (bernoulli(rng, policy.p_distort)) {
    const auto kind = static_cast<Warp>(uniform_index(rng, 3));  // elastic, grid, optical
    const auto params = draw_warp(kind, policy, rng);
    out = geometric_distort(out, params, rng, policy);
  }
  if (bernoulli(rng, policy.p_ssr)) {
    const auto params = draw_warp(Warp::ssr, policy, rng);
    out = geometric_distort(out, params, rng, policy);
  }
  if (policy.text_shuffle) out.report = sentence_shuffle(out.report, rng);
  if (policy.text_synonym_p > 0) {
    out.report = synonym_replace(out.report, lexicon ? *lexicon : default_lexicon(), policy.text_synonym_p, rng);
  }
  return out;
}

}  // namespace

data::Sample augment_sample(const data::Sample& sample, const AugmentPolicy& policy, std::uint64_t seed,
                            const Lexicon* lexicon) {
  try {
    return augment_once(sample, policy, seed, lexicon);
  } catch (const AugmentRejected&) {
  }
  try {
    return augment_once(sample, policy, derive_seed({seed, 1}), lexicon);
  } catch (const AugmentRejected&) {
  }
  return sample;
}

}  // namespace ctxn::aug
