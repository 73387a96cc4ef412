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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ctxn/errors.hpp"
#include "ctxn/pgm.hpp"
#include "ctxn/train.hpp"

namespace ctxn {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

data::Side predicted_side(std::span<const std::uint8_t> mask, std::size_t size) {
  const double col = data::mask_centroid_column(mask, size);
  return col < 0 ? data::Side::none : data::side_of_column(col, size);
}

}  // namespace

std::string swap_words(const std::string& text, std::span<const WordSwap> swaps, bool* changed) {
  std::string out;
  out.reserve(text.size());
  bool any = false;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    const std::string word = text.substr(i, j - i);
    const std::string key = lower(word);
    auto it = std::find_if(swaps.begin(), swaps.end(), [&](const WordSwap& s) { return lower(s.first) == key; });
    if (it == swaps.end()) {
      out += word;
    } else {
      std::string replacement = it->second;
      if (std::isupper(static_cast<unsigned char>(word[0])) && !replacement.empty()) {
        replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
      }
      out += replacement;
      any = true;
    }
    i = j;
  }
  if (changed) *changed = any;
  return out;
}

ProbeReport summarize_probe(std::vector<SwapOutcome> outcomes, const std::function<bool(const SwapOutcome&)>& keep) {
  ProbeReport report;
  std::size_t flips = 0, sided = 0, ratio_n = 0;
  double before_sum = 0, after_sum = 0, ratio_sum = 0, iou_sum = 0;
  for (const auto& o : outcomes) {
    if (!keep(o)) continue;
    ++report.applied;
    iou_sum += o.iou;
    before_sum += static_cast<double>(o.area_before);
    after_sum += static_cast<double>(o.area_after);
    if (o.area_before > 0) {
      ++sided;
      if (o.side_after != data::Side::none && o.side_after != o.side_before) ++flips;
      ratio_sum += static_cast<double>(o.area_after) / static_cast<double>(o.area_before);
      ++ratio_n;
    }
  }
  report.flip_rate_pct = sided ? 100.0 * static_cast<double>(flips) / static_cast<double>(sided) : 0.0;
  report.area_ratio_pct = before_sum > 0 ? 100.0 * after_sum / before_sum : 0.0;
  report.mean_area_ratio = ratio_n ? ratio_sum / static_cast<double>(ratio_n) : 0.0;
  report.mean_iou = report.applied ? iou_sum / static_cast<double>(report.applied) : 0.0;
  report.outcomes = std::move(outcomes);
  return report;
}

ProbeReport word_swap_probe(nn::Network<float>& net, std::span<const data::Sample> samples,
                            std::span<const WordSwap> swaps, const TextSource& text, double threshold) {
  std::vector<SwapOutcome> outcomes;
  bool any = false;
  const std::size_t size = net.config().image_size;
  for (const auto& sample : samples) {
    SwapOutcome o;
    o.id = sample.id;
    const std::string swapped = swap_words(sample.report, swaps, &o.applied);
    any = any || o.applied;
    const auto before = nn::predict_mask<float>(predict_logits(net, sample, text.embed_text(sample.report)), threshold);
    const auto after = o.applied
                           ? nn::predict_mask<float>(predict_logits(net, sample, text.embed_text(swapped)), threshold)
                           : before;
    o.dice_original = data::dice(before, sample.mask);
    o.area_before = data::mask_area(before);
    o.area_after = data::mask_area(after);
    o.side_before = predicted_side(before, size);
    o.side_after = predicted_side(after, size);
    o.iou = iou(before, after);
    outcomes.push_back(std::move(o));
  }
  if (!any) throw std::invalid_argument("word_swap_probe: no swap word occurs in any report");
  return summarize_probe(std::move(outcomes), [](const SwapOutcome& o) { return o.applied; });
}

std::string ProbeReport::to_json() const {
  nlohmann::json j;
  j["applied"] = applied;
  j["flip_rate_pct"] = flip_rate_pct;
  j["area_ratio_pct"] = area_ratio_pct;
  j["mean_area_ratio_pct"] = 100.0 * mean_area_ratio;
  j["mean_iou"] = mean_iou;
  auto rows = nlohmann::json::array();
  for (const auto& o : outcomes) {
    rows.push_back({{"id", o.id},
                    {"applied", o.applied},
                    {"dice_original", o.dice_original},
                    {"side_before", std::string(data::to_string(o.side_before))},
                    {"side_after", std::string(data::to_string(o.side_after))},
                    {"area_before", o.area_before},
                    {"area_after", o.area_after},
                    {"iou", o.iou}});
  }
  j["samples"] = rows;
  return j.dump(2) + "\n";
}

AttentionDump attention_dump(nn::Network<float>& net, const data::Sample& sample, const std::string& swapped_report,
                             const std::filesystem::path& out_dir, const TextSource& text, std::size_t channel) {
  if (net.config().arch != nn::Architecture::contextual) {
    throw std::invalid_argument("attention_dump: model has no cross-attention");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  nn::AttentionTrace<float> traces[2];
  predict_logits(net, sample, text.embed_text(sample.report), &traces[0]);
  predict_logits(net, sample, text.embed_text(swapped_report), &traces[1]);
  const char* report_names[2] = {"original", "swapped"};

  AttentionDump dump;
  dump.gate_difference.assign(net.config().depth, 0.0);
  std::string scales;
  for (int r = 0; r < 2; ++r) {
    for (const auto& lvl : traces[r].levels) {
      const std::pair<const char*, const Tensor<float>*> kinds[3] = {
          {"query", &lvl.query}, {"gate", &lvl.gate}, {"gated", &lvl.gated}};
      for (const auto& [kind, tensor] : kinds) {
        const std::size_t c = tensor->dim(1), h = tensor->dim(2), w = tensor->dim(3);
        const std::size_t ch = std::min(channel, c - 1);
        const auto plane = tensor->data().subspan(ch * h * w, h * w);
        const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
        DumpedMap map;
        map.level = lvl.level;
        map.kind = kind;
        map.report = report_names[r];
        map.min = *lo;
        map.max = *hi;
        map.file = out_dir / ("level" + std::to_string(lvl.level) + "_" + kind + "_" + report_names[r] + ".pgm");
        data::PgmImage img{w, h, 65535, {}};
        const double range = map.max - map.min;
        for (float v : plane) {
          img.pixels.push_back(range > 0 ? static_cast<std::uint16_t>(std::lround((v - map.min) / range * 65535.0)) : 0);
        }
        data::write_pgm(img, map.file);
        char line[256];
        std::snprintf(line, sizeof line, "%s %.9g %.9g\n", map.file.filename().string().c_str(), map.min, map.max);
        scales += line;
        dump.maps.push_back(std::move(map));
      }
    }
  }
  for (const auto& a : traces[0].levels) {
    for (const auto& b : traces[1].levels) {
      if (a.level != b.level) continue;
      double diff = 0;
      const auto ga = a.gate.data(), gb = b.gate.data();
      for (std::size_t i = 0; i < ga.size(); ++i) diff += std::abs(static_cast<double>(ga[i]) - gb[i]);
      dump.gate_difference[a.level - 1] = diff / static_cast<double>(ga.size());
    }
  }
  std::ofstream out(out_dir / "scales.txt", std::ios::trunc);
  if (!out) throw IoError("cannot write scales.txt in '" + out_dir.string() + "'");
  out << "# file min max\n" << scales;
  return dump;
}

}  // namespace ctxn
