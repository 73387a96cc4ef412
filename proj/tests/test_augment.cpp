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
#include <cmath>

#include <gtest/gtest.h>

#include "ctxn/augment.hpp"
#include "ctxn/errors.hpp"

using namespace ctxn;
using namespace ctxn::aug;

namespace {

data::Sample sample32(std::uint64_t seed = 5) {
  data::GeneratorConfig cfg;
  cfg.image_size = 32;
  return data::generate_sample(seed, cfg);
}

bool binary(const std::vector<std::uint8_t>& m) {
  return std::all_of(m.begin(), m.end(), [](std::uint8_t v) { return v <= 1; });
}

}  // namespace

TEST(Hflip, MirrorsAndInvolution) {
  auto s = sample32();
  auto f = hflip(s);
  const std::size_t n = s.size;
  EXPECT_EQ(f.image[3 * n + 0], s.image[3 * n + n - 1]);
  EXPECT_EQ(f.mask[7 * n + 2], s.mask[7 * n + n - 3]);
  EXPECT_EQ(f.report, s.report);
  auto back = hflip(f);
  EXPECT_EQ(back.image, s.image);
  EXPECT_EQ(back.mask, s.mask);
}

TEST(Photometric, ZeroMagnitudeIsExactIdentity) {
  auto s = sample32();
  EXPECT_EQ(photometric(s.image, Photometric::brightness, 0.0), s.image);
  EXPECT_EQ(photometric(s.image, Photometric::contrast, 1.0), s.image);
  EXPECT_EQ(photometric(s.image, Photometric::gamma, 1.0), s.image);
}

TEST(Photometric, KnownValuesAndBounds) {
  const std::vector<float> img{0.25f, 0.75f};
  auto b = photometric(img, Photometric::brightness, 0.1);
  EXPECT_FLOAT_EQ(b[0], 0.35f);
  auto c = photometric(img, Photometric::contrast, 1.2);
  EXPECT_FLOAT_EQ(c[0], 0.5f - 1.2f * 0.25f);
  auto g = photometric(img, Photometric::gamma, 1.25);
  EXPECT_NEAR(g[1], std::pow(0.75, 1.25), 1e-6);
  EXPECT_THROW(photometric(img, Photometric::brightness, 0.5), std::invalid_argument);
  EXPECT_THROW(photometric(img, Photometric::gamma, 2.0), std::invalid_argument);
}

TEST(Warp, IdentityParametersReturnInput) {
  auto s = sample32();
  Rng rng(1);
  for (auto kind : {Warp::elastic, Warp::grid, Warp::optical, Warp::ssr}) {
    WarpParams p;
    p.kind = kind;
    ASSERT_TRUE(p.is_identity());
    auto out = geometric_distort(s, p, rng);
    EXPECT_EQ(out.image, s.image);
    EXPECT_EQ(out.mask, s.mask);
  }
}

TEST(Warp, MasksStayBinaryAndImageInRange) {
  AugmentPolicy policy;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto s = sample32(seed);
    Rng rng(seed);
    for (auto kind : {Warp::elastic, Warp::grid, Warp::optical, Warp::ssr}) {
      auto p = draw_warp(kind, policy, rng);
      try {
        auto out = geometric_distort(s, p, rng, policy);
        EXPECT_TRUE(binary(out.mask));
        for (float v : out.image) ASSERT_TRUE(v >= 0.f && v <= 1.f);
      } catch (const AugmentRejected&) {
      }
    }
  }
}

TEST(Warp, ShiftMovesMaskAndRejectsLargeLoss) {
  auto s = sample32();
  Rng rng(0);
  WarpParams p;
  p.kind = Warp::ssr;
  p.shift_x = 2.0 / 32;
  AugmentPolicy loose;
  loose.shift_limit = 1.0;
  auto out = geometric_distort(s, p, rng, loose);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 2; x < 32; ++x) EXPECT_EQ(out.mask[y * 32 + x], s.mask[y * 32 + x - 2]);
  p.shift_x = s.attrs.side == data::Side::left ? 0.45 : -0.45;
  EXPECT_THROW(geometric_distort(s, p, rng, loose), AugmentRejected);
}

TEST(Warp, OutOfBoundsParametersRejected) {
  auto s = sample32();
  Rng rng(0);
  WarpParams p;
  p.kind = Warp::ssr;
  p.rotation_deg = 45;
  EXPECT_THROW(geometric_distort(s, p, rng), std::invalid_argument);
}

TEST(Augment, DisabledPolicyIsIdentity) {
  AugmentPolicy off;
  off.p_photometric = off.p_distort = off.p_ssr = 0;
  auto s = sample32();
  auto out = augment_sample(s, off, 123);
  EXPECT_EQ(out.image, s.image);
  EXPECT_EQ(out.mask, s.mask);
  EXPECT_EQ(out.report, s.report);
}

TEST(Augment, SeededAndBinary) {
  AugmentPolicy full;
  full.p_hflip = 0.5;
  full.p_photometric = full.p_distort = full.p_ssr = 1.0;
  full.text_shuffle = true;
  full.text_synonym_p = 0.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = sample32(seed);
    auto a = augment_sample(s, full, augment_seed(1, 2, seed));
    auto b = augment_sample(s, full, augment_seed(1, 2, seed));
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.report, b.report);
    EXPECT_TRUE(binary(a.mask));
  }
  EXPECT_NE(augment_seed(1, 2, 3), augment_seed(1, 3, 2));
}

TEST(Text, SentenceShufflePreservesMultiset) {
  const std::string report = "Small left apical pneumothorax. Heart size is normal. No rib fracture! Is it stable?";
  auto sentences = split_sentences(report);
  ASSERT_EQ(sentences.size(), 4u);
  std::sort(sentences.begin(), sentences.end());
  Rng rng(3);
  bool moved = false;
  for (int i = 0; i < 20; ++i) {
    auto shuffled = sentence_shuffle(report, rng);
    moved = moved || shuffled != report;
    auto parts = split_sentences(shuffled);
    std::sort(parts.begin(), parts.end());
    EXPECT_EQ(parts, sentences);
  }
  EXPECT_TRUE(moved);
}

TEST(Text, SynonymReplacementKeepsPunctuation) {
  Lexicon lex{{"left", {"sinistral"}}};
  Rng rng(0);
  SynonymStats stats;
  EXPECT_EQ(synonym_replace("Left apical. Left, basal", lex, 1.0, rng, &stats), "Sinistral apical. Sinistral, basal");
  EXPECT_EQ(stats.candidates, 2u);
  EXPECT_EQ(stats.replaced, 2u);
  EXPECT_EQ(synonym_replace("Left apical", lex, 0.0, rng), "Left apical");
}

TEST(Text, SynonymFrequencyNearP) {
  const auto& lex = default_lexicon();
  Rng rng(11);
  SynonymStats stats;
  while (stats.candidates < 10000) synonym_replace("large right apical pneumothorax", lex, 0.15, rng, &stats);
  const double rate = double(stats.replaced) / double(stats.candidates);
  EXPECT_GE(rate, 0.14);
  EXPECT_LE(rate, 0.16);
}

TEST(Text, LexiconParsing) {
  auto lex = parse_lexicon(R"({"Large": ["big", "extensive"]})");
  ASSERT_EQ(lex.count("large"), 1u);
  EXPECT_EQ(lex["large"].size(), 2u);
  EXPECT_ANY_THROW(parse_lexicon(R"({"large": "big"})"));
  EXPECT_ANY_THROW(parse_lexicon("[1, 2]"));
}

TEST(Policy, ValidateRejectsBadProbabilities) {
  AugmentPolicy p;
  p.p_ssr = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  AugmentPolicy q;
  q.contrast_min = 1.3;
  EXPECT_THROW(q.validate(), ConfigError);
}
