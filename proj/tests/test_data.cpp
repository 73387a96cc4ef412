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
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ctxn/data.hpp"
#include "ctxn/errors.hpp"
#include "ctxn/pgm.hpp"

using namespace ctxn;
using namespace ctxn::data;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

double brute_dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  int both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 1 && b[i] == 1) both++;
    if (a[i] == 1) na++;
    if (b[i] == 1) nb++;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * both / (na + nb);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

}  // namespace

TEST(Pgm, DecodesHandWrittenFixture) {
  std::string eight = "P5\n# comment\n3 2\n255\n";
  eight += std::string{'\x00', '\x01', '\x7f', '\x80', '\xfe', '\xff'};
  auto img = decode_pgm(bytes_of(eight));
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.pixels, (std::vector<std::uint16_t>{0, 1, 127, 128, 254, 255}));

  std::string wide = "P5 2 1 65535\n";
  wide += std::string{'\x01', '\x02', '\xff', '\xfe'};
  auto w = decode_pgm(bytes_of(wide));
  EXPECT_EQ(w.pixels, (std::vector<std::uint16_t>{0x0102, 0xfffe}));
}

TEST(Pgm, RoundTripBothDepths) {
  for (std::uint32_t maxval : {255u, 65535u}) {
    PgmImage img{4, 3, maxval, {}};
    for (std::size_t i = 0; i < 12; ++i) img.pixels.push_back(static_cast<std::uint16_t>(i * maxval / 11));
    EXPECT_EQ(decode_pgm(encode_pgm(img)).pixels, img.pixels);
  }
}

TEST(Pgm, MalformedHeaderReportsLine) {
  try {
    decode_pgm(bytes_of("P5\n3 2\nabc\n"));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.location(), 3u);
  }
  EXPECT_THROW(decode_pgm(bytes_of("P2\n1 1\n255\n0")), FormatError);
  EXPECT_THROW(decode_pgm(bytes_of("P5\n2 2\n255\n\x01")), FormatError);
  EXPECT_THROW(decode_pgm(bytes_of("P5\n1 1\n100\n\xff")), FormatError);
}

TEST(Dice, MatchesBruteForceOracle) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution bit(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> a(256), b(256);
    for (auto& v : a) v = bit(rng);
    for (auto& v : b) v = bit(rng);
    EXPECT_DOUBLE_EQ(dice(a, b), brute_dice(a, b));
  }
}

TEST(Dice, EdgeCases) {
  std::vector<std::uint8_t> empty(16, 0), a(16, 0), b(16, 0);
  a[0] = 1;
  b[1] = 1;
  EXPECT_EQ(dice(empty, empty), 1.0);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, b), 0.0);
  EXPECT_EQ(dice(a, empty), 0.0);
  EXPECT_THROW(dice(a, std::vector<std::uint8_t>(15)), std::invalid_argument);
}

TEST(Sides, RadiographicConvention) {
  EXPECT_EQ(side_of_column(50, 64), Side::left);
  EXPECT_EQ(side_of_column(10, 64), Side::right);
  EXPECT_EQ(parse_side(to_string(Side::left)), Side::left);
  EXPECT_EQ(parse_extent("large"), Extent::large);
}

TEST(Generator, SamplesSatisfyInvariants) {
  GeneratorConfig cfg;
  cfg.image_size = 64;
  cfg.ambiguous_fraction = 0.5;
  cfg.present_fraction = 0.8;
  std::size_t ambiguous = 0, absent = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto s = generate_sample(seed, cfg);
    EXPECT_TRUE(check_sample(s).empty()) << "seed " << seed << ": " << check_sample(s).front();
    for (float v : s.image) ASSERT_TRUE(v >= 0.f && v <= 1.f);
    for (auto m : s.mask) ASSERT_LE(m, 1);
    ambiguous += s.attrs.ambiguous;
    absent += !s.attrs.present;
  }
  EXPECT_GT(ambiguous, 60u);
  EXPECT_GT(absent, 10u);
}

TEST(Generator, DecoyMatchesTargetStatistics) {
  GeneratorConfig cfg;
  cfg.ambiguous_fraction = 1.0;
  double t_sum = 0, t_sq = 0, d_sum = 0, d_sq = 0;
  std::size_t t_n = 0, d_n = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto g = render_sample(seed, cfg);
    ASSERT_TRUE(g.sample.attrs.ambiguous);
    const auto target = mask_area(g.sample.mask), decoy = mask_area(g.decoy_mask);
    ASSERT_GT(target, 0u);
    EXPECT_NEAR(double(decoy) / double(target), 1.0, 0.05) << "seed " << seed;
    for (std::size_t i = 0; i < g.sample.image.size(); ++i) {
      ASSERT_FALSE(g.sample.mask[i] && g.decoy_mask[i]);
      const double v = g.sample.image[i];
      if (g.sample.mask[i]) t_sum += v, t_sq += v * v, ++t_n;
      if (g.decoy_mask[i]) d_sum += v, d_sq += v * v, ++d_n;
    }
    EXPECT_NE(side_of_column(mask_centroid_column(g.decoy_mask, cfg.image_size), cfg.image_size),
              g.sample.attrs.side);
  }
  const double t_mean = t_sum / double(t_n), d_mean = d_sum / double(d_n);
  const double t_sd = std::sqrt(t_sq / double(t_n) - t_mean * t_mean);
  const double d_sd = std::sqrt(d_sq / double(d_n) - d_mean * d_mean);
  EXPECT_NEAR(d_mean / t_mean, 1.0, 0.05);
  EXPECT_NEAR(d_sd / t_sd, 1.0, 0.05);
  EXPECT_NEAR(double(d_n) / double(t_n), 1.0, 0.05);
}

TEST(Generator, LargeAtLeastTwiceSmall) {
  GeneratorConfig cfg;
  std::vector<double> small, large;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto s = generate_sample(seed, cfg);
    if (s.attrs.size == Extent::small) small.push_back(double(mask_area(s.mask)));
    if (s.attrs.size == Extent::large) large.push_back(double(mask_area(s.mask)));
  }
  ASSERT_FALSE(small.empty());
  ASSERT_FALSE(large.empty());
  EXPECT_GE(*std::min_element(large.begin(), large.end()), 2.0 * median(small));
}

TEST(Generator, DeterministicPerSeed) {
  GeneratorConfig cfg;
  auto a = generate_dataset(5, 9, cfg), b = generate_dataset(5, 9, cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].report, b[i].report);
  }
  EXPECT_EQ(a[3].id, "s00003");
  EXPECT_NE(a[0].image, a[1].image);
}

TEST(Generator, ReportNamesAttributes) {
  GeneratorConfig cfg;
  cfg.present_fraction = 1.0;
  auto s = generate_sample(42, cfg);
  std::string r = s.report;
  std::transform(r.begin(), r.end(), r.begin(), ::tolower);
  EXPECT_NE(r.find(std::string(to_string(s.attrs.side))), std::string::npos);
  EXPECT_NE(r.find(std::string(to_string(s.attrs.zone))), std::string::npos);
  EXPECT_NE(r.find("pneumothorax"), std::string::npos);
}

TEST(Split, DisjointCoveringAndReproducible) {
  SplitSpec spec;
  auto folds = mc_split(100, spec);
  ASSERT_EQ(folds.size(), spec.fold_seeds.size());
  for (const auto& f : folds) {
    EXPECT_EQ(f.train.size(), 70u);
    EXPECT_EQ(f.val.size(), 15u);
    EXPECT_EQ(f.test.size(), 15u);
    std::set<std::size_t> all(f.train.begin(), f.train.end());
    all.insert(f.val.begin(), f.val.end());
    all.insert(f.test.begin(), f.test.end());
    EXPECT_EQ(all.size(), 100u);
  }
  EXPECT_NE(folds[0].test, folds[1].test);
  EXPECT_EQ(mc_split(100, spec)[2].train, folds[2].train);
  spec.train = 0.9;
  EXPECT_ANY_THROW(mc_split(100, spec));
}

TEST(Dataset, DirectoryRoundTrip) {
  GeneratorConfig cfg;
  cfg.image_size = 32;
  auto samples = generate_dataset(4, 3, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "ctxn_test_dataset";
  std::filesystem::remove_all(dir);
  write_dataset(samples, dir, &cfg);
  auto back = read_dataset(dir);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back[i].id, samples[i].id);
    EXPECT_EQ(back[i].mask, samples[i].mask);
    EXPECT_EQ(back[i].report, samples[i].report);
    EXPECT_EQ(back[i].attrs, samples[i].attrs);
    for (std::size_t p = 0; p < samples[i].image.size(); ++p)
      EXPECT_NEAR(back[i].image[p], samples[i].image[p], 1.0 / 65535);
  }
  std::filesystem::remove(dir / "masks" / (samples[1].id + ".pgm"));
  EXPECT_THROW(read_dataset(dir), IoError);
  std::filesystem::remove_all(dir);
}
