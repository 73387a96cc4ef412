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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "ctxn/errors.hpp"
#include "ctxn/textenc.hpp"

using namespace ctxn;
using namespace ctxn::text;

TEST(Fnv1a, PublishedVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(TokenId, NeverPadAndInRange) {
  for (const char* t : {"pneumothorax", "left", "right", ".", "a", "zz"}) {
    const auto id = token_id(t);
    EXPECT_GE(id, 1u);
    EXPECT_LT(id, kVocabModulus);
  }
  // With modulus 2 every token whose hash is even would land on the pad id.
  for (const char* t : {"a", "b", "c", "d", "e", "f"}) EXPECT_EQ(token_id(t, 2), 1u);
}

TEST(Tokenize, LowercasesSplitsPunctuationAndPads) {
  auto r = tokenize("Small LEFT apical pneumothorax.", 8);
  ASSERT_EQ(r.tokens, (std::vector<std::string>{"small", "left", "apical", "pneumothorax", "."}));
  EXPECT_EQ(r.valid_len, 5u);
  ASSERT_EQ(r.ids.size(), 8u);
  for (std::size_t i = 5; i < 8; ++i) EXPECT_EQ(r.ids[i], kPadId);
  EXPECT_EQ(r.ids[1], token_id("left"));
}

TEST(Tokenize, TruncatesToMaxTokens) {
  auto r = tokenize("a b c d e f", 3);
  EXPECT_EQ(r.valid_len, 3u);
  EXPECT_EQ(r.tokens.size(), 3u);
  EXPECT_EQ(r.ids.size(), 3u);
}

TEST(Tokenize, EmptyTextIsAllPadding) {
  auto r = tokenize("   ", 4);
  EXPECT_EQ(r.valid_len, 0u);
  for (auto id : r.ids) EXPECT_EQ(id, kPadId);
}

TEST(TokenVector, UnitNormAndDeterministic) {
  for (std::uint32_t id : {0u, 1u, 12345u}) {
    auto v = token_vector(id, 16, 7);
    double n = 0;
    for (float x : v) n += double(x) * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    EXPECT_EQ(v, token_vector(id, 16, 7));
  }
  EXPECT_NE(token_vector(5, 16, 7), token_vector(5, 16, 8));
  EXPECT_NE(token_vector(5, 16, 7), token_vector(6, 16, 7));
}

TEST(Embed, RowsFollowTokenIds) {
  auto r = tokenize("left left right", 5);
  auto e = embed(r, 8, 3);
  EXPECT_EQ(e.length, 5u);
  EXPECT_EQ(e.width, 8u);
  EXPECT_EQ(e.valid_len, 3u);
  auto row = [&](std::size_t i) { return std::vector<float>(e.row(i).begin(), e.row(i).end()); };
  EXPECT_EQ(row(0), row(1));
  EXPECT_NE(row(0), row(2));
  EXPECT_EQ(row(3), token_vector(kPadId, 8, 3));
  EXPECT_EQ(e, embed(r, 8, 3));
}

TEST(EmbeddingFile, RoundTrip) {
  EmbeddingTable table;
  table["s00000"] = embed(tokenize("large right basal pneumothorax", 4), 3, 1);
  table["s00001"] = embed(tokenize("small left", 4), 3, 1);
  const auto path = std::filesystem::temp_directory_path() / "ctxn_test_embeddings.ctxe";
  save_embeddings(table, path);
  auto back = load_embeddings(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), 2u);
  for (const auto& [id, e] : table) {
    EXPECT_EQ(back.at(id).matrix, e.matrix);
    EXPECT_EQ(back.at(id).valid_len, e.length);
  }
}

TEST(EmbeddingFile, CorruptionRaisesFormatErrorWithOffset) {
  EmbeddingTable table;
  table["a"] = embed(tokenize("x", 2), 2, 0);
  auto bytes = encode_embeddings(table);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_embeddings(bad_magic), FormatError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    decode_embeddings(truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GT(e.location(), 0u);
  }

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_embeddings(trailing), FormatError);
}
