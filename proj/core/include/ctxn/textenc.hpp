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
#include <string>
#include <string_view>
#include <vector>

namespace ctxn::text {

inline constexpr std::uint64_t kVocabModulus = std::uint64_t{1} << 20;
inline constexpr std::uint32_t kPadId = 0;
inline constexpr std::string_view kPadToken = "<pad>";

std::uint64_t fnv1a64(std::string_view bytes);

/// Hashed token id in [1, vocab_modulus); 0 is reserved for padding, so a
/// token whose hash lands on 0 is mapped to 1.
std::uint32_t token_id(std::string_view token, std::uint64_t vocab_modulus = kVocabModulus);

struct Report {
  std::string text;
  std::vector<std::string> tokens;  // pre-padding tokens, after truncation
  std::vector<std::uint32_t> ids;   // always max_tokens long
  std::size_t valid_len = 0;
};

/// Lowercases ASCII, splits on whitespace, splits every ASCII punctuation
/// character into its own token, truncates to max_tokens and pads with id 0.
Report tokenize(std::string_view text, std::size_t max_tokens, std::uint64_t vocab_modulus = kVocabModulus);

/// Frozen l×d_e token-embedding matrix. Never trained: the model copies it
/// into constant tensors.
struct ReportEmbedding {
  std::size_t length = 0;  // l
  std::size_t width = 0;   // d_e
  std::vector<float> matrix;
  std::size_t valid_len = 0;

  std::span<const float> row(std::size_t i) const { return {matrix.data() + i * width, width}; }
  bool operator==(const ReportEmbedding&) const = default;
};

/// Unit-norm Gaussian direction for a token id, keyed by (seed, id).
std::vector<float> token_vector(std::uint32_t id, std::size_t d_e, std::uint64_t seed);

ReportEmbedding embed(const Report& report, std::size_t d_e, std::uint64_t seed);

/// Precomputed embeddings keyed by sample id.
using EmbeddingTable = std::map<std::string, ReportEmbedding>;

// Embedding file, little-endian:
//   "CTXE" | version u32 | count u32 |
//   count × ( id_len u32 | id bytes | l u32 | d_e u32 | f32[l·d_e] )
// Precomputed matrices carry no padding information, so valid_len = l.
inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table);
EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace ctxn::text
