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

#include "ctxn/textenc.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "binary_io.hpp"
#include "ctxn/rng.hpp"

namespace ctxn::text {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t token_id(std::string_view token, std::uint64_t vocab_modulus) {
  const auto id = static_cast<std::uint32_t>(fnv1a64(token) % vocab_modulus);
  return id == kPadId ? 1 : id;
}

Report tokenize(std::string_view text, std::size_t max_tokens, std::uint64_t vocab_modulus) {
  if (max_tokens == 0) throw std::invalid_argument("tokenize: max_tokens must be >= 1");
  Report report;
  report.text = std::string(text);
  std::string current;
  auto flush = [&] {
    if (!current.empty()) report.tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      report.tokens.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  if (report.tokens.size() > max_tokens) report.tokens.resize(max_tokens);
  report.valid_len = report.tokens.size();
  report.ids.assign(max_tokens, kPadId);
  for (std::size_t i = 0; i < report.valid_len; ++i) report.ids[i] = token_id(report.tokens[i], vocab_modulus);
  return report;
}

std::vector<float> token_vector(std::uint32_t id, std::size_t d_e, std::uint64_t seed) {
  const std::uint64_t key = derive_seed({seed, id});
  std::vector<double> v(d_e);
  double norm2 = 0;
  for (std::size_t j = 0; j < d_e; ++j) {
    // Box-Muller from two counter draws; u1 is kept away from 0.
    const double u1 = 1.0 - to_unit(splitmix64(key + 2 * j));
    const double u2 = to_unit(splitmix64(key + 2 * j + 1));
    v[j] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    norm2 += v[j] * v[j];
  }
  const double inv = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
  std::vector<float> out(d_e);
  for (std::size_t j = 0; j < d_e; ++j) out[j] = static_cast<float>(v[j] * inv);
  if (norm2 == 0 && d_e > 0) out[0] = 1.0f;
  return out;
}

ReportEmbedding embed(const Report& report, std::size_t d_e, std::uint64_t seed) {
  if (d_e == 0) throw std::invalid_argument("embed: d_e must be >= 1");
  ReportEmbedding e;
  e.length = report.ids.size();
  e.width = d_e;
  e.valid_len = report.valid_len;
  e.matrix.reserve(e.length * d_e);
  std::map<std::uint32_t, std::vector<float>> rows;
  for (auto id : report.ids) {
    auto it = rows.find(id);
    if (it == rows.end()) it = rows.emplace(id, token_vector(id, d_e, seed)).first;
    e.matrix.insert(e.matrix.end(), it->second.begin(), it->second.end());
  }
  return e;
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table) {
  detail::ByteWriter w;
  w.raw("CTXE");
  w.u32(kEmbeddingFileVersion);
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& [id, e] : table) {
    w.str(id);
    w.u32(static_cast<std::uint32_t>(e.length));
    w.u32(static_cast<std::uint32_t>(e.width));
    for (float v : e.matrix) w.f32(v);
  }
  return w.take();
}

EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "embedding file");
  if (r.raw(4, "magic") != "CTXE") r.fail("bad magic (expected CTXE)", 0);
  const auto version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kEmbeddingFileVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const std::uint32_t count = r.u32("record count");
  EmbeddingTable table;
  std::size_t shared_l = 0, shared_d = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto record_at = r.offset();
    std::string id = r.str("sample id");
    const auto dims_at = r.offset();
    ReportEmbedding e;
    e.length = r.u32("l");
    e.width = r.u32("d_e");
    if (e.length == 0 || e.width == 0) r.fail("record '" + id + "' has zero l or d_e", dims_at);
    if (i == 0) {
      shared_l = e.length;
      shared_d = e.width;
    } else if (e.length != shared_l || e.width != shared_d) {
      r.fail("record '" + id + "' has dims " + std::to_string(e.length) + "x" + std::to_string(e.width) +
                 ", expected " + std::to_string(shared_l) + "x" + std::to_string(shared_d),
             dims_at);
    }
    e.valid_len = e.length;
    const std::size_t n = e.length * e.width;
    r.need(n * 4, "payload");
    e.matrix.reserve(n);
    for (std::size_t k = 0; k < n; ++k) e.matrix.push_back(r.f32("payload"));
    if (!table.emplace(std::move(id), std::move(e)).second) r.fail("duplicate sample id", record_at);
  }
  if (!r.done()) r.fail("trailing bytes", r.offset());
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  detail::write_file_bytes(path.string(), encode_embeddings(table));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(detail::read_file_bytes(path.string()));
}

}  // namespace ctxn::text
