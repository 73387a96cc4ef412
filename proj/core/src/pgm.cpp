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

#include "ctxn/pgm.hpp"

#include <algorithm>
#include <cctype>

#include "binary_io.hpp"

namespace ctxn::data {

std::vector<std::uint8_t> encode_pgm(const PgmImage& image) {
  if (image.maxval == 0 || image.maxval > 65535) throw std::invalid_argument("encode_pgm: maxval must be in 1..65535");
  if (image.pixels.size() != image.width * image.height) throw std::invalid_argument("encode_pgm: pixel count mismatch");
  const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" +
                             std::to_string(image.maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const bool wide = image.maxval > 255;
  out.reserve(out.size() + image.pixels.size() * (wide ? 2 : 1));
  for (auto v : image.pixels) {
    if (v > image.maxval) throw std::invalid_argument("encode_pgm: pixel exceeds maxval");
    if (wide) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

PgmImage decode_pgm(std::span<const std::uint8_t> bytes, const std::string& context) {
  std::size_t pos = 0;
  auto line_at = [&](std::size_t at) {
    return static_cast<std::uint64_t>(1 + std::count(bytes.begin(), bytes.begin() + std::min(at, bytes.size()), '\n'));
  };
  auto fail = [&](const std::string& what) -> void {
    const auto line = line_at(pos);
    throw FormatError(context + ": " + what + " (header line " + std::to_string(line) + ")", line);
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) -> std::uint64_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(std::string("expected ") + what);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1u << 30) fail(std::string(what) + " too large");
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("missing P5 magic");
  pos = 2;
  PgmImage image;
  image.width = number("width");
  image.height = number("height");
  const auto maxval = number("maxval");
  if (image.width == 0 || image.height == 0) fail("zero image extent");
  if (maxval == 0 || maxval > 65535) fail("maxval out of range");
  image.maxval = static_cast<std::uint32_t>(maxval);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("missing whitespace after maxval");
  ++pos;
  const bool wide = image.maxval > 255;
  const std::size_t need = image.width * image.height * (wide ? 2 : 1);
  if (bytes.size() - pos < need) fail("payload truncated");
  image.pixels.resize(image.width * image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    std::uint16_t v = wide ? static_cast<std::uint16_t>((bytes[pos] << 8) | bytes[pos + 1]) : bytes[pos];
    pos += wide ? 2 : 1;
    if (v > image.maxval) fail("pixel " + std::to_string(i) + " exceeds maxval");
    image.pixels[i] = v;
  }
  return image;
}

void write_pgm(const PgmImage& image, const std::filesystem::path& path) {
  detail::write_file_bytes(path.string(), encode_pgm(image));
}

PgmImage read_pgm(const std::filesystem::path& path) {
  return decode_pgm(detail::read_file_bytes(path.string()), path.string());
}

}  // namespace ctxn::data
