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
#include <vector>

namespace ctxn::data {

/// Binary (P5) graymap. maxval < 256 stores one byte per pixel, otherwise
/// two bytes big-endian.
struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major
};

std::vector<std::uint8_t> encode_pgm(const PgmImage& image);

/// Throws FormatError whose location is the 1-based header line of the
/// problem.
PgmImage decode_pgm(std::span<const std::uint8_t> bytes, const std::string& context = "pgm");

void write_pgm(const PgmImage& image, const std::filesystem::path& path);
PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace ctxn::data
