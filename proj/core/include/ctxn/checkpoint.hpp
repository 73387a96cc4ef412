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

#include "ctxn/tensor.hpp"

namespace ctxn {

// Binary layout, little-endian:
//   "CTXN" | version u32 | count u32 |
//   count × ( name_len u32 | name bytes | ndim u32 | dims u32[ndim] | f32[prod(dims)] )

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(std::string_view name) const;
  const CheckpointTensor& at(std::string_view name) const;

  template <typename T>
  void add(const std::string& name, const Tensor<T>& tensor);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies a stored tensor into `target`, which must have matching shape.
template <typename T>
void restore_tensor(const CheckpointTensor& stored, Tensor<T>& target);

}  // namespace ctxn
