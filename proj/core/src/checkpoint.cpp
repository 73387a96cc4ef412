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

#include "ctxn/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"

namespace ctxn {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

const CheckpointTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const CheckpointTensor& Checkpoint::at(std::string_view name) const {
  const auto* t = find(name);
  if (!t) throw FormatError("checkpoint has no tensor named '" + std::string(name) + "'", 0);
  return *t;
}

template <typename T>
void Checkpoint::add(const std::string& name, const Tensor<T>& tensor) {
  CheckpointTensor entry;
  entry.name = name;
  for (auto d : tensor.shape()) entry.dims.push_back(static_cast<std::uint32_t>(d));
  entry.values.reserve(tensor.numel());
  for (T v : tensor.data()) entry.values.push_back(static_cast<float>(v));
  tensors.push_back(std::move(entry));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  detail::ByteWriter w;
  w.raw("CTXN");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (float v : t.values) w.f32(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.raw(4, "magic") != "CTXN") r.fail("bad magic (expected CTXN)", 0);
  const auto version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const std::uint32_t count = r.u32("tensor count");
  Checkpoint checkpoint;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.str("tensor name");
    const std::uint32_t ndim = r.u32("ndim");
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.u32("dims"));
      numel *= t.dims.back();
    }
    r.need(numel * 4, "payload");
    t.values.reserve(numel);
    for (std::uint64_t k = 0; k < numel; ++k) t.values.push_back(r.f32("payload"));
    checkpoint.tensors.push_back(std::move(t));
  }
  if (!r.done()) r.fail("trailing bytes", r.offset());
  return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  detail::write_file_bytes(path.string(), encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file_bytes(path.string()));
}

template <typename T>
void restore_tensor(const CheckpointTensor& stored, Tensor<T>& target) {
  Shape shape(stored.dims.begin(), stored.dims.end());
  if (shape != target.shape()) {
    throw ShapeError("checkpoint tensor '" + stored.name + "' has shape " + shape_str(shape) + ", model expects " +
                     shape_str(target.shape()));
  }
  auto dst = target.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(stored.values[i]);
}

template void Checkpoint::add<float>(const std::string&, const Tensor<float>&);
template void Checkpoint::add<double>(const std::string&, const Tensor<double>&);
template void restore_tensor<float>(const CheckpointTensor&, Tensor<float>&);
template void restore_tensor<double>(const CheckpointTensor&, Tensor<double>&);

}  // namespace ctxn
