/*
 * Copyright 2026 The Glens Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Portable checkpoint file:
//
//   "GLNS" | version u32 | tensor count u32
//   per tensor: name length u32, UTF-8 name, rank u32, dims u32 x rank,
//               payload f32 x prod(dims)
//   metadata count u32, then (key length u32, key, value length u32, value)
//
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/tensor.hpp"

namespace glens {

inline constexpr char kCheckpointMagic[4] = {'G', 'L', 'N', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::vector<NamedTensor> tensors;
  std::map<std::string, std::string> metadata;

  const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t.value;
    return nullptr;
  }

  const Tensor& at(const std::string& name) const {
    const Tensor* t = find(name);
    if (t == nullptr) fail(ErrorKind::kMissingArtifact, "checkpoint has no tensor '" + name + "'");
    return *t;
  }

  const std::string& meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) fail(ErrorKind::kMissingArtifact, "checkpoint has no metadata key '" + key + "'");
    return it->second;
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  Real f32() { return std::bit_cast<Real>(u32()); }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::kTruncatedPayload, path_ + ": file ends at byte " + std::to_string(bytes_.size()) +
                                             ", needed " + std::to_string(pos_ + n));
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  static_assert(sizeof(Real) == 4, "checkpoint payload is f32");
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, ckpt.format_version);
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, value] : ckpt.tensors) {
    detail::put_str(out, name);
    detail::put_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t d : value.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (Real v : value.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    fail(ErrorKind::kMalformedHeader, path + ": missing GLNS magic");
  std::string body = bytes.substr(4);
  detail::Reader in(body, path);
  Checkpoint ckpt;
  ckpt.format_version = in.u32();
  if (ckpt.format_version != kCheckpointVersion)
    fail(ErrorKind::kVersionMismatch, path + ": format version " + std::to_string(ckpt.format_version) +
                                          ", expected " + std::to_string(kCheckpointVersion));
  const std::uint32_t count = in.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor named;
    named.name = in.str();
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    const std::size_t n = shape_size(shape);
    in.need(n * 4);
    std::vector<Real> data(n);
    for (auto& v : data) v = in.f32();
    named.value = Tensor(std::move(shape), std::move(data));
    ckpt.tensors.push_back(std::move(named));
  }
  const std::uint32_t meta_count = in.u32();
  for (std::uint32_t m = 0; m < meta_count; ++m) {
    std::string key = in.str();
    ckpt.metadata[key] = in.str();
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingArtifact, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace glens
