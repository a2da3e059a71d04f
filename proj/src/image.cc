// Copyright 2026 The ucap Authors
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

#include "ucap/image.h"

#include <algorithm>

#include <fmt/format.h>

namespace ucap {

namespace {

constexpr uint8_t kMagic[4] = {'U', 'C', 'A', 'P'};
constexpr uint8_t kKindBytes = 0;
constexpr uint8_t kKindCap = 1;

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U16(uint16_t v) { Int(v, 2); }
  void U32(uint32_t v) { Int(v, 4); }
  void U64(uint64_t v) { Int(v, 8); }
  void Bytes(std::span<const uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
  }
  std::vector<uint8_t> Take() { return std::move(out_); }

 private:
  void Int(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  bool U8(uint8_t& v) {
    uint64_t t;
    if (!Int(t, 1)) return false;
    v = static_cast<uint8_t>(t);
    return true;
  }
  bool U16(uint16_t& v) {
    uint64_t t;
    if (!Int(t, 2)) return false;
    v = static_cast<uint16_t>(t);
    return true;
  }
  bool U32(uint32_t& v) {
    uint64_t t;
    if (!Int(t, 4)) return false;
    v = static_cast<uint32_t>(t);
    return true;
  }
  bool U64(uint64_t& v) { return Int(v, 8); }
  bool Bytes(uint64_t n, std::span<const uint8_t>& out) {
    if (n > remaining()) return false;
    out = in_.subspan(pos_, n);
    pos_ += n;
    return true;
  }
  uint64_t remaining() const { return in_.size() - pos_; }

 private:
  bool Int(uint64_t& v, int n) {
    if (remaining() < static_cast<uint64_t>(n)) return false;
    v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | in_[pos_ + i];
    pos_ += n;
    return true;
  }

  std::span<const uint8_t> in_;
  uint64_t pos_ = 0;
};

Unexpected<std::string> Truncated(std::string_view what) {
  return Unexpected(fmt::format("truncated image: {}", what));
}

}  // namespace

uint64_t DataEntry::size() const {
  if (const auto* bytes = std::get_if<std::vector<uint8_t>>(&payload)) {
    return bytes->size();
  }
  return kCapabilitySize;
}

std::vector<uint8_t> WriteImage(const ProgramImage& image) {
  Writer w;
  w.Bytes(kMagic);
  w.U16(kImageVersion);
  w.U64(image.entry);
  w.U64(image.code_base);
  w.U64(image.code.size());
  w.Bytes(image.code);
  w.U64(image.stack_base);
  w.U64(image.stack_end);
  w.U32(static_cast<uint32_t>(image.data.size()));
  for (const auto& entry : image.data) {
    if (const auto* bytes = std::get_if<std::vector<uint8_t>>(&entry.payload)) {
      w.U8(kKindBytes);
      w.U64(entry.addr);
      w.U64(bytes->size());
      w.Bytes(*bytes);
    } else {
      const auto& tc = std::get<TaggedCap>(entry.payload);
      w.U8(kKindCap);
      w.U64(entry.addr);
      w.Bytes(SerializeCap(tc.cap));
      w.U8(tc.tag ? 1 : 0);
    }
  }
  return w.Take();
}

Expected<ProgramImage, std::string> ReadImage(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  std::span<const uint8_t> magic;
  if (!r.Bytes(4, magic)) return Truncated("header");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    return Unexpected(std::string("bad magic (expected \"UCAP\")"));
  }
  uint16_t version;
  if (!r.U16(version)) return Truncated("header");
  if (version != kImageVersion) {
    return Unexpected(fmt::format("unsupported image version {}", version));
  }
  ProgramImage image;
  uint64_t code_len;
  if (!r.U64(image.entry) || !r.U64(image.code_base) || !r.U64(code_len)) {
    return Truncated("header");
  }
  std::span<const uint8_t> code;
  if (!r.Bytes(code_len, code)) return Truncated("code section");
  image.code.assign(code.begin(), code.end());
  uint32_t count;
  if (!r.U64(image.stack_base) || !r.U64(image.stack_end) || !r.U32(count)) {
    return Truncated("stack/data header");
  }
  for (uint32_t i = 0; i < count; ++i) {
    uint8_t kind;
    DataEntry entry;
    if (!r.U8(kind) || !r.U64(entry.addr)) return Truncated("data section");
    if (kind == kKindBytes) {
      uint64_t len;
      std::span<const uint8_t> payload;
      if (!r.U64(len) || !r.Bytes(len, payload)) {
        return Truncated("data section");
      }
      entry.payload = std::vector<uint8_t>(payload.begin(), payload.end());
    } else if (kind == kKindCap) {
      std::span<const uint8_t> raw;
      uint8_t tag;
      if (!r.Bytes(kCapabilitySize, raw) || !r.U8(tag)) {
        return Truncated("data section");
      }
      auto cap = DeserializeCap(raw);
      if (!cap) {
        return Unexpected(fmt::format("data entry {}: {}", i, cap.error()));
      }
      if (tag > 1) {
        return Unexpected(fmt::format("data entry {}: bad tag byte {}", i, tag));
      }
      entry.payload = TaggedCap{*cap, tag == 1};
    } else {
      return Unexpected(fmt::format("data entry {}: unknown kind {}", i, kind));
    }
    image.data.push_back(std::move(entry));
  }
  if (r.remaining() != 0) {
    return Unexpected(
        fmt::format("{} trailing bytes after data section", r.remaining()));
  }
  return image;
}

}  // namespace ucap
