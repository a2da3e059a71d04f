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

#ifndef UCAP_MEMORY_H_
#define UCAP_MEMORY_H_

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ucap/capability.h"
#include "ucap/expected.h"

namespace ucap {

// A capability together with its validity tag. Used for capability registers
// and capability-sized memory lines.
struct TaggedCap {
  Capability cap;
  bool tag = false;

  friend bool operator==(const TaggedCap&, const TaggedCap&) = default;
};

// A register or memory value: plain data or a (possibly untagged)
// capability.
using TaggedWord = std::variant<uint64_t, TaggedCap>;

enum class MemError : uint8_t { kOutOfRange, kMisaligned };

const char* MemErrorName(MemError err);

// Byte-addressable little-endian memory with one tag per 32-byte line. A tag
// can only be set by WriteCap; every other write to a line clears it.
class Memory {
 public:
  static constexpr uint64_t kLineSize = kCapabilitySize;

  // `size` must be a non-zero multiple of kLineSize.
  explicit Memory(uint64_t size);

  uint64_t size() const { return bytes_.size(); }
  size_t line_count() const { return tags_.size(); }
  bool line_tag(size_t line) const { return tags_[line]; }
  std::span<const uint8_t> bytes() const { return bytes_; }

  // `size` is 1, 2, 4 or 8 and `addr` must be aligned to it.
  Expected<uint64_t, MemError> ReadData(Address addr, uint64_t size) const;
  Expected<void, MemError> WriteData(Address addr, uint64_t size,
                                     uint64_t value);

  // Untagged lines holding bytes that do not decode as a capability read
  // back as an untagged null capability.
  Expected<TaggedCap, MemError> ReadCap(Address addr) const;
  Expected<void, MemError> WriteCap(Address addr, const Capability& cap,
                                    bool tag);

  // Raw image loading. Clears the tags of every touched line.
  Expected<void, MemError> LoadBytes(Address addr,
                                     std::span<const uint8_t> data);

  // One line per 32-byte line overlapping [start, end):
  //   "0x00008000: 00 11 ... ff T"   (T tagged, . untagged)
  std::string Dump(Address start, Address end) const;

  friend bool operator==(const Memory&, const Memory&) = default;

 private:
  bool InRange(Address addr, uint64_t size) const {
    return addr <= bytes_.size() && size <= bytes_.size() - addr;
  }
  void ClearTags(Address addr, uint64_t size);

  std::vector<uint8_t> bytes_;
  std::vector<bool> tags_;
};

}  // namespace ucap

#endif  // UCAP_MEMORY_H_
