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

#ifndef UCAP_IMAGE_H_
#define UCAP_IMAGE_H_

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ucap/capability.h"
#include "ucap/expected.h"
#include "ucap/memory.h"

namespace ucap {

inline constexpr Address kDefaultCodeBase = 0x0000;
inline constexpr Address kDefaultDataBase = 0x4000;
inline constexpr Address kDefaultStackBase = 0x8000;
inline constexpr Address kDefaultStackEnd = 0x10000;

struct DataEntry {
  Address addr = 0;
  std::variant<std::vector<uint8_t>, TaggedCap> payload;

  uint64_t size() const;

  friend bool operator==(const DataEntry&, const DataEntry&) = default;
};

// Assembled program: one contiguous code segment, initial data, and the
// stack region handed to the program as c2.
struct ProgramImage {
  Address entry = kDefaultCodeBase;
  Address code_base = kDefaultCodeBase;
  std::vector<uint8_t> code;
  Address stack_base = kDefaultStackBase;
  Address stack_end = kDefaultStackEnd;
  std::vector<DataEntry> data;

  Address code_end() const { return code_base + code.size(); }

  friend bool operator==(const ProgramImage&, const ProgramImage&) = default;
};

// File format, all integers little-endian:
//   "UCAP" u16 version=1
//   u64 entry, u64 code_base, u64 code_len, code bytes
//   u64 stack_base, u64 stack_end
//   u32 entry count, then per entry:
//     u8 kind (0 bytes, 1 capability), u64 addr,
//     kind 0: u64 len, len bytes
//     kind 1: 32-byte capability, u8 tag
inline constexpr uint16_t kImageVersion = 1;

std::vector<uint8_t> WriteImage(const ProgramImage& image);
Expected<ProgramImage, std::string> ReadImage(std::span<const uint8_t> bytes);

}  // namespace ucap

#endif  // UCAP_IMAGE_H_
