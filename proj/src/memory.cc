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

#include "ucap/memory.h"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace ucap {

namespace {

bool ValidDataSize(uint64_t size) {
  return size == 1 || size == 2 || size == 4 || size == 8;
}

}  // namespace

const char* MemErrorName(MemError err) {
  switch (err) {
    case MemError::kOutOfRange:
      return "out of range";
    case MemError::kMisaligned:
      return "misaligned";
  }
  return "unknown";
}

Memory::Memory(uint64_t size) {
  if (size == 0 || size % kLineSize != 0) {
    throw std::invalid_argument(
        fmt::format("memory size {} is not a multiple of {}", size, kLineSize));
  }
  bytes_.assign(size, 0);
  tags_.assign(size / kLineSize, false);
}

void Memory::ClearTags(Address addr, uint64_t size) {
  if (size == 0) return;
  const size_t first = addr / kLineSize;
  const size_t last = (addr + size - 1) / kLineSize;
  for (size_t line = first; line <= last; ++line) tags_[line] = false;
}

Expected<uint64_t, MemError> Memory::ReadData(Address addr,
                                              uint64_t size) const {
  if (!ValidDataSize(size) || addr % size != 0) {
    return Unexpected(MemError::kMisaligned);
  }
  if (!InRange(addr, size)) return Unexpected(MemError::kOutOfRange);
  uint64_t value = 0;
  for (uint64_t i = size; i-- > 0;) value = (value << 8) | bytes_[addr + i];
  return value;
}

Expected<void, MemError> Memory::WriteData(Address addr, uint64_t size,
                                           uint64_t value) {
  if (!ValidDataSize(size) || addr % size != 0) {
    return Unexpected(MemError::kMisaligned);
  }
  if (!InRange(addr, size)) return Unexpected(MemError::kOutOfRange);
  for (uint64_t i = 0; i < size; ++i) {
    bytes_[addr + i] = static_cast<uint8_t>(value >> (8 * i));
  }
  ClearTags(addr, size);
  return {};
}

Expected<TaggedCap, MemError> Memory::ReadCap(Address addr) const {
  if (addr % kLineSize != 0) return Unexpected(MemError::kMisaligned);
  if (!InRange(addr, kLineSize)) return Unexpected(MemError::kOutOfRange);
  const bool tag = tags_[addr / kLineSize];
  auto cap = DeserializeCap(
      std::span<const uint8_t>(bytes_.data() + addr, kLineSize));
  if (!cap) return TaggedCap{Capability(), false};
  return TaggedCap{*cap, tag};
}

Expected<void, MemError> Memory::WriteCap(Address addr, const Capability& cap,
                                          bool tag) {
  if (addr % kLineSize != 0) return Unexpected(MemError::kMisaligned);
  if (!InRange(addr, kLineSize)) return Unexpected(MemError::kOutOfRange);
  const auto raw = SerializeCap(cap);
  std::copy(raw.begin(), raw.end(), bytes_.begin() + addr);
  tags_[addr / kLineSize] = tag;
  return {};
}

Expected<void, MemError> Memory::LoadBytes(Address addr,
                                           std::span<const uint8_t> data) {
  if (!InRange(addr, data.size())) return Unexpected(MemError::kOutOfRange);
  std::copy(data.begin(), data.end(), bytes_.begin() + addr);
  ClearTags(addr, data.size());
  return {};
}

std::string Memory::Dump(Address start, Address end) const {
  std::string out;
  end = std::min<Address>(end, bytes_.size());
  if (start >= end) return out;
  for (Address line = start - start % kLineSize; line < end;
       line += kLineSize) {
    out += fmt::format("{:#010x}:", line);
    for (uint64_t i = 0; i < kLineSize; ++i) {
      out += fmt::format(" {:02x}", bytes_[line + i]);
    }
    out += tags_[line / kLineSize] ? " T\n" : " .\n";
  }
  return out;
}

}  // namespace ucap
