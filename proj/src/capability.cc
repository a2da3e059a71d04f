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

#include "ucap/capability.h"

#include <algorithm>
#include <cassert>
#include <cstring>

#include <fmt/format.h>

namespace ucap {

namespace {

bool ValidUninitCombination(uint8_t bits) {
  if (!(bits & Permissions::kUninit)) return true;
  return (bits & Permissions::kRead) && (bits & Permissions::kWrite) &&
         !(bits & Permissions::kExecute);
}

CapError MakeError(CapErrorKind kind, const Capability& cap,
                   std::optional<Address> addr = std::nullopt,
                   DeniedRight denied = DeniedRight::kRead) {
  return CapError{kind, denied, cap, addr};
}

// Caller guarantees the fields satisfy the Capability invariants.
Capability Rebuild(Permissions perms, Address base, Address end,
                   Address cursor) {
  auto cap = Capability::Make(perms, base, end, cursor);
  assert(cap.has_value());
  return *cap;
}

void PutU64(uint8_t* out, uint64_t value) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<uint8_t>(value >> (8 * i));
}

uint64_t GetU64(const uint8_t* in) {
  uint64_t value = 0;
  for (int i = 7; i >= 0; --i) value = (value << 8) | in[i];
  return value;
}

}  // namespace

std::optional<Permissions> Permissions::FromBits(uint64_t bits) {
  if (bits & ~uint64_t{kAll}) return std::nullopt;
  if (!ValidUninitCombination(static_cast<uint8_t>(bits))) return std::nullopt;
  return Permissions(static_cast<uint8_t>(bits));
}

Permissions Permissions::Normalized(uint8_t bits) {
  bits &= kAll;
  if (!ValidUninitCombination(bits)) bits &= ~kUninit;
  return Permissions(bits);
}

std::string Permissions::ToString() const {
  if (bits_ == 0) return "none";
  std::string out;
  if (read()) out += 'R';
  if (write()) out += 'W';
  if (execute()) out += 'X';
  if (uninit()) out += out.empty() ? "U" : "+U";
  return out;
}

std::optional<Capability> Capability::Make(Permissions perms, Address base,
                                           Address end, Address cursor) {
  if (base > end) return std::nullopt;
  if (perms.uninit() && cursor < base) return std::nullopt;
  return Capability(perms, base, end, cursor);
}

std::string Capability::ToString() const {
  return fmt::format("({},{:#x},{:#x},{:#x})", perms_.ToString(), base_, end_,
                     cursor_);
}

std::string CapError::Name() const {
  switch (kind) {
    case CapErrorKind::kTagViolation:
      return "TagViolation";
    case CapErrorKind::kPermissionViolation:
      switch (denied) {
        case DeniedRight::kRead:
          return "PermissionViolation(Read)";
        case DeniedRight::kWrite:
          return "PermissionViolation(Write)";
        case DeniedRight::kExecute:
          return "PermissionViolation(Execute)";
        case DeniedRight::kUninitRead:
          return "UninitRead";
      }
      break;
    case CapErrorKind::kBoundsViolation:
      return "BoundsViolation";
    case CapErrorKind::kAlignmentViolation:
      return "AlignmentViolation";
    case CapErrorKind::kCursorMonotonicityViolation:
      return "CursorMonotonicityViolation";
    case CapErrorKind::kShrinkViolation:
      return "ShrinkViolation";
    case CapErrorKind::kUninitDeriveViolation:
      return "UninitDeriveViolation";
  }
  return "Unknown";
}

std::string CapError::ToString() const {
  std::string out = Name();
  if (address.has_value()) out += fmt::format(" addr={:#x}", *address);
  out += " cap=" + cap.ToString();
  return out;
}

CapResult<void> CheckAccess(const Capability& cap, Address addr, uint64_t size,
                            AccessKind kind) {
  const Permissions perms = cap.perms();
  bool has_flag = false;
  DeniedRight denied = DeniedRight::kRead;
  switch (kind) {
    case AccessKind::kRead:
      has_flag = perms.read();
      denied = DeniedRight::kRead;
      break;
    case AccessKind::kWrite:
      has_flag = perms.write();
      denied = DeniedRight::kWrite;
      break;
    case AccessKind::kExecute:
      has_flag = perms.execute() && !perms.uninit();
      denied = DeniedRight::kExecute;
      break;
  }
  if (!has_flag) {
    return Unexpected(
        MakeError(CapErrorKind::kPermissionViolation, cap, addr, denied));
  }
  // addr + size <= end, written so that it cannot overflow.
  const bool in_bounds = addr >= cap.base() && addr <= cap.end() &&
                         size <= cap.end() - addr;
  if (!in_bounds) {
    return Unexpected(MakeError(CapErrorKind::kBoundsViolation, cap, addr));
  }
  if (kind == AccessKind::kRead && perms.uninit() && addr < cap.cursor()) {
    return Unexpected(MakeError(CapErrorKind::kPermissionViolation, cap, addr,
                                DeniedRight::kUninitRead));
  }
  return {};
}

CapResult<Capability> DeriveUninit(const Capability& cap) {
  const Permissions perms = cap.perms();
  if (!perms.read() || !perms.write() || perms.execute()) {
    return Unexpected(MakeError(CapErrorKind::kUninitDeriveViolation, cap));
  }
  auto derived = Capability::Make(Permissions::Normalized(perms.bits() |
                                                          Permissions::kUninit),
                                  cap.base(), cap.end(), cap.cursor());
  // A cursor below base cannot be represented on a U capability.
  if (!derived) {
    return Unexpected(MakeError(CapErrorKind::kUninitDeriveViolation, cap,
                                cap.cursor()));
  }
  return *derived;
}

CapResult<Capability> Shrink(const Capability& cap, Address new_base) {
  if (cap.cursor() > cap.end() || new_base < cap.base() ||
      new_base > cap.cursor()) {
    return Unexpected(
        MakeError(CapErrorKind::kShrinkViolation, cap, new_base));
  }
  return Rebuild(cap.perms(), new_base, cap.cursor(), cap.cursor());
}

CapResult<Capability> ShrinkImm(const Capability& cap, uint64_t imm) {
  // A wrapped sum lands below base, which Shrink rejects.
  return Shrink(cap, cap.base() + imm);
}

CapResult<Capability> SetBounds(const Capability& cap, uint64_t length) {
  const Address cursor = cap.cursor();
  if (cursor < cap.base() || cursor > cap.end() ||
      length > cap.end() - cursor) {
    return Unexpected(MakeError(CapErrorKind::kBoundsViolation, cap, cursor));
  }
  return Rebuild(cap.perms(), cursor, cursor + length, cursor);
}

CapResult<Capability> SetCursor(const Capability& cap, Address new_cursor) {
  if (cap.uninit() && new_cursor < cap.cursor()) {
    return Unexpected(MakeError(CapErrorKind::kCursorMonotonicityViolation,
                                cap, new_cursor));
  }
  return Rebuild(cap.perms(), cap.base(), cap.end(), new_cursor);
}

CapResult<Capability> LowerCursorAfterStore(const Capability& cap,
                                            uint64_t size) {
  if (!cap.uninit()) {
    return Unexpected(MakeError(CapErrorKind::kPermissionViolation, cap,
                                cap.cursor(), DeniedRight::kWrite));
  }
  if (cap.cursor() > cap.end() || cap.cursor() - cap.base() < size) {
    return Unexpected(MakeError(CapErrorKind::kBoundsViolation, cap,
                                cap.cursor() - size));
  }
  return Rebuild(cap.perms(), cap.base(), cap.end(), cap.cursor() - size);
}

uint64_t GetField(const Capability& cap, CapField field) {
  switch (field) {
    case CapField::kPerms:
      return cap.perms().bits();
    case CapField::kBase:
      return cap.base();
    case CapField::kLen:
      return cap.length();
    case CapField::kAddr:
      return cap.cursor();
    case CapField::kUninit:
      return cap.uninit() ? 1 : 0;
  }
  return 0;
}

Capability AndPerm(const Capability& cap, uint64_t mask) {
  uint8_t bits = cap.perms().bits() & static_cast<uint8_t>(mask);
  Permissions perms = Permissions::Normalized(bits);
  if (cap.uninit() && !perms.uninit() && cap.cursor() > cap.base()) {
    perms = Permissions::Normalized(perms.bits() & ~Permissions::kRead);
  }
  return Rebuild(perms, cap.base(), cap.end(), cap.cursor());
}

std::vector<Right> Authority(const Capability& cap) {
  assert(cap.length() <= kMaxAuthorityLength);
  const Permissions perms = cap.perms();
  const Address read_from =
      perms.uninit() ? std::max(cap.cursor(), cap.base()) : cap.base();
  std::vector<Right> rights;
  for (Address a = cap.base(); a < cap.end(); ++a) {
    if (perms.read() && a >= read_from) rights.push_back({a, AccessKind::kRead});
    if (perms.write()) rights.push_back({a, AccessKind::kWrite});
    if (perms.execute()) rights.push_back({a, AccessKind::kExecute});
  }
  return rights;
}

std::array<uint8_t, kCapabilitySize> SerializeCap(const Capability& cap) {
  std::array<uint8_t, kCapabilitySize> out{};
  PutU64(out.data() + 0, cap.perms().bits());
  PutU64(out.data() + 8, cap.cursor());
  PutU64(out.data() + 16, cap.base());
  PutU64(out.data() + 24, cap.length());
  return out;
}

Expected<Capability, std::string> DeserializeCap(
    std::span<const uint8_t> bytes) {
  if (bytes.size() != kCapabilitySize) {
    return Unexpected(
        fmt::format("capability must be {} bytes, got {}", kCapabilitySize,
                    bytes.size()));
  }
  const uint64_t flags = GetU64(bytes.data() + 0);
  const uint64_t cursor = GetU64(bytes.data() + 8);
  const uint64_t base = GetU64(bytes.data() + 16);
  const uint64_t length = GetU64(bytes.data() + 24);
  if (flags & ~uint64_t{Permissions::kAll}) {
    return Unexpected(fmt::format("reserved flag bits set: {:#x}", flags));
  }
  auto perms = Permissions::FromBits(flags);
  if (!perms) {
    return Unexpected(fmt::format("invalid permission combination: {:#x}",
                                  flags));
  }
  if (length > ~base) {
    return Unexpected(std::string("base + length overflows"));
  }
  auto cap = Capability::Make(*perms, base, base + length, cursor);
  if (!cap) {
    return Unexpected(std::string("uninitialized capability cursor below base"));
  }
  return *cap;
}

}  // namespace ucap
