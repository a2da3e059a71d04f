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

#ifndef UCAP_CAPABILITY_H_
#define UCAP_CAPABILITY_H_

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ucap/expected.h"

// Capabilities with the uninitialized (U) permission, their authority checks,
// and every derivation operation. Nothing in this file touches machine state.

namespace ucap {

using Address = uint64_t;

inline constexpr size_t kCapabilitySize = 32;

// Permission flags. The U flag is only ever combined with R and W and never
// with X; every constructor below enforces that.
class Permissions {
 public:
  static constexpr uint8_t kRead = 1 << 0;
  static constexpr uint8_t kWrite = 1 << 1;
  static constexpr uint8_t kExecute = 1 << 2;
  static constexpr uint8_t kUninit = 1 << 3;
  static constexpr uint8_t kAll = kRead | kWrite | kExecute | kUninit;

  constexpr Permissions() = default;

  // Returns nullopt for bit patterns outside kAll or violating the U rule.
  static std::optional<Permissions> FromBits(uint64_t bits);

  // Drops U when the remaining flags cannot carry it.
  static Permissions Normalized(uint8_t bits);

  static constexpr Permissions None() { return Permissions(0); }
  static constexpr Permissions R() { return Permissions(kRead); }
  static constexpr Permissions RW() { return Permissions(kRead | kWrite); }
  static constexpr Permissions RX() { return Permissions(kRead | kExecute); }
  static constexpr Permissions RWX() {
    return Permissions(kRead | kWrite | kExecute);
  }
  static constexpr Permissions RWU() {
    return Permissions(kRead | kWrite | kUninit);
  }

  constexpr bool read() const { return bits_ & kRead; }
  constexpr bool write() const { return bits_ & kWrite; }
  constexpr bool execute() const { return bits_ & kExecute; }
  constexpr bool uninit() const { return bits_ & kUninit; }
  constexpr uint8_t bits() const { return bits_; }

  // "R", "RW", "RX", "RWX", "RW+U", ... or "none".
  std::string ToString() const;

  friend constexpr bool operator==(Permissions, Permissions) = default;

 private:
  explicit constexpr Permissions(uint8_t bits) : bits_(bits) {}

  uint8_t bits_ = 0;
};

enum class AccessKind : uint8_t { kRead, kWrite, kExecute };

// The right a failed permission check was missing. kUninitRead means the
// flag was present but the address lies below the cursor of a U capability.
enum class DeniedRight : uint8_t { kRead, kWrite, kExecute, kUninitRead };

// (permissions, base, end, cursor) with an exclusive end. The default value
// is the null capability.
class Capability {
 public:
  constexpr Capability() = default;

  // Fails if base > end, or if perms carry U and cursor < base.
  static std::optional<Capability> Make(Permissions perms, Address base,
                                        Address end, Address cursor);

  Permissions perms() const { return perms_; }
  Address base() const { return base_; }
  Address end() const { return end_; }
  Address cursor() const { return cursor_; }
  uint64_t length() const { return end_ - base_; }
  bool uninit() const { return perms_.uninit(); }

  std::string ToString() const;

  friend bool operator==(const Capability&, const Capability&) = default;

 private:
  Capability(Permissions perms, Address base, Address end, Address cursor)
      : perms_(perms), base_(base), end_(end), cursor_(cursor) {}

  Permissions perms_;
  Address base_ = 0;
  Address end_ = 0;
  Address cursor_ = 0;
};

enum class CapErrorKind : uint8_t {
  kTagViolation,
  kPermissionViolation,
  kBoundsViolation,
  kAlignmentViolation,
  kCursorMonotonicityViolation,
  kShrinkViolation,
  kUninitDeriveViolation,
};

struct CapError {
  CapErrorKind kind;
  // Meaningful for kPermissionViolation only.
  DeniedRight denied = DeniedRight::kRead;
  Capability cap;
  std::optional<Address> address;

  // "UninitRead", "PermissionViolation(Write)", "BoundsViolation", ...
  std::string Name() const;
  std::string ToString() const;

  friend bool operator==(const CapError&, const CapError&) = default;
};

template <typename T>
using CapResult = Expected<T, CapError>;

// Checks an access of `size` bytes at `addr`. The missing permission flag is
// reported first, then the range, then the cursor rule for U reads.
CapResult<void> CheckAccess(const Capability& cap, Address addr, uint64_t size,
                            AccessKind kind);

// CUninit. Keeps the cursor.
CapResult<Capability> DeriveUninit(const Capability& cap);

// CShrink: end := cursor, base := new_base.
CapResult<Capability> Shrink(const Capability& cap, Address new_base);
// CShrinkImm: Shrink(cap, base + imm).
CapResult<Capability> ShrinkImm(const Capability& cap, uint64_t imm);

// CSetBounds: base := cursor, end := cursor + length, enclosed by the old
// range.
CapResult<Capability> SetBounds(const Capability& cap, uint64_t length);

// Moves the cursor. U capabilities may only move it upwards; bounds are not
// checked here.
CapResult<Capability> SetCursor(const Capability& cap, Address new_cursor);

// The cursor update performed by an uninitialized store of `size` bytes at
// offset -1: the only operation that lowers a U cursor. Requires a U
// capability whose range covers [cursor - size, cursor).
CapResult<Capability> LowerCursorAfterStore(const Capability& cap,
                                            uint64_t size);

enum class CapField : uint8_t { kPerms, kBase, kLen, kAddr, kUninit };
uint64_t GetField(const Capability& cap, CapField field);

// perms := perms & mask. If U is lost while the cursor is above base, R is
// dropped too so that no read right appears below the old cursor.
Capability AndPerm(const Capability& cap, uint64_t mask);

struct Right {
  Address address;
  AccessKind kind;

  friend auto operator<=>(const Right&, const Right&) = default;
};

inline constexpr uint64_t kMaxAuthorityLength = 4096;

// Every (address, access) the capability grants, sorted by address then
// kind. Intended for testing; the range must not exceed kMaxAuthorityLength.
std::vector<Right> Authority(const Capability& cap);

// Layout: four little-endian u64 fields {flags, cursor, base, length}.
std::array<uint8_t, kCapabilitySize> SerializeCap(const Capability& cap);
Expected<Capability, std::string> DeserializeCap(
    std::span<const uint8_t> bytes);

}  // namespace ucap

#endif  // UCAP_CAPABILITY_H_
