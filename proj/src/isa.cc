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

#include "ucap/isa.h"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

namespace ucap {

namespace {

using F = Format;
using O = Opcode;

constexpr OpcodeInfo kTable[] = {
    {O::kHalt, "halt", F::kNone},
    {O::kLi, "li", F::kGI},
    {O::kMov, "mov", F::kGG},
    {O::kAdd, "add", F::kGGG},
    {O::kSub, "sub", F::kGGG},
    {O::kAnd, "and", F::kGGG},
    {O::kOr, "or", F::kGGG},
    {O::kXor, "xor", F::kGGG},
    {O::kSll, "sll", F::kGGG},
    {O::kSrl, "srl", F::kGGG},
    {O::kSlt, "slt", F::kGGG},
    {O::kAddi, "addi", F::kGGI},

    {O::kBeq, "beq", F::kGGL},
    {O::kBne, "bne", F::kGGL},
    {O::kJ, "j", F::kL},
    {O::kCJr, "cjr", F::kC},
    {O::kCJalr, "cjalr", F::kCC},

    {O::kClb, "clb", F::kGM, 1, true},
    {O::kClh, "clh", F::kGM, 2, true},
    {O::kClw, "clw", F::kGM, 4, true},
    {O::kCld, "cld", F::kGM, 8, true},
    {O::kClbu, "clbu", F::kGM, 1, false},
    {O::kClhu, "clhu", F::kGM, 2, false},
    {O::kClwu, "clwu", F::kGM, 4, false},
    {O::kClc, "clc", F::kCM, 32},

    {O::kCsb, "csb", F::kStoreGM, 1},
    {O::kCsh, "csh", F::kStoreGM, 2},
    {O::kCsw, "csw", F::kStoreGM, 4},
    {O::kCsd, "csd", F::kStoreGM, 8},
    {O::kCsc, "csc", F::kStoreCM, 32},

    {O::kUcsb, "ucsb", F::kUStoreCGM, 1},
    {O::kUcsh, "ucsh", F::kUStoreCGM, 2},
    {O::kUcsw, "ucsw", F::kUStoreCGM, 4},
    {O::kUcsd, "ucsd", F::kUStoreCGM, 8},
    {O::kUcsc, "ucsc", F::kUStoreCCM, 32},

    {O::kCGetPerm, "cgetperm", F::kGC},
    {O::kCGetBase, "cgetbase", F::kGC},
    {O::kCGetLen, "cgetlen", F::kGC},
    {O::kCGetAddr, "cgetaddr", F::kGC},
    {O::kCGetUninit, "cgetuninit", F::kGC},

    {O::kCMove, "cmove", F::kCC},
    {O::kCAndPerm, "candperm", F::kCCG},
    {O::kCUninit, "cuninit", F::kCC},
    {O::kCShrink, "cshrink", F::kCCG},
    {O::kCShrinkImm, "cshrinkimm", F::kCCU},
    {O::kCSetBounds, "csetbounds", F::kCCG},
    {O::kCSetBoundsImm, "csetboundsimm", F::kCCU},

    {O::kCSetOffset, "csetoffset", F::kCCG},
    {O::kCIncOffset, "cincoffset", F::kCCG},
    {O::kCIncOffsetImm, "cincoffsetimm", F::kCCI},
    {O::kCSetAddr, "csetaddr", F::kCCG},
    {O::kCAndAddr, "candaddr", F::kCCG},
};

// Byte-indexed lookup, built once.
const std::array<const OpcodeInfo*, 256>& ByteIndex() {
  static const auto index = [] {
    std::array<const OpcodeInfo*, 256> out{};
    for (const auto& info : kTable) {
      out[static_cast<uint8_t>(info.opcode)] = &info;
    }
    return out;
  }();
  return index;
}

std::string Mem(int32_t imm, int cap) { return fmt::format("{}(c{})", imm, cap); }

}  // namespace

std::span<const OpcodeInfo> OpcodeTable() { return kTable; }

const OpcodeInfo* FindOpcode(uint8_t byte) { return ByteIndex()[byte]; }

const OpcodeInfo* FindMnemonic(std::string_view mnemonic) {
  std::string lower(mnemonic);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const auto& info : kTable) {
    if (info.mnemonic == lower) return &info;
  }
  return nullptr;
}

const OpcodeInfo& Info(Opcode opcode) {
  return *ByteIndex()[static_cast<uint8_t>(opcode)];
}

uint64_t Encode(const Instruction& instr) {
  return uint64_t{static_cast<uint8_t>(instr.opcode)} |
         uint64_t{instr.rd} << 8 | uint64_t{instr.rs1} << 16 |
         uint64_t{instr.rs2} << 24 |
         uint64_t{static_cast<uint32_t>(instr.imm)} << 32;
}

Expected<Instruction, DecodeError> Decode(uint64_t word) {
  const uint8_t op = word & 0xff;
  const OpcodeInfo* info = FindOpcode(op);
  if (info == nullptr) {
    return Unexpected(
        DecodeError{word, fmt::format("unknown opcode {:#04x}", op)});
  }
  Instruction instr;
  instr.opcode = info->opcode;
  instr.rd = (word >> 8) & 0xff;
  instr.rs1 = (word >> 16) & 0xff;
  instr.rs2 = (word >> 24) & 0xff;
  instr.imm = static_cast<int32_t>(static_cast<uint32_t>(word >> 32));
  if (instr.rd >= kNumRegisters || instr.rs1 >= kNumRegisters ||
      instr.rs2 >= kNumRegisters) {
    return Unexpected(DecodeError{word, "register index out of range"});
  }
  return instr;
}

std::string Disassemble(const Instruction& instr) {
  const OpcodeInfo& info = Info(instr.opcode);
  const auto m = info.mnemonic;
  switch (info.format) {
    case F::kNone:
      return std::string(m);
    case F::kGI:
      return fmt::format("{} r{}, {}", m, instr.rd, instr.imm);
    case F::kGG:
      return fmt::format("{} r{}, r{}", m, instr.rd, instr.rs1);
    case F::kGGG:
      return fmt::format("{} r{}, r{}, r{}", m, instr.rd, instr.rs1, instr.rs2);
    case F::kGGI:
      return fmt::format("{} r{}, r{}, {}", m, instr.rd, instr.rs1, instr.imm);
    case F::kGGL:
      return fmt::format("{} r{}, r{}, {:+}", m, instr.rs1, instr.rs2,
                         instr.imm);
    case F::kL:
      return fmt::format("{} {:+}", m, instr.imm);
    case F::kC:
      return fmt::format("{} c{}", m, instr.rs1);
    case F::kCC:
      return fmt::format("{} c{}, c{}", m, instr.rd, instr.rs1);
    case F::kGM:
      return fmt::format("{} r{}, {}", m, instr.rd, Mem(instr.imm, instr.rs2));
    case F::kCM:
      return fmt::format("{} c{}, {}", m, instr.rd, Mem(instr.imm, instr.rs2));
    case F::kStoreGM:
      return fmt::format("{} r{}, {}", m, instr.rs1, Mem(instr.imm, instr.rs2));
    case F::kStoreCM:
      return fmt::format("{} c{}, {}", m, instr.rs1, Mem(instr.imm, instr.rs2));
    case F::kUStoreCGM:
      return fmt::format("{} c{}, r{}, {}", m, instr.rd, instr.rs1,
                         Mem(instr.imm, instr.rs2));
    case F::kUStoreCCM:
      return fmt::format("{} c{}, c{}, {}", m, instr.rd, instr.rs1,
                         Mem(instr.imm, instr.rs2));
    case F::kGC:
      return fmt::format("{} r{}, c{}", m, instr.rd, instr.rs1);
    case F::kCCG:
      return fmt::format("{} c{}, c{}, r{}", m, instr.rd, instr.rs1, instr.rs2);
    case F::kCCI:
      return fmt::format("{} c{}, c{}, {}", m, instr.rd, instr.rs1, instr.imm);
    case F::kCCU:
      return fmt::format("{} c{}, c{}, {}", m, instr.rd, instr.rs1,
                         static_cast<uint32_t>(instr.imm));
  }
  return std::string(m);
}

}  // namespace ucap
