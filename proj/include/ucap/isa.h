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

#ifndef UCAP_ISA_H_
#define UCAP_ISA_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ucap/expected.h"

// Instruction set definition. Every instruction is one little-endian 64-bit
// word:
//
//   byte 0     opcode
//   byte 1     rd
//   byte 2     rs1
//   byte 3     rs2
//   bytes 4-7  imm (signed 32-bit)
//
// The opcode numbers below are the published table; docs/isa.md mirrors it.

namespace ucap {

inline constexpr uint64_t kInstructionSize = 8;
inline constexpr int kNumRegisters = 32;

enum class Opcode : uint8_t {
  kHalt = 0x01,
  kLi = 0x02,
  kMov = 0x03,
  kAdd = 0x04,
  kSub = 0x05,
  kAnd = 0x06,
  kOr = 0x07,
  kXor = 0x08,
  kSll = 0x09,
  kSrl = 0x0a,
  kSlt = 0x0b,
  kAddi = 0x0c,

  kBeq = 0x10,
  kBne = 0x11,
  kJ = 0x12,
  kCJr = 0x13,
  kCJalr = 0x14,

  kClb = 0x20,
  kClh = 0x21,
  kClw = 0x22,
  kCld = 0x23,
  kClbu = 0x24,
  kClhu = 0x25,
  kClwu = 0x26,
  kClc = 0x27,

  kCsb = 0x28,
  kCsh = 0x29,
  kCsw = 0x2a,
  kCsd = 0x2b,
  kCsc = 0x2c,

  kUcsb = 0x30,
  kUcsh = 0x31,
  kUcsw = 0x32,
  kUcsd = 0x33,
  kUcsc = 0x34,

  kCGetPerm = 0x40,
  kCGetBase = 0x41,
  kCGetLen = 0x42,
  kCGetAddr = 0x43,
  kCGetUninit = 0x44,

  kCMove = 0x48,
  kCAndPerm = 0x49,
  kCUninit = 0x4a,
  kCShrink = 0x4b,
  kCShrinkImm = 0x4c,
  kCSetBounds = 0x4d,
  kCSetBoundsImm = 0x4e,

  kCSetOffset = 0x50,
  kCIncOffset = 0x51,
  kCIncOffsetImm = 0x52,
  kCSetAddr = 0x53,
  kCAndAddr = 0x54,
};

// Operand shape, shared by the assembler, the disassembler and the trace.
//   g = general-purpose register, c = capability register,
//   i = immediate, m = imm(cN) memory operand, l = branch target.
enum class Format : uint8_t {
  kNone,        // halt
  kGI,          // li    rd, imm
  kGG,          // mov   rd, rs1
  kGGG,         // add   rd, rs1, rs2
  kGGI,         // addi  rd, rs1, imm
  kGGL,         // beq   rs1, rs2, target
  kL,           // j     target
  kC,           // cjr   cs1
  kCC,          // cjalr cd, cs1 / cmove / cuninit
  kGM,          // cld   rd, imm(cs2)
  kCM,          // clc   cd, imm(cs2)
  kStoreGM,     // csd   rs1, imm(cs2)
  kStoreCM,     // csc   cs1, imm(cs2)
  kUStoreCGM,   // ucsd  cd, rs1, imm(cs2)
  kUStoreCCM,   // ucsc  cd, cs1, imm(cs2)
  kGC,          // cgetlen rd, cs1
  kCCG,         // cshrink cd, cs1, rs2
  kCCI,         // cincoffsetimm cd, cs1, imm
  kCCU,         // cshrinkimm cd, cs1, uimm
};

struct OpcodeInfo {
  Opcode opcode;
  std::string_view mnemonic;  // lower case
  Format format;
  // Access width in bytes for loads and stores, 0 otherwise.
  uint8_t access_size = 0;
  bool sign_extend = false;
};

std::span<const OpcodeInfo> OpcodeTable();
const OpcodeInfo* FindOpcode(uint8_t byte);
// Case-insensitive.
const OpcodeInfo* FindMnemonic(std::string_view mnemonic);
const OpcodeInfo& Info(Opcode opcode);

struct Instruction {
  Opcode opcode = Opcode::kHalt;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int32_t imm = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct DecodeError {
  uint64_t word;
  std::string message;
};

uint64_t Encode(const Instruction& instr);
// Fails on unassigned opcodes and register fields >= 32.
Expected<Instruction, DecodeError> Decode(uint64_t word);

// Assembly syntax, e.g. "ucsd c3, r4, -1(c3)". Branch targets print as a
// signed instruction count.
std::string Disassemble(const Instruction& instr);

}  // namespace ucap

#endif  // UCAP_ISA_H_
