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

#ifndef UCAP_ASSEMBLER_H_
#define UCAP_ASSEMBLER_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ucap/capability.h"
#include "ucap/expected.h"
#include "ucap/image.h"
#include "ucap/isa.h"

// Two-pass assembler. Source syntax, one item per line:
//
//   [label:] mnemonic operand, operand, ...   # comment
//   [label:] .directive operand, ...
//
// Operands are rN, cN, integers (decimal or 0x hex, optionally signed),
// label references, and the memory form imm(cN). Directives:
//
//   .text [ADDR]        code section; ADDR sets the code base
//   .data [ADDR]        data section; ADDR moves the data location counter
//   .stack BASE, END    stack region handed to the program in c2
//   .entry LABEL        entry point (default: first instruction)
//   .word N, ...        64-bit little-endian values
//   .byte N, ...
//   .space N            N zero bytes
//   .cap PERMS, BASE, END, CURSOR    tagged capability, 32-byte aligned;
//                                    PERMS is e.g. R, RW, RX, RW+U, none

namespace ucap {

struct SourceLocation {
  std::string file;
  int line = 0;
  int column = 0;
};

struct Diagnostic {
  SourceLocation location;
  std::string message;

  // "file:line:col: error: message"
  std::string ToString() const;
};

using Diagnostics = std::vector<Diagnostic>;

namespace operand {
struct Gpr {
  int reg;
};
struct Cap {
  int reg;
};
// An integer literal; magnitude and sign kept apart so that the full
// unsigned 64-bit range survives parsing.
struct Number {
  uint64_t magnitude = 0;
  bool negative = false;

  uint64_t bits() const { return negative ? ~magnitude + 1 : magnitude; }
  std::optional<int64_t> AsInt64() const;
};
struct Label {
  std::string name;
};
struct Memory {
  std::variant<Number, Label> offset;
  int cap;
};
struct Perms {
  Permissions perms;
};
}  // namespace operand

using OperandValue = std::variant<operand::Gpr, operand::Cap, operand::Number,
                                  operand::Label, operand::Memory,
                                  operand::Perms>;

struct Operand {
  OperandValue value;
  int column = 0;
};

struct InstructionItem {
  const OpcodeInfo* info = nullptr;
  std::vector<Operand> operands;
};

struct DirectiveItem {
  std::string name;  // without the leading '.', lower case
  std::vector<Operand> operands;
};

struct SourceLine {
  int line = 0;
  int column = 0;  // of the mnemonic or directive
  std::vector<std::string> labels;
  std::variant<std::monostate, InstructionItem, DirectiveItem> item;
};

struct SourceUnit {
  std::string file;
  std::vector<SourceLine> lines;
};

// Parses and shape-checks every line. Collects all diagnostics rather than
// stopping at the first.
Expected<SourceUnit, Diagnostics> Parse(std::string_view source,
                                        std::string file = "<input>");

// Pass 1 assigns addresses; pass 2 resolves labels and encodes.
Expected<ProgramImage, Diagnostics> Assemble(const SourceUnit& unit);

Expected<ProgramImage, Diagnostics> AssembleSource(
    std::string_view source, std::string file = "<input>");

}  // namespace ucap

#endif  // UCAP_ASSEMBLER_H_
