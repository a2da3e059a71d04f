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

#include "ucap/assembler.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

namespace ucap {

namespace {

constexpr uint64_t kMaxSpace = uint64_t{1} << 24;

bool IsIdentStart(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
         c == '.';
}

bool IsIdentifier(std::string_view s) {
  if (s.empty() || !IsIdentStart(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), IsIdentChar);
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Strips surrounding blanks, reporting how many leading characters went.
std::string_view Trim(std::string_view s, size_t* leading = nullptr) {
  size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  size_t e = s.size();
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (leading) *leading = b;
  return s.substr(b, e - b);
}

// "rN" / "cN" with N decimal. Returns the index or nullopt if `s` does not
// have register shape at all; sets `out_of_range` for N > 31.
std::optional<int> RegisterIndex(std::string_view s, char prefix,
                                 bool& out_of_range) {
  out_of_range = false;
  if (s.size() < 2 || s[0] != prefix) return std::nullopt;
  if (!std::all_of(s.begin() + 1, s.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return std::nullopt;
  }
  unsigned value = 0;
  auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), value);
  if (ec != std::errc() || value >= kNumRegisters) {
    out_of_range = true;
    return std::nullopt;
  }
  return static_cast<int>(value);
}

std::optional<operand::Number> ParseNumber(std::string_view s) {
  operand::Number n;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    n.negative = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n.magnitude, base);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  if (n.magnitude == 0) n.negative = false;
  return n;
}

bool LooksNumeric(std::string_view s) {
  if (s.empty()) return false;
  char c = s[0];
  if ((c == '-' || c == '+') && s.size() > 1) c = s[1];
  return std::isdigit(static_cast<unsigned char>(c));
}

std::optional<Permissions> ParsePerms(std::string_view s) {
  const std::string lower = Lower(s);
  if (lower == "none") return Permissions::None();
  uint8_t bits = 0;
  for (char c : lower) {
    switch (c) {
      case 'r':
        bits |= Permissions::kRead;
        break;
      case 'w':
        bits |= Permissions::kWrite;
        break;
      case 'x':
        bits |= Permissions::kExecute;
        break;
      case 'u':
        bits |= Permissions::kUninit;
        break;
      case '+':
        break;
      default:
        return std::nullopt;
    }
  }
  if (bits == 0) return std::nullopt;
  return Permissions::FromBits(bits);
}

class LineParser {
 public:
  LineParser(const std::string& file, int line, Diagnostics& diags)
      : file_(file), line_(line), diags_(diags) {}

  void Error(int column, std::string message) {
    diags_.push_back({{file_, line_, column}, std::move(message)});
  }

  // Classifies one operand. `column` is 1-based.
  std::optional<Operand> ParseOperand(std::string_view text, int column,
                                      bool perms_allowed) {
    Operand op;
    op.column = column;
    bool out_of_range = false;
    if (auto r = RegisterIndex(text, 'r', out_of_range)) {
      op.value = operand::Gpr{*r};
      return op;
    }
    if (out_of_range) {
      Error(column, fmt::format("register '{}' out of range (r0-r31)", text));
      return std::nullopt;
    }
    if (auto c = RegisterIndex(text, 'c', out_of_range)) {
      op.value = operand::Cap{*c};
      return op;
    }
    if (out_of_range) {
      Error(column, fmt::format("register '{}' out of range (c0-c31)", text));
      return std::nullopt;
    }
    if (const size_t open = text.find('('); open != std::string_view::npos) {
      return ParseMemory(text, open, column);
    }
    if (perms_allowed) {
      if (auto perms = ParsePerms(text)) {
        op.value = operand::Perms{*perms};
        return op;
      }
      Error(column, fmt::format("invalid permission set '{}'", text));
      return std::nullopt;
    }
    if (LooksNumeric(text)) {
      auto n = ParseNumber(text);
      if (!n) {
        Error(column, fmt::format("malformed integer '{}'", text));
        return std::nullopt;
      }
      op.value = *n;
      return op;
    }
    if (IsIdentifier(text)) {
      op.value = operand::Label{std::string(text)};
      return op;
    }
    Error(column, fmt::format("malformed operand '{}'", text));
    return std::nullopt;
  }

 private:
  std::optional<Operand> ParseMemory(std::string_view text, size_t open,
                                     int column) {
    if (text.back() != ')') {
      Error(column, fmt::format("malformed memory operand '{}'", text));
      return std::nullopt;
    }
    const std::string_view offset_text = Trim(text.substr(0, open));
    const std::string_view base_text =
        Trim(text.substr(open + 1, text.size() - open - 2));
    operand::Memory mem;
    bool out_of_range = false;
    if (auto c = RegisterIndex(base_text, 'c', out_of_range)) {
      mem.cap = *c;
    } else if (RegisterIndex(base_text, 'r', out_of_range) || out_of_range) {
      Error(column, "memory base must be a capability register");
      return std::nullopt;
    } else {
      Error(column, fmt::format("malformed memory operand '{}'", text));
      return std::nullopt;
    }
    if (offset_text.empty()) {
      mem.offset = operand::Number{};
    } else if (LooksNumeric(offset_text)) {
      auto n = ParseNumber(offset_text);
      if (!n) {
        Error(column, fmt::format("malformed integer '{}'", offset_text));
        return std::nullopt;
      }
      mem.offset = *n;
    } else if (IsIdentifier(offset_text)) {
      mem.offset = operand::Label{std::string(offset_text)};
    } else {
      Error(column, fmt::format("malformed memory offset '{}'", offset_text));
      return std::nullopt;
    }
    return Operand{mem, column};
  }

  const std::string& file_;
  int line_;
  Diagnostics& diags_;
};

// Operand pattern per format: g gpr, c cap, i immediate or label,
// l branch target, m memory.
std::string_view Pattern(Format f) {
  switch (f) {
    case Format::kNone:
      return "";
    case Format::kGI:
      return "gi";
    case Format::kGG:
      return "gg";
    case Format::kGGG:
      return "ggg";
    case Format::kGGI:
      return "ggi";
    case Format::kGGL:
      return "ggl";
    case Format::kL:
      return "l";
    case Format::kC:
      return "c";
    case Format::kCC:
      return "cc";
    case Format::kGM:
    case Format::kStoreGM:
      return "gm";
    case Format::kCM:
    case Format::kStoreCM:
      return "cm";
    case Format::kUStoreCGM:
      return "cgm";
    case Format::kUStoreCCM:
      return "ccm";
    case Format::kGC:
      return "gc";
    case Format::kCCG:
      return "ccg";
    case Format::kCCI:
    case Format::kCCU:
      return "cci";
  }
  return "";
}

bool Matches(char kind, const OperandValue& v) {
  switch (kind) {
    case 'g':
      return std::holds_alternative<operand::Gpr>(v);
    case 'c':
      return std::holds_alternative<operand::Cap>(v);
    case 'i':
    case 'l':
      return std::holds_alternative<operand::Number>(v) ||
             std::holds_alternative<operand::Label>(v);
    case 'm':
      return std::holds_alternative<operand::Memory>(v);
  }
  return false;
}

const char* Expectation(char kind) {
  switch (kind) {
    case 'g':
      return "expected a general-purpose register";
    case 'c':
      return "expected a capability register";
    case 'i':
      return "expected an integer or label";
    case 'l':
      return "expected a branch target";
    case 'm':
      return "expected a memory operand imm(cN)";
  }
  return "unexpected operand";
}

// Directive operand patterns; '*' repeats the previous kind one or more
// times, '?' makes the whole list optional. 'n' number, 'v' number or label,
// 'p' permissions.
struct DirectiveShape {
  std::string_view name;
  std::string_view pattern;
};

constexpr DirectiveShape kDirectives[] = {
    {"text", "?n"},  {"data", "?n"},    {"stack", "nn"}, {"entry", "v"},
    {"word", "v*"},  {"byte", "n*"},    {"space", "n"},  {"cap", "pvvv"},
};

const DirectiveShape* FindDirective(std::string_view name) {
  for (const auto& d : kDirectives) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

bool MatchesDirective(char kind, const OperandValue& v) {
  switch (kind) {
    case 'n':
      return std::holds_alternative<operand::Number>(v);
    case 'v':
      return std::holds_alternative<operand::Number>(v) ||
             std::holds_alternative<operand::Label>(v);
    case 'p':
      return std::holds_alternative<operand::Perms>(v);
  }
  return false;
}

// Splits at top-level commas, returning each piece with its 1-based column.
std::vector<std::pair<std::string_view, int>> SplitOperands(
    std::string_view text, int base_column) {
  std::vector<std::pair<std::string_view, int>> out;
  size_t start = 0;
  int depth = 0;
  for (size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size()) {
      if (text[i] == '(') ++depth;
      if (text[i] == ')') --depth;
      if (text[i] != ',' || depth != 0) continue;
    }
    size_t lead = 0;
    std::string_view piece = Trim(text.substr(start, i - start), &lead);
    out.emplace_back(piece, base_column + static_cast<int>(start + lead));
    start = i + 1;
  }
  return out;
}

void ParseLine(std::string_view raw, int line_no, const std::string& file,
               std::set<std::string>& labels_seen, SourceUnit& unit,
               Diagnostics& diags) {
  LineParser lp(file, line_no, diags);
  std::string_view text = raw;
  if (const size_t hash = text.find('#'); hash != std::string_view::npos) {
    text = text.substr(0, hash);
  }
  SourceLine line;
  line.line = line_no;
  size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() &&
           std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
  };

  // Leading "label:" prefixes.
  while (true) {
    skip_ws();
    size_t end = pos;
    while (end < text.size() && IsIdentChar(text[end])) ++end;
    if (end == pos || end >= text.size() || text[end] != ':') break;
    std::string_view name = text.substr(pos, end - pos);
    const int column = static_cast<int>(pos) + 1;
    if (!IsIdentifier(name)) {
      lp.Error(column, fmt::format("invalid label name '{}'", name));
    } else if (!labels_seen.insert(std::string(name)).second) {
      lp.Error(column, fmt::format("duplicate label '{}'", name));
    } else {
      bool dummy;
      if (RegisterIndex(name, 'r', dummy) || RegisterIndex(name, 'c', dummy) ||
          dummy) {
        lp.Error(column, fmt::format("label '{}' shadows a register", name));
      }
      line.labels.emplace_back(name);
    }
    pos = end + 1;
  }
  skip_ws();
  if (pos >= text.size()) {
    if (!line.labels.empty()) unit.lines.push_back(std::move(line));
    return;
  }

  size_t word_end = pos;
  while (word_end < text.size() &&
         !std::isspace(static_cast<unsigned char>(text[word_end]))) {
    ++word_end;
  }
  const std::string_view word = text.substr(pos, word_end - pos);
  line.column = static_cast<int>(pos) + 1;
  const std::string_view rest = text.substr(word_end);
  std::vector<std::pair<std::string_view, int>> pieces;
  if (!Trim(rest).empty()) {
    pieces = SplitOperands(rest, static_cast<int>(word_end) + 1);
  }
  const size_t errors_before = diags.size();

  if (word[0] == '.') {
    const std::string name = Lower(word.substr(1));
    const DirectiveShape* shape = FindDirective(name);
    if (shape == nullptr) {
      lp.Error(line.column, fmt::format("unknown directive '{}'", word));
      return;
    }
    DirectiveItem item;
    item.name = name;
    for (size_t i = 0; i < pieces.size(); ++i) {
      const auto& [piece, col] = pieces[i];
      if (piece.empty()) {
        lp.Error(col, "empty operand");
        continue;
      }
      const bool perms = shape->pattern.find('p') != std::string_view::npos &&
                         i == 0;
      if (auto op = lp.ParseOperand(piece, col, perms)) {
        item.operands.push_back(std::move(*op));
      }
    }
    if (diags.size() != errors_before) return;
    std::string_view pattern = shape->pattern;
    const bool optional = !pattern.empty() && pattern[0] == '?';
    if (optional) pattern.remove_prefix(1);
    const bool repeat = !pattern.empty() && pattern.back() == '*';
    if (repeat) pattern.remove_suffix(1);
    const size_t n = item.operands.size();
    const bool count_ok = (optional && n == 0) ||
                          (repeat ? n >= pattern.size() : n == pattern.size());
    if (!count_ok) {
      lp.Error(line.column,
               fmt::format(".{} expects {}{} operand(s), got {}", name,
                           repeat ? "at least " : "", pattern.size(), n));
      return;
    }
    for (size_t i = 0; i < n; ++i) {
      const char kind = pattern[std::min(i, pattern.size() - 1)];
      if (!MatchesDirective(kind, item.operands[i].value)) {
        lp.Error(item.operands[i].column,
                 kind == 'n' ? "expected an integer"
                             : "expected an integer or label");
      }
    }
    line.item = std::move(item);
  } else {
    const OpcodeInfo* info = FindMnemonic(word);
    if (info == nullptr) {
      lp.Error(line.column, fmt::format("unknown mnemonic '{}'", word));
      return;
    }
    InstructionItem item;
    item.info = info;
    for (const auto& [piece, col] : pieces) {
      if (piece.empty()) {
        lp.Error(col, "empty operand");
        continue;
      }
      if (auto op = lp.ParseOperand(piece, col, false)) {
        item.operands.push_back(std::move(*op));
      }
    }
    if (diags.size() != errors_before) return;
    const std::string_view pattern = Pattern(info->format);
    if (item.operands.size() != pattern.size()) {
      lp.Error(line.column,
               fmt::format("'{}' expects {} operand(s), got {}",
                           info->mnemonic, pattern.size(),
                           item.operands.size()));
      return;
    }
    for (size_t i = 0; i < pattern.size(); ++i) {
      if (!Matches(pattern[i], item.operands[i].value)) {
        lp.Error(item.operands[i].column, Expectation(pattern[i]));
      }
    }
    line.item = std::move(item);
  }
  if (diags.size() == errors_before) unit.lines.push_back(std::move(line));
}

// ---------------------------------------------------------------------------
// Assembly.

enum class Section : uint8_t { kText, kData };

class AssemblerPass {
 public:
  explicit AssemblerPass(const SourceUnit& unit) : unit_(unit) {}

  Expected<ProgramImage, Diagnostics> Run() {
    AssignAddresses();
    if (!diags_.empty()) return Unexpected(diags_);
    Emit();
    if (!diags_.empty()) return Unexpected(diags_);
    CheckLayout();
    if (!diags_.empty()) return Unexpected(diags_);
    return image_;
  }

 private:
  struct Placed {
    DataEntry entry;
    SourceLocation where;
  };

  void Error(const SourceLine& line, int column, std::string message) {
    diags_.push_back(
        {{unit_.file, line.line, column ? column : line.column},
         std::move(message)});
  }

  static uint64_t DataSize(const DirectiveItem& d) {
    if (d.name == "word") return 8 * d.operands.size();
    if (d.name == "byte") return d.operands.size();
    if (d.name == "space") {
      return std::get<operand::Number>(d.operands[0].value).bits();
    }
    if (d.name == "cap") return kCapabilitySize;
    return 0;
  }

  static bool IsDataDirective(const DirectiveItem& d) {
    return d.name == "word" || d.name == "byte" || d.name == "space" ||
           d.name == "cap";
  }

  // Pass 1: location counters and the symbol table.
  void AssignAddresses() {
    Section section = Section::kText;
    Address text_lc = kDefaultCodeBase;
    Address data_lc = kDefaultDataBase;
    bool code_emitted = false;
    line_addr_.resize(unit_.lines.size());
    for (size_t i = 0; i < unit_.lines.size(); ++i) {
      const SourceLine& line = unit_.lines[i];
      if (const auto* d = std::get_if<DirectiveItem>(&line.item)) {
        if (d->name == "text" || d->name == "data") {
          section = d->name == "text" ? Section::kText : Section::kData;
          if (!d->operands.empty()) {
            const Address addr =
                std::get<operand::Number>(d->operands[0].value).bits();
            if (section == Section::kText) {
              if (code_emitted) {
                Error(line, 0, ".text address must precede the first instruction");
              } else if (addr % kInstructionSize != 0) {
                Error(line, d->operands[0].column,
                      "code base must be 8-byte aligned");
              } else {
                text_lc = addr;
                code_base_ = addr;
              }
            } else {
              data_lc = addr;
            }
          }
        }
      }
      const Address here = section == Section::kText ? text_lc : data_lc;
      line_addr_[i] = here;
      for (const auto& label : line.labels) symbols_[label] = here;

      if (std::holds_alternative<InstructionItem>(line.item)) {
        if (section != Section::kText) {
          Error(line, 0, "instruction outside the .text section");
          continue;
        }
        code_emitted = true;
        text_lc += kInstructionSize;
      } else if (const auto* d = std::get_if<DirectiveItem>(&line.item)) {
        if (!IsDataDirective(*d)) continue;
        if (section != Section::kData) {
          Error(line, 0, fmt::format(".{} outside the .data section", d->name));
          continue;
        }
        const uint64_t size = DataSize(*d);
        if (d->name == "space" && size > kMaxSpace) {
          Error(line, d->operands[0].column, ".space size too large");
          continue;
        }
        data_lc += size;
      }
    }
  }

  std::optional<uint64_t> Resolve(const SourceLine& line, const Operand& op) {
    if (const auto* n = std::get_if<operand::Number>(&op.value)) {
      return n->bits();
    }
    const auto& name = std::get<operand::Label>(op.value).name;
    auto it = symbols_.find(name);
    if (it == symbols_.end()) {
      Error(line, op.column, fmt::format("undefined label '{}'", name));
      return std::nullopt;
    }
    return it->second;
  }

  // Signed 32-bit immediate from a literal or an absolute label address.
  std::optional<int32_t> Imm32(const SourceLine& line, const Operand& op,
                               bool is_unsigned) {
    if (const auto* n = std::get_if<operand::Number>(&op.value)) {
      const bool fits =
          is_unsigned
              ? !n->negative &&
                    n->magnitude <= std::numeric_limits<uint32_t>::max()
              : (n->negative ? n->magnitude <= uint64_t{1} << 31
                             : n->magnitude <= std::numeric_limits<int32_t>::max());
      if (!fits) {
        Error(line, op.column, "immediate out of 32-bit range");
        return std::nullopt;
      }
      return static_cast<int32_t>(static_cast<uint32_t>(n->bits()));
    }
    auto addr = Resolve(line, op);
    if (!addr) return std::nullopt;
    const uint64_t limit = is_unsigned ? std::numeric_limits<uint32_t>::max()
                                       : std::numeric_limits<int32_t>::max();
    if (*addr > limit) {
      Error(line, op.column, "label address out of 32-bit immediate range");
      return std::nullopt;
    }
    return static_cast<int32_t>(static_cast<uint32_t>(*addr));
  }

  // Branch immediates count instructions relative to the next one.
  std::optional<int32_t> BranchImm(const SourceLine& line, const Operand& op,
                                   Address pc) {
    if (std::holds_alternative<operand::Number>(op.value)) {
      return Imm32(line, op, false);
    }
    auto target = Resolve(line, op);
    if (!target) return std::nullopt;
    const Address next = pc + kInstructionSize;
    const int64_t delta = static_cast<int64_t>(*target - next);
    if (delta % static_cast<int64_t>(kInstructionSize) != 0) {
      Error(line, op.column, "branch target is not instruction-aligned");
      return std::nullopt;
    }
    const int64_t count = delta / static_cast<int64_t>(kInstructionSize);
    if (count < std::numeric_limits<int32_t>::min() ||
        count > std::numeric_limits<int32_t>::max()) {
      Error(line, op.column, "branch target out of immediate range");
      return std::nullopt;
    }
    return static_cast<int32_t>(count);
  }

  static int Reg(const Operand& op) {
    if (const auto* g = std::get_if<operand::Gpr>(&op.value)) return g->reg;
    return std::get<operand::Cap>(op.value).reg;
  }

  std::optional<Instruction> Encode(const SourceLine& line,
                                    const InstructionItem& item, Address pc) {
    Instruction in;
    in.opcode = item.info->opcode;
    const auto& ops = item.operands;
    auto mem = [&](const Operand& op) -> bool {
      const auto& m = std::get<operand::Memory>(op.value);
      in.rs2 = static_cast<uint8_t>(m.cap);
      Operand offset{std::visit([](const auto& v) -> OperandValue { return v; },
                                m.offset),
                     op.column};
      auto imm = Imm32(line, offset, false);
      if (!imm) return false;
      in.imm = *imm;
      return true;
    };
    auto imm = [&](const Operand& op, bool is_unsigned) -> bool {
      auto v = Imm32(line, op, is_unsigned);
      if (!v) return false;
      in.imm = *v;
      return true;
    };
    bool ok = true;
    switch (item.info->format) {
      case Format::kNone:
        break;
      case Format::kGI:
        in.rd = Reg(ops[0]);
        ok = imm(ops[1], false);
        break;
      case Format::kGG:
      case Format::kCC:
      case Format::kGC:
        in.rd = Reg(ops[0]);
        in.rs1 = Reg(ops[1]);
        break;
      case Format::kGGG:
      case Format::kCCG:
        in.rd = Reg(ops[0]);
        in.rs1 = Reg(ops[1]);
        in.rs2 = Reg(ops[2]);
        break;
      case Format::kGGI:
      case Format::kCCI:
        in.rd = Reg(ops[0]);
        in.rs1 = Reg(ops[1]);
        ok = imm(ops[2], false);
        break;
      case Format::kCCU:
        in.rd = Reg(ops[0]);
        in.rs1 = Reg(ops[1]);
        ok = imm(ops[2], true);
        break;
      case Format::kGGL: {
        in.rs1 = Reg(ops[0]);
        in.rs2 = Reg(ops[1]);
        auto b = BranchImm(line, ops[2], pc);
        ok = b.has_value();
        if (ok) in.imm = *b;
        break;
      }
      case Format::kL: {
        auto b = BranchImm(line, ops[0], pc);
        ok = b.has_value();
        if (ok) in.imm = *b;
        break;
      }
      case Format::kC:
        in.rs1 = Reg(ops[0]);
        break;
      case Format::kGM:
      case Format::kCM:
        in.rd = Reg(ops[0]);
        ok = mem(ops[1]);
        break;
      case Format::kStoreGM:
      case Format::kStoreCM:
        in.rs1 = Reg(ops[0]);
        ok = mem(ops[1]);
        break;
      case Format::kUStoreCGM:
      case Format::kUStoreCCM:
        in.rd = Reg(ops[0]);
        in.rs1 = Reg(ops[1]);
        ok = mem(ops[2]);
        break;
    }
    if (!ok) return std::nullopt;
    return in;
  }

  void FlushChunk() {
    if (chunk_ && !std::get<std::vector<uint8_t>>(chunk_->entry.payload).empty()) {
      placed_.push_back(std::move(*chunk_));
    }
    chunk_.reset();
  }

  void AppendBytes(const SourceLine& line, Address addr,
                   std::span<const uint8_t> bytes) {
    if (!chunk_ || chunk_->entry.addr + chunk_->entry.size() != addr) {
      FlushChunk();
      chunk_ = Placed{DataEntry{addr, std::vector<uint8_t>{}},
                      {unit_.file, line.line, line.column}};
    }
    auto& buf = std::get<std::vector<uint8_t>>(chunk_->entry.payload);
    buf.insert(buf.end(), bytes.begin(), bytes.end());
  }

  // Pass 2: encoding and data emission.
  void Emit() {
    image_.code_base = code_base_;
    image_.entry = code_base_;
    for (size_t i = 0; i < unit_.lines.size(); ++i) {
      const SourceLine& line = unit_.lines[i];
      const Address here = line_addr_[i];
      if (const auto* item = std::get_if<InstructionItem>(&line.item)) {
        auto in = Encode(line, *item, here);
        if (!in) continue;
        const uint64_t word = ucap::Encode(*in);
        for (int b = 0; b < 8; ++b) {
          image_.code.push_back(static_cast<uint8_t>(word >> (8 * b)));
        }
        continue;
      }
      const auto* d = std::get_if<DirectiveItem>(&line.item);
      if (d == nullptr) continue;
      if (d->name == "word") {
        std::vector<uint8_t> bytes;
        for (const auto& op : d->operands) {
          auto v = Resolve(line, op);
          if (!v) continue;
          for (int b = 0; b < 8; ++b) {
            bytes.push_back(static_cast<uint8_t>(*v >> (8 * b)));
          }
        }
        AppendBytes(line, here, bytes);
      } else if (d->name == "byte") {
        std::vector<uint8_t> bytes;
        for (const auto& op : d->operands) {
          const auto& n = std::get<operand::Number>(op.value);
          if (n.magnitude > (n.negative ? 128u : 255u)) {
            Error(line, op.column, "byte value out of range");
            continue;
          }
          bytes.push_back(static_cast<uint8_t>(n.bits()));
        }
        AppendBytes(line, here, bytes);
      } else if (d->name == "space") {
        std::vector<uint8_t> zeros(DataSize(*d), 0);
        AppendBytes(line, here, zeros);
      } else if (d->name == "cap") {
        EmitCap(line, *d, here);
      } else if (d->name == "stack") {
        const auto base = std::get<operand::Number>(d->operands[0].value).bits();
        const auto end = std::get<operand::Number>(d->operands[1].value).bits();
        if (base > end) {
          Error(line, d->operands[0].column, "stack base above stack end");
          continue;
        }
        image_.stack_base = base;
        image_.stack_end = end;
      } else if (d->name == "entry") {
        if (auto v = Resolve(line, d->operands[0])) {
          entry_ = *v;
          entry_line_ = &line;
        }
      }
    }
    FlushChunk();
    for (auto& p : placed_) image_.data.push_back(p.entry);
    if (entry_) {
      image_.entry = *entry_;
      const bool inside = *entry_ >= image_.code_base &&
                          *entry_ < image_.code_end() &&
                          (*entry_ - image_.code_base) % kInstructionSize == 0;
      if (!inside) {
        Error(*entry_line_, 0,
              fmt::format("entry {:#x} is not an instruction in .text",
                          *entry_));
      }
    }
  }

  void EmitCap(const SourceLine& line, const DirectiveItem& d, Address here) {
    FlushChunk();
    if (here % kCapabilitySize != 0) {
      Error(line, 0,
            fmt::format("unaligned .cap at {:#x} (needs 32-byte alignment)",
                        here));
      return;
    }
    const Permissions perms = std::get<operand::Perms>(d.operands[0].value).perms;
    auto base = Resolve(line, d.operands[1]);
    auto end = Resolve(line, d.operands[2]);
    auto cursor = Resolve(line, d.operands[3]);
    if (!base || !end || !cursor) return;
    auto cap = Capability::Make(perms, *base, *end, *cursor);
    if (!cap) {
      Error(line, 0,
            *base > *end ? "invalid capability: base above end"
                         : "invalid capability: U cursor below base");
      return;
    }
    placed_.push_back(Placed{DataEntry{here, TaggedCap{*cap, true}},
                             {unit_.file, line.line, line.column}});
  }

  void CheckLayout() {
    const Address code_lo = image_.code_base;
    const uint64_t code_len = image_.code.size();
    auto overlaps = [](Address a, uint64_t al, Address b, uint64_t bl) {
      return al && bl && a < b + bl && b < a + al;
    };
    for (size_t i = 0; i < placed_.size(); ++i) {
      const auto& p = placed_[i];
      if (overlaps(p.entry.addr, p.entry.size(), code_lo, code_len)) {
        diags_.push_back({p.where, fmt::format("data at {:#x} overlaps code",
                                               p.entry.addr)});
      }
      for (size_t j = 0; j < i; ++j) {
        const auto& q = placed_[j];
        if (overlaps(p.entry.addr, p.entry.size(), q.entry.addr,
                     q.entry.size())) {
          diags_.push_back(
              {p.where, fmt::format("data at {:#x} overlaps data defined at "
                                    "line {}",
                                    p.entry.addr, q.where.line)});
        }
      }
    }
  }

  const SourceUnit& unit_;
  Diagnostics diags_;
  std::map<std::string, Address> symbols_;
  std::vector<Address> line_addr_;
  Address code_base_ = kDefaultCodeBase;
  ProgramImage image_;
  std::optional<Placed> chunk_;
  std::vector<Placed> placed_;
  std::optional<Address> entry_;
  const SourceLine* entry_line_ = nullptr;
};

}  // namespace

std::optional<int64_t> operand::Number::AsInt64() const {
  constexpr uint64_t kMax = std::numeric_limits<int64_t>::max();
  if (negative) {
    if (magnitude > kMax + 1) return std::nullopt;
    return static_cast<int64_t>(~magnitude + 1);
  }
  if (magnitude > kMax) return std::nullopt;
  return static_cast<int64_t>(magnitude);
}

std::string Diagnostic::ToString() const {
  return fmt::format("{}:{}:{}: error: {}", location.file, location.line,
                     location.column, message);
}

Expected<SourceUnit, Diagnostics> Parse(std::string_view source,
                                        std::string file) {
  SourceUnit unit;
  unit.file = std::move(file);
  Diagnostics diags;
  std::set<std::string> labels_seen;
  int line_no = 0;
  size_t start = 0;
  while (start <= source.size()) {
    size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    std::string_view raw = source.substr(start, end - start);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    ParseLine(raw, ++line_no, unit.file, labels_seen, unit, diags);
    start = end + 1;
  }
  if (!diags.empty()) return Unexpected(std::move(diags));
  return unit;
}

Expected<ProgramImage, Diagnostics> Assemble(const SourceUnit& unit) {
  return AssemblerPass(unit).Run();
}

Expected<ProgramImage, Diagnostics> AssembleSource(std::string_view source,
                                                   std::string file) {
  auto unit = Parse(source, std::move(file));
  if (!unit) return Unexpected(unit.error());
  return Assemble(*unit);
}

}  // namespace ucap
