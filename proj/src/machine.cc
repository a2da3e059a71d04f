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

#include "ucap/machine.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include <fmt/format.h>

namespace ucap {

namespace {

Trap CapTrap(const CapError& err, Address pc) {
  return Trap{CauseOf(err), pc, err, err.ToString()};
}

Trap CapTrap(CapErrorKind kind, const Capability& cap,
             std::optional<Address> addr, Address pc) {
  return CapTrap(CapError{kind, DeniedRight::kRead, cap, addr}, pc);
}

uint64_t SignExtend(uint64_t value, uint64_t size) {
  const int shift = 64 - static_cast<int>(size) * 8;
  return static_cast<uint64_t>(static_cast<int64_t>(value << shift) >> shift);
}

// Memory faults after a successful capability check: the capability covers
// addresses that physical memory does not back, or the access is unaligned.
Trap MemTrap(MemError err, const Capability& cap, Address addr, Address pc) {
  return CapTrap(err == MemError::kMisaligned
                     ? CapErrorKind::kAlignmentViolation
                     : CapErrorKind::kBoundsViolation,
                 cap, addr, pc);
}

bool Overlaps(Address a_lo, uint64_t a_len, Address b_lo, uint64_t b_len) {
  if (a_len == 0 || b_len == 0) return false;
  return a_lo < b_lo + b_len && b_lo < a_lo + a_len;
}

bool Within(Address lo, uint64_t len, Address outer_lo, Address outer_hi) {
  return lo >= outer_lo && lo <= outer_hi && len <= outer_hi - lo;
}

std::string FormatTagged(const TaggedCap& tc) {
  return (tc.tag ? "T" : ".") + tc.cap.ToString();
}

std::string FormatEffect(const Effect& e) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, effect::Gpr>) {
          return fmt::format("r{}={:#x}", v.reg, v.value);
        } else if constexpr (std::is_same_v<T, effect::CapReg>) {
          return fmt::format("c{}={}", v.reg, FormatTagged(v.value));
        } else if constexpr (std::is_same_v<T, effect::Store>) {
          return fmt::format("mem[{:#x}]:{}={:#x}", v.addr, v.size, v.value);
        } else if constexpr (std::is_same_v<T, effect::CapStore>) {
          return fmt::format("mem[{:#x}]={}", v.addr, FormatTagged(v.value));
        } else if constexpr (std::is_same_v<T, effect::Branch>) {
          return fmt::format("pc={:#x}", v.target);
        } else if constexpr (std::is_same_v<T, effect::Pcc>) {
          return fmt::format("pcc={}", v.pcc.ToString());
        } else {
          return fmt::format("HALT({})", v.code);
        }
      },
      e);
}

}  // namespace

const char* TrapCauseName(TrapCause cause) {
  switch (cause) {
    case TrapCause::kTagViolation:
      return "TagViolation";
    case TrapCause::kPermissionViolation:
      return "PermissionViolation";
    case TrapCause::kUninitRead:
      return "UninitRead";
    case TrapCause::kBoundsViolation:
      return "BoundsViolation";
    case TrapCause::kAlignmentViolation:
      return "AlignmentViolation";
    case TrapCause::kCursorMonotonicityViolation:
      return "CursorMonotonicityViolation";
    case TrapCause::kShrinkViolation:
      return "ShrinkViolation";
    case TrapCause::kUninitDeriveViolation:
      return "UninitDeriveViolation";
    case TrapCause::kDecodeError:
      return "DecodeError";
  }
  return "Unknown";
}

TrapCause CauseOf(const CapError& err) {
  switch (err.kind) {
    case CapErrorKind::kTagViolation:
      return TrapCause::kTagViolation;
    case CapErrorKind::kPermissionViolation:
      return err.denied == DeniedRight::kUninitRead
                 ? TrapCause::kUninitRead
                 : TrapCause::kPermissionViolation;
    case CapErrorKind::kBoundsViolation:
      return TrapCause::kBoundsViolation;
    case CapErrorKind::kAlignmentViolation:
      return TrapCause::kAlignmentViolation;
    case CapErrorKind::kCursorMonotonicityViolation:
      return TrapCause::kCursorMonotonicityViolation;
    case CapErrorKind::kShrinkViolation:
      return TrapCause::kShrinkViolation;
    case CapErrorKind::kUninitDeriveViolation:
      return TrapCause::kUninitDeriveViolation;
  }
  return TrapCause::kDecodeError;
}

std::string Trap::ToString() const {
  return fmt::format("trap {} at pc={:#x}: {}", TrapCauseName(cause), pc,
                     detail);
}

int ExitCode(const Outcome& outcome) {
  switch (outcome.kind) {
    case Outcome::Kind::kHalted:
      return outcome.halt_code;
    case Outcome::Kind::kTrapped:
      return kTrapExitBase + static_cast<int>(outcome.trap->cause);
    case Outcome::Kind::kStepLimit:
      return kStepLimitExitCode;
  }
  return kStepLimitExitCode;
}

std::string FormatTraceLine(const StepRecord& record) {
  std::string op = "???";
  if (record.instr) {
    op = std::string(Info(record.instr->opcode).mnemonic);
    std::transform(op.begin(), op.end(), op.begin(),
                   [](unsigned char c) { return std::toupper(c); });
  }
  const uint64_t w = record.word;
  std::string line = fmt::format(
      "{} pc={:#x} op={} rd={} rs1={} rs2={} imm={} | effect=", record.step,
      record.pc, op, (w >> 8) & 0xff, (w >> 16) & 0xff, (w >> 24) & 0xff,
      static_cast<int32_t>(static_cast<uint32_t>(w >> 32)));
  if (record.trap) {
    line += fmt::format("TRAP({}) {}", TrapCauseName(record.trap->cause),
                        record.trap->detail);
    return line;
  }
  if (record.effects.empty()) {
    line += "none";
    return line;
  }
  for (size_t i = 0; i < record.effects.size(); ++i) {
    if (i > 0) line += ' ';
    line += FormatEffect(record.effects[i]);
  }
  return line;
}

Expected<Machine, std::string> Machine::Reset(const ProgramImage& image,
                                              uint64_t mem_size) {
  if (mem_size == 0 || mem_size % Memory::kLineSize != 0) {
    return Unexpected(fmt::format("memory size {} is not a multiple of {}",
                                  mem_size, Memory::kLineSize));
  }
  const uint64_t code_len = image.code.size();
  if (!Within(image.code_base, code_len, 0, mem_size)) {
    return Unexpected(fmt::format(
        "image too large: code [{:#x}, +{:#x}) exceeds memory size {:#x}",
        image.code_base, code_len, mem_size));
  }
  if (image.stack_base > image.stack_end || image.stack_end > mem_size) {
    return Unexpected(fmt::format(
        "image too large: stack [{:#x}, {:#x}) exceeds memory size {:#x}",
        image.stack_base, image.stack_end, mem_size));
  }
  const uint64_t stack_len = image.stack_end - image.stack_base;
  if (Overlaps(image.code_base, code_len, image.stack_base, stack_len)) {
    return Unexpected(std::string("overlapping segments: code and stack"));
  }
  const bool entry_ok =
      code_len == 0 ? image.entry == image.code_base
                    : (image.entry >= image.code_base &&
                       image.entry < image.code_base + code_len);
  if (!entry_ok) {
    return Unexpected(
        fmt::format("entry {:#x} outside the code segment", image.entry));
  }

  Machine m(mem_size);
  Address data_lo = ~Address{0};
  Address data_hi = 0;
  for (size_t i = 0; i < image.data.size(); ++i) {
    const DataEntry& entry = image.data[i];
    const uint64_t len = entry.size();
    if (!Within(entry.addr, len, 0, mem_size)) {
      return Unexpected(fmt::format(
          "image too large: data entry at {:#x} exceeds memory size {:#x}",
          entry.addr, mem_size));
    }
    if (Overlaps(entry.addr, len, image.code_base, code_len)) {
      return Unexpected(fmt::format(
          "overlapping segments: data at {:#x} overlaps code", entry.addr));
    }
    for (size_t j = 0; j < i; ++j) {
      if (Overlaps(entry.addr, len, image.data[j].addr, image.data[j].size())) {
        return Unexpected(fmt::format(
            "overlapping segments: data entries at {:#x} and {:#x}",
            image.data[j].addr, entry.addr));
      }
    }
    // Entries inside the stack are initial stack contents, not part of the
    // data segment that c1 covers.
    const bool in_stack =
        len > 0 && Within(entry.addr, len, image.stack_base, image.stack_end);
    if (!in_stack && Overlaps(entry.addr, len, image.stack_base, stack_len)) {
      return Unexpected(fmt::format(
          "overlapping segments: data at {:#x} straddles the stack boundary",
          entry.addr));
    }
    if (!in_stack && len > 0) {
      data_lo = std::min(data_lo, entry.addr);
      data_hi = std::max(data_hi, entry.addr + len);
    }
    if (const auto* bytes = std::get_if<std::vector<uint8_t>>(&entry.payload)) {
      (void)m.memory_.LoadBytes(entry.addr, *bytes);
    } else {
      const auto& tc = std::get<TaggedCap>(entry.payload);
      if (entry.addr % Memory::kLineSize != 0) {
        return Unexpected(fmt::format(
            "capability data entry at {:#x} is not 32-byte aligned",
            entry.addr));
      }
      (void)m.memory_.WriteCap(entry.addr, tc.cap, tc.tag);
    }
  }
  (void)m.memory_.LoadBytes(image.code_base, image.code);

  m.regs_.pcc = *Capability::Make(Permissions::RX(), image.code_base,
                                  image.code_base + code_len, image.entry);
  if (data_lo < data_hi) {
    m.regs_.creg[1] = {
        *Capability::Make(Permissions::RW(), data_lo, data_hi, data_lo), true};
  }
  m.regs_.creg[2] = {*Capability::Make(Permissions::RW(), image.stack_base,
                                       image.stack_end, image.stack_end),
                     true};
  return m;
}

StepRecord Machine::Step() {
  StepRecord rec;
  if (status_ != Status::kRunning) return rec;
  rec.step = ++steps_;
  const Capability pcc = regs_.pcc;
  const Address pc = pcc.cursor();
  rec.pc = pc;

  auto raise = [&](Trap trap) {
    rec.trap = trap;
    trap_ = std::move(trap);
    status_ = Status::kTrapped;
    return rec;
  };

  if (auto ok = CheckAccess(pcc, pc, kInstructionSize, AccessKind::kExecute);
      !ok) {
    return raise(CapTrap(ok.error(), pc));
  }
  auto word = memory_.ReadData(pc, kInstructionSize);
  if (!word) return raise(MemTrap(word.error(), pcc, pc, pc));
  rec.word = *word;
  auto instr = Decode(*word);
  if (!instr) {
    return raise(Trap{TrapCause::kDecodeError, pc, std::nullopt,
                      instr.error().message});
  }
  rec.instr = *instr;
  if (auto done = Execute(*instr, pc, rec.effects); !done) {
    rec.effects.clear();
    regs_.pcc = pcc;
    return raise(done.error());
  }
  return rec;
}

Outcome Machine::Run(uint64_t max_steps,
                     const std::function<void(const StepRecord&)>& on_step) {
  while (status_ == Status::kRunning && steps_ < max_steps) {
    StepRecord rec = Step();
    if (on_step) on_step(rec);
  }
  Outcome out;
  out.steps = steps_;
  switch (status_) {
    case Status::kHalted:
      out.kind = Outcome::Kind::kHalted;
      out.halt_code = halt_code_;
      break;
    case Status::kTrapped:
      out.kind = Outcome::Kind::kTrapped;
      out.trap = trap_;
      break;
    case Status::kRunning:
      out.kind = Outcome::Kind::kStepLimit;
      break;
  }
  return out;
}

Expected<void, Trap> Machine::Execute(const Instruction& in, Address pc,
                                      std::vector<Effect>& effects) {
  auto& gpr = regs_.gpr;
  auto& creg = regs_.creg;
  const OpcodeInfo& info = Info(in.opcode);
  const Address next_pc = pc + kInstructionSize;
  const int64_t imm = in.imm;
  const uint64_t uimm = static_cast<uint32_t>(in.imm);

  auto set_gpr = [&](int reg, uint64_t value) {
    if (reg == 0) return;
    gpr[reg] = value;
    effects.push_back(effect::Gpr{reg, value});
  };
  auto set_creg = [&](int reg, TaggedCap value) {
    creg[reg] = value;
    effects.push_back(effect::CapReg{reg, value});
  };
  auto fail = [&](const CapError& err) {
    return Unexpected(CapTrap(err, pc));
  };
  // Source capability that must carry a tag.
  auto tagged = [&](int reg) -> Expected<Capability, Trap> {
    if (!creg[reg].tag) {
      return Unexpected(
          CapTrap(CapErrorKind::kTagViolation, creg[reg].cap, std::nullopt, pc));
    }
    return creg[reg].cap;
  };
  auto derived = [&](int reg, const CapResult<Capability>& result)
      -> Expected<void, Trap> {
    if (!result) return fail(result.error());
    set_creg(reg, TaggedCap{*result, true});
    return {};
  };
  // Checks an access through `cap` at `ea`, including alignment and
  // physical range.
  auto check = [&](const Capability& cap, Address ea, uint64_t size,
                   AccessKind kind) -> Expected<void, Trap> {
    if (auto ok = CheckAccess(cap, ea, size, kind); !ok) return fail(ok.error());
    if (ea % size != 0) {
      return Unexpected(MemTrap(MemError::kMisaligned, cap, ea, pc));
    }
    if (ea > memory_.size() || size > memory_.size() - ea) {
      return Unexpected(MemTrap(MemError::kOutOfRange, cap, ea, pc));
    }
    return {};
  };
  auto store_data = [&](const Capability& cap, Address ea, uint64_t size,
                        uint64_t value) -> Expected<void, Trap> {
    if (auto ok = check(cap, ea, size, AccessKind::kWrite); !ok) return ok;
    const uint64_t v = size == 8 ? value : value & ((uint64_t{1} << (8 * size)) - 1);
    (void)memory_.WriteData(ea, size, v);
    effects.push_back(effect::Store{ea, size, v});
    return {};
  };
  auto store_cap = [&](const Capability& cap, Address ea,
                       const TaggedCap& value) -> Expected<void, Trap> {
    if (auto ok = check(cap, ea, kCapabilitySize, AccessKind::kWrite); !ok) {
      return ok;
    }
    (void)memory_.WriteCap(ea, value.cap, value.tag);
    effects.push_back(effect::CapStore{ea, value});
    return {};
  };
  auto jump_to = [&](Address target) {
    regs_.pcc = *SetCursor(regs_.pcc, target);
    effects.push_back(effect::Branch{target});
  };
  auto enter = [&](const Capability& target) -> Expected<void, Trap> {
    if (!target.perms().execute() || target.uninit()) {
      return fail(CapError{CapErrorKind::kPermissionViolation,
                           DeniedRight::kExecute, target, target.cursor()});
    }
    regs_.pcc = target;
    effects.push_back(effect::Pcc{target});
    return {};
  };

  // Default fall-through; control transfers overwrite it below.
  regs_.pcc = *SetCursor(regs_.pcc, next_pc);

  switch (in.opcode) {
    case Opcode::kHalt:
      halt_code_ = static_cast<uint8_t>(gpr[2] & 0xff);
      status_ = Status::kHalted;
      effects.push_back(effect::Halt{halt_code_});
      return {};
    case Opcode::kLi:
      set_gpr(in.rd, static_cast<uint64_t>(imm));
      return {};
    case Opcode::kMov:
      set_gpr(in.rd, gpr[in.rs1]);
      return {};
    case Opcode::kAdd:
      set_gpr(in.rd, gpr[in.rs1] + gpr[in.rs2]);
      return {};
    case Opcode::kSub:
      set_gpr(in.rd, gpr[in.rs1] - gpr[in.rs2]);
      return {};
    case Opcode::kAnd:
      set_gpr(in.rd, gpr[in.rs1] & gpr[in.rs2]);
      return {};
    case Opcode::kOr:
      set_gpr(in.rd, gpr[in.rs1] | gpr[in.rs2]);
      return {};
    case Opcode::kXor:
      set_gpr(in.rd, gpr[in.rs1] ^ gpr[in.rs2]);
      return {};
    case Opcode::kSll:
      set_gpr(in.rd, gpr[in.rs1] << (gpr[in.rs2] & 63));
      return {};
    case Opcode::kSrl:
      set_gpr(in.rd, gpr[in.rs1] >> (gpr[in.rs2] & 63));
      return {};
    case Opcode::kSlt:
      set_gpr(in.rd, static_cast<int64_t>(gpr[in.rs1]) <
                             static_cast<int64_t>(gpr[in.rs2])
                         ? 1
                         : 0);
      return {};
    case Opcode::kAddi:
      set_gpr(in.rd, gpr[in.rs1] + static_cast<uint64_t>(imm));
      return {};

    case Opcode::kBeq:
    case Opcode::kBne: {
      const bool equal = gpr[in.rs1] == gpr[in.rs2];
      if (equal == (in.opcode == Opcode::kBeq)) {
        jump_to(next_pc + static_cast<uint64_t>(imm) * kInstructionSize);
      }
      return {};
    }
    case Opcode::kJ:
      jump_to(next_pc + static_cast<uint64_t>(imm) * kInstructionSize);
      return {};
    case Opcode::kCJr: {
      auto target = tagged(in.rs1);
      if (!target) return Unexpected(target.error());
      return enter(*target);
    }
    case Opcode::kCJalr: {
      auto target = tagged(in.rs1);
      if (!target) return Unexpected(target.error());
      const Capability link = regs_.pcc;
      if (auto ok = enter(*target); !ok) return ok;
      set_creg(in.rd, TaggedCap{link, true});
      return {};
    }

    case Opcode::kClb:
    case Opcode::kClh:
    case Opcode::kClw:
    case Opcode::kCld:
    case Opcode::kClbu:
    case Opcode::kClhu:
    case Opcode::kClwu: {
      auto cap = tagged(in.rs2);
      if (!cap) return Unexpected(cap.error());
      const uint64_t size = info.access_size;
      const Address ea = cap->cursor() + static_cast<uint64_t>(imm) * size;
      if (auto ok = check(*cap, ea, size, AccessKind::kRead); !ok) return ok;
      uint64_t value = *memory_.ReadData(ea, size);
      if (info.sign_extend) value = SignExtend(value, size);
      set_gpr(in.rd, value);
      return {};
    }
    case Opcode::kClc: {
      auto cap = tagged(in.rs2);
      if (!cap) return Unexpected(cap.error());
      const Address ea =
          cap->cursor() + static_cast<uint64_t>(imm) * kCapabilitySize;
      if (auto ok = check(*cap, ea, kCapabilitySize, AccessKind::kRead); !ok) {
        return ok;
      }
      set_creg(in.rd, *memory_.ReadCap(ea));
      return {};
    }

    case Opcode::kCsb:
    case Opcode::kCsh:
    case Opcode::kCsw:
    case Opcode::kCsd: {
      auto cap = tagged(in.rs2);
      if (!cap) return Unexpected(cap.error());
      const uint64_t size = info.access_size;
      const Address ea = cap->cursor() + static_cast<uint64_t>(imm) * size;
      return store_data(*cap, ea, size, gpr[in.rs1]);
    }
    case Opcode::kCsc: {
      auto cap = tagged(in.rs2);
      if (!cap) return Unexpected(cap.error());
      const Address ea =
          cap->cursor() + static_cast<uint64_t>(imm) * kCapabilitySize;
      return store_cap(*cap, ea, creg[in.rs1]);
    }

    case Opcode::kUcsb:
    case Opcode::kUcsh:
    case Opcode::kUcsw:
    case Opcode::kUcsd:
    case Opcode::kUcsc: {
      auto cap = tagged(in.rs2);
      if (!cap) return Unexpected(cap.error());
      const uint64_t size = info.access_size;
      const bool decrement = cap->uninit() && in.imm == -1;
      Capability result = *cap;
      Address ea = cap->cursor() + static_cast<uint64_t>(imm) * size;
      if (decrement) {
        auto lowered = LowerCursorAfterStore(*cap, size);
        if (!lowered) return fail(lowered.error());
        result = *lowered;
        ea = lowered->cursor();
      }
      const bool is_cap = in.opcode == Opcode::kUcsc;
      const TaggedCap cap_source = creg[in.rs1];
      auto stored = is_cap ? store_cap(*cap, ea, cap_source)
                           : store_data(*cap, ea, size, gpr[in.rs1]);
      if (!stored) return stored;
      set_creg(in.rd, TaggedCap{result, true});
      return {};
    }

    case Opcode::kCGetPerm:
      set_gpr(in.rd, GetField(creg[in.rs1].cap, CapField::kPerms));
      return {};
    case Opcode::kCGetBase:
      set_gpr(in.rd, GetField(creg[in.rs1].cap, CapField::kBase));
      return {};
    case Opcode::kCGetLen:
      set_gpr(in.rd, GetField(creg[in.rs1].cap, CapField::kLen));
      return {};
    case Opcode::kCGetAddr:
      set_gpr(in.rd, GetField(creg[in.rs1].cap, CapField::kAddr));
      return {};
    case Opcode::kCGetUninit:
      set_gpr(in.rd, GetField(creg[in.rs1].cap, CapField::kUninit));
      return {};

    default:
      break;
  }

  // Remaining opcodes derive a capability from a tagged source in rs1.
  auto src = tagged(in.rs1);
  if (!src) return Unexpected(src.error());
  const Capability& cap = *src;
  const uint64_t operand = gpr[in.rs2];
  switch (in.opcode) {
    case Opcode::kCMove:
      return derived(in.rd, cap);
    case Opcode::kCAndPerm:
      return derived(in.rd, AndPerm(cap, operand));
    case Opcode::kCUninit:
      return derived(in.rd, DeriveUninit(cap));
    case Opcode::kCShrink:
      return derived(in.rd, Shrink(cap, operand));
    case Opcode::kCShrinkImm:
      return derived(in.rd, ShrinkImm(cap, uimm));
    case Opcode::kCSetBounds:
      return derived(in.rd, SetBounds(cap, operand));
    case Opcode::kCSetBoundsImm:
      return derived(in.rd, SetBounds(cap, uimm));
    case Opcode::kCSetOffset:
      return derived(in.rd, SetCursor(cap, cap.base() + operand));
    case Opcode::kCIncOffset:
      return derived(in.rd, SetCursor(cap, cap.cursor() + operand));
    case Opcode::kCIncOffsetImm:
      return derived(in.rd,
                     SetCursor(cap, cap.cursor() + static_cast<uint64_t>(imm)));
    case Opcode::kCSetAddr:
      return derived(in.rd, SetCursor(cap, operand));
    case Opcode::kCAndAddr:
      return derived(in.rd, SetCursor(cap, cap.cursor() & operand));
    default:
      break;
  }
  return Unexpected(Trap{TrapCause::kDecodeError, pc, std::nullopt,
                         "opcode has no execution semantics"});
}

}  // namespace ucap
