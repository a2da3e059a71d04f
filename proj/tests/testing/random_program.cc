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


#include "testing/random_program.h"

#include <fmt/format.h>

#include "testing/oracle.h"
#include "ucap/machine.h"

namespace ucap::testing {

namespace {

constexpr Address kDataBase = 0x800;
constexpr int kDataSlots = 16;
constexpr Address kStackBase = 0xc00;
constexpr Address kStackEnd = 0x1000;
constexpr size_t kMaxFailures = 8;

template <typename T>
T Uniform(std::mt19937_64& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

bool Chance(std::mt19937_64& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

// Registers 1-4 hold the capabilities live after reset and the prologue.
uint8_t RandomReg(std::mt19937_64& rng) {
  if (Chance(rng, 0.6)) return Uniform<uint8_t>(rng, 1, 4);
  return Chance(rng, 0.9) ? Uniform<uint8_t>(rng, 0, 7)
                          : Uniform<uint8_t>(rng, 0, kNumRegisters - 1);
}

bool IsUcs(Opcode op) { return op >= Opcode::kUcsb && op <= Opcode::kUcsc; }

bool IsLoad(Opcode op) { return op >= Opcode::kClb && op <= Opcode::kClc; }

// Instructions whose destination capability derives from creg[rs1].
bool IsDerivation(Opcode op) {
  return op >= Opcode::kCMove && op <= Opcode::kCAndAddr;
}

Instruction Make(Opcode op, int rd, int rs1, int rs2, int32_t imm) {
  return Instruction{op, static_cast<uint8_t>(rd), static_cast<uint8_t>(rs1),
                     static_cast<uint8_t>(rs2), imm};
}

}  // namespace

void TraceStats::Fail(std::string message) {
  if (failures.size() < kMaxFailures) failures.push_back(std::move(message));
}

Capability RandomCapability(std::mt19937_64& rng, uint64_t limit) {
  static constexpr uint8_t kValidPerms[] = {
      0,
      Permissions::kRead,
      Permissions::kWrite,
      Permissions::kExecute,
      Permissions::kRead | Permissions::kWrite,
      Permissions::kRead | Permissions::kExecute,
      Permissions::kWrite | Permissions::kExecute,
      Permissions::kRead | Permissions::kWrite | Permissions::kExecute,
      Permissions::kRead | Permissions::kWrite | Permissions::kUninit,
      Permissions::kRead | Permissions::kWrite | Permissions::kUninit,
      Permissions::kRead | Permissions::kWrite | Permissions::kUninit,
  };
  const uint8_t bits =
      kValidPerms[Uniform<size_t>(rng, 0, std::size(kValidPerms) - 1)];
  const Address base = Uniform<Address>(rng, 0, limit - 1);
  const Address end = Uniform<Address>(rng, base, limit);
  Address cursor;
  switch (Uniform(rng, 0, 3)) {
    case 0:
      cursor = base;
      break;
    case 1:
      cursor = end;
      break;
    default:
      cursor = Uniform<Address>(rng, base, std::max(end, end + 16));
      break;
  }
  return *Capability::Make(*Permissions::FromBits(bits), base, end, cursor);
}

Instruction RandomInstruction(std::mt19937_64& rng) {
  const auto table = OpcodeTable();
  const OpcodeInfo* info = &table[Uniform<size_t>(rng, 0, table.size() - 1)];
  if (Chance(rng, 0.2)) {
    info = &Info(static_cast<Opcode>(
        Uniform<uint8_t>(rng, static_cast<uint8_t>(Opcode::kUcsb),
                         static_cast<uint8_t>(Opcode::kUcsc))));
  }
  Instruction in{info->opcode, RandomReg(rng), RandomReg(rng), RandomReg(rng),
                 0};
  if ((IsUcs(info->opcode) || IsLoad(info->opcode)) && Chance(rng, 0.5)) {
    in.rs2 = 3;
  }
  switch (info->format) {
    case Format::kGI:
      if (Chance(rng, 0.5)) {
        in.imm = Uniform<int32_t>(rng, 0, kRandomMemSize);
      } else if (Chance(rng, 0.6)) {
        in.imm = Uniform<int32_t>(rng, -16, 16);
      } else {
        in.imm = static_cast<int32_t>(rng());
      }
      break;
    case Format::kGGI:
    case Format::kCCI:
      in.imm = Uniform<int32_t>(rng, -64, 64);
      break;
    case Format::kCCU:
      in.imm = Uniform<int32_t>(rng, 0, 256);
      break;
    case Format::kGGL:
    case Format::kL:
      in.imm = Uniform<int32_t>(rng, -6, 6);
      break;
    case Format::kGM:
    case Format::kCM:
    case Format::kStoreGM:
    case Format::kStoreCM:
    case Format::kUStoreCGM:
    case Format::kUStoreCCM:
      if (Chance(rng, 0.4)) {
        in.imm = -1;
      } else if (Chance(rng, 0.8)) {
        in.imm = Uniform<int32_t>(rng, -4, 4);
      } else {
        in.imm = Uniform<int32_t>(rng, -128, 128);
      }
      break;
    default:
      break;
  }
  return in;
}

ProgramImage RandomProgram(std::mt19937_64& rng) {
  ProgramImage image;
  image.code_base = 0;
  image.entry = 0;
  image.stack_base = kStackBase;
  image.stack_end = kStackEnd;

  std::vector<Instruction> code;
  if (Chance(rng, 0.7)) {
    code.push_back(Make(Opcode::kCUninit, 3, 2, 0, 0));
    for (int i = Uniform(rng, 0, 4); i > 0; --i) {
      code.push_back(Make(Opcode::kUcsd, 3, RandomReg(rng), 3, -1));
    }
  }
  if (Chance(rng, 0.5)) code.push_back(Make(Opcode::kClc, 4, 0, 1, 0));
  const uint64_t n = Uniform<uint64_t>(rng, 8, kRandomMaxInstructions);
  while (code.size() < n) code.push_back(RandomInstruction(rng));
  for (const Instruction& in : code) {
    const uint64_t word = Encode(in);
    for (int b = 0; b < 8; ++b) {
      image.code.push_back(static_cast<uint8_t>(word >> (8 * b)));
    }
  }

  std::vector<int> slots(kDataSlots);
  for (int i = 0; i < kDataSlots; ++i) slots[i] = i;
  std::shuffle(slots.begin(), slots.end(), rng);
  const int caps = Uniform(rng, 0, 6);
  for (int i = 0; i < caps; ++i) {
    const Address addr = kDataBase + slots[i] * kCapabilitySize;
    image.data.push_back(DataEntry{
        addr, TaggedCap{RandomCapability(rng, kRandomMemSize),
                        Chance(rng, 0.9)}});
  }
  if (Chance(rng, 0.5)) {
    std::vector<uint8_t> bytes(Uniform<size_t>(rng, 1, 64));
    for (auto& b : bytes) b = static_cast<uint8_t>(rng());
    image.data.push_back(DataEntry{kStackEnd - 64, std::move(bytes)});
  }
  return image;
}

ProgramImage RandomImage(std::mt19937_64& rng) {
  ProgramImage image;
  image.entry = rng();
  image.code_base = rng();
  image.code.resize(8 * Uniform<size_t>(rng, 0, 8));
  for (auto& b : image.code) b = static_cast<uint8_t>(rng());
  image.stack_base = rng();
  image.stack_end = rng();
  const int entries = Uniform(rng, 0, 4);
  for (int i = 0; i < entries; ++i) {
    if (Chance(rng, 0.5)) {
      std::vector<uint8_t> bytes(Uniform<size_t>(rng, 0, 40));
      for (auto& b : bytes) b = static_cast<uint8_t>(rng());
      image.data.push_back(DataEntry{rng(), std::move(bytes)});
    } else {
      image.data.push_back(DataEntry{
          rng(), TaggedCap{RandomCapability(rng, ~uint64_t{0}), Chance(rng, 0.5)}});
    }
  }
  return image;
}

void CheckTrace(const ProgramImage& image, TraceStats& stats) {
  auto reset = Machine::Reset(image, kRandomMemSize);
  if (!reset) {
    stats.Fail("random image does not load: " + reset.error());
    ++stats.authority_violations;
    return;
  }
  Machine& m = *reset;
  ++stats.programs;

  ReachableAuthority reach;
  RightSet before;
  if (!reach.Compute(m, before)) {
    stats.Fail("initial capability outside the oracle space");
    ++stats.authority_violations;
    return;
  }

  // Creation cursor of every uninitialized capability, per register and
  // per memory line, and the bytes stored so far.
  const size_t lines = kRandomMemSize / Memory::kLineSize;
  std::array<Address, kNumRegisters> reg_origin{};
  std::vector<Address> line_origin(lines, 0);
  std::vector<bool> written(kRandomMemSize, false);
  for (size_t line = 0; line < lines; ++line) {
    line_origin[line] = m.memory().ReadCap(line * Memory::kLineSize)->cap.cursor();
  }
  for (int r = 0; r < kNumRegisters; ++r) {
    reg_origin[r] = m.regs().creg[r].cap.cursor();
  }

  RightSet after;
  while (m.status() == Status::kRunning && m.steps() < kRandomMaxSteps) {
    const RegisterFile old = m.regs();
    const std::array<Address, kNumRegisters> old_origin = reg_origin;
    const StepRecord rec = m.Step();
    ++stats.steps;
    const std::string where =
        fmt::format("step {} pc={:#x}", rec.step, rec.pc);

    // Reads through uninitialized capabilities, checked before the step's
    // own stores are recorded.
    if (!rec.trap && rec.instr && IsLoad(rec.instr->opcode)) {
      const Instruction& in = *rec.instr;
      const TaggedCap& src = old.creg[in.rs2];
      if (src.cap.uninit()) {
        ++stats.uninit_read_checks;
        const uint64_t size = Info(in.opcode).access_size;
        const Address ea = src.cap.cursor() + static_cast<uint64_t>(in.imm) * size;
        for (Address a = ea; a < ea + size; ++a) {
          if (!written[a] && a < old_origin[in.rs2]) {
            ++stats.uninit_read_violations;
            stats.Fail(fmt::format("{}: read of {:#x} never written", where, a));
            break;
          }
        }
      }
    }

    bool cap_state_changed = false;
    bool ucs_decrement = false;
    for (const Effect& e : rec.effects) {
      if (const auto* s = std::get_if<effect::Store>(&e)) {
        for (Address a = s->addr; a < s->addr + s->size; ++a) written[a] = true;
        cap_state_changed = true;
      } else if (const auto* s = std::get_if<effect::CapStore>(&e)) {
        for (Address a = s->addr; a < s->addr + kCapabilitySize; ++a) {
          written[a] = true;
        }
        line_origin[s->addr / Memory::kLineSize] = old_origin[rec.instr->rs1];
        cap_state_changed = true;
      } else if (std::holds_alternative<effect::CapReg>(e) ||
                 std::holds_alternative<effect::Pcc>(e)) {
        cap_state_changed = true;
      }
    }

    if (!rec.trap && rec.instr) {
      const Instruction& in = *rec.instr;
      const Opcode op = in.opcode;
      if (IsUcs(op)) {
        const TaggedCap& src = old.creg[in.rs2];
        const TaggedCap& res = m.regs().creg[in.rd];
        const int idx = static_cast<int>(op) - static_cast<int>(Opcode::kUcsb);
        const uint64_t size = Info(op).access_size;
        if (src.cap.uninit() && in.imm == -1) {
          ucs_decrement = true;
          ++stats.decrement_checks;
          const uint64_t amount = src.cap.cursor() - res.cap.cursor();
          stats.decrements[idx].insert(amount);
          if (amount != size) {
            ++stats.decrement_violations;
            stats.Fail(fmt::format("{}: {} lowered the cursor by {}", where,
                                   Info(op).mnemonic, amount));
          }
        } else {
          ++stats.zero_decrement_checks;
          if (res.cap.cursor() != src.cap.cursor()) {
            ++stats.decrement_violations;
            stats.Fail(fmt::format("{}: {} imm={} moved the cursor", where,
                                   Info(op).mnemonic, in.imm));
          }
        }
        reg_origin[in.rd] = old_origin[in.rs2];
      } else if (IsDerivation(op)) {
        const TaggedCap& src = old.creg[in.rs1];
        const TaggedCap& res = m.regs().creg[in.rd];
        if (res.cap.uninit()) {
          ++stats.exclusivity_checks;
          if (res.cap.cursor() < src.cap.cursor()) {
            ++stats.exclusivity_violations;
            stats.Fail(fmt::format("{}: {} lowered a U cursor", where,
                                   Info(op).mnemonic));
          }
        }
        reg_origin[in.rd] =
            op == Opcode::kCUninit ? src.cap.cursor() : old_origin[in.rs1];
      } else if (op == Opcode::kClc) {
        const Address ea = old.creg[in.rs2].cap.cursor() +
                           static_cast<uint64_t>(in.imm) * kCapabilitySize;
        reg_origin[in.rd] = line_origin[ea / Memory::kLineSize];
      }
      // Registers the step did not write keep their cursors. Written ones
      // are covered by the derivation and UCS checks above.
      std::array<bool, kNumRegisters> written_reg{};
      for (const Effect& e : rec.effects) {
        if (const auto* c = std::get_if<effect::CapReg>(&e)) {
          written_reg[c->reg] = true;
        }
      }
      for (int r = 0; r < kNumRegisters; ++r) {
        const TaggedCap& o = old.creg[r];
        const TaggedCap& n = m.regs().creg[r];
        if (!o.tag || !n.tag || !o.cap.uninit() || !n.cap.uninit()) continue;
        if (written_reg[r]) continue;
        ++stats.exclusivity_checks;
        if (n.cap.cursor() < o.cap.cursor()) {
          ++stats.exclusivity_violations;
          stats.Fail(fmt::format("{}: {} lowered the cursor of c{}", where,
                                 Info(op).mnemonic, r));
        }
      }
    }

    if (!cap_state_changed) continue;
    ++stats.authority_checks;
    if (!reach.Compute(m, after)) {
      ++stats.authority_violations;
      stats.Fail(where + ": capability escaped the address space");
      return;
    }
    RightSet allowed = before;
    if (ucs_decrement) {
      const Instruction& in = *rec.instr;
      const Address lo = m.regs().creg[in.rd].cap.cursor();
      for (Address a = lo; a < lo + Info(in.opcode).access_size; ++a) {
        if (before.test(RightIndex(a, AccessKind::kWrite))) {
          allowed.set(RightIndex(a, AccessKind::kRead));
        }
      }
    }
    if ((after & ~allowed).any()) {
      ++stats.authority_violations;
      stats.Fail(where + ": reachable authority grew");
    }
    before = after;
  }
}

}  // namespace ucap::testing
