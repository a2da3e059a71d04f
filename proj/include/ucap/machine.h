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

#ifndef UCAP_MACHINE_H_
#define UCAP_MACHINE_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ucap/capability.h"
#include "ucap/expected.h"
#include "ucap/image.h"
#include "ucap/isa.h"
#include "ucap/memory.h"

namespace ucap {

// Trap causes, numbered as in the CLI exit-code table (exit = 10 + cause).
enum class TrapCause : uint8_t {
  kTagViolation = 0,
  kPermissionViolation = 1,
  kUninitRead = 2,
  kBoundsViolation = 3,
  kAlignmentViolation = 4,
  kCursorMonotonicityViolation = 5,
  kShrinkViolation = 6,
  kUninitDeriveViolation = 7,
  kDecodeError = 8,
};

const char* TrapCauseName(TrapCause cause);
TrapCause CauseOf(const CapError& err);

struct Trap {
  TrapCause cause;
  Address pc = 0;
  // Absent for decode errors.
  std::optional<CapError> cap_error;
  std::string detail;

  std::string ToString() const;
};

struct RegisterFile {
  std::array<uint64_t, kNumRegisters> gpr{};
  std::array<TaggedCap, kNumRegisters> creg{};
  Capability pcc;

  friend bool operator==(const RegisterFile&, const RegisterFile&) = default;
};

enum class Status : uint8_t { kRunning, kHalted, kTrapped };

struct Outcome {
  enum class Kind : uint8_t { kHalted, kTrapped, kStepLimit };
  Kind kind = Kind::kStepLimit;
  uint8_t halt_code = 0;
  std::optional<Trap> trap;
  uint64_t steps = 0;
};

// Process exit code for an outcome: the halt code, 10 + trap cause, or 9 on
// step-limit exhaustion.
inline constexpr int kStepLimitExitCode = 9;
inline constexpr int kTrapExitBase = 10;
int ExitCode(const Outcome& outcome);

// Architectural state changes, reported per step for tracing.
namespace effect {
struct Gpr {
  int reg;
  uint64_t value;
};
struct CapReg {
  int reg;
  TaggedCap value;
};
struct Store {
  Address addr;
  uint64_t size;
  uint64_t value;
};
struct CapStore {
  Address addr;
  TaggedCap value;
};
struct Branch {
  Address target;
};
struct Pcc {
  Capability pcc;
};
struct Halt {
  uint8_t code;
};
}  // namespace effect

using Effect = std::variant<effect::Gpr, effect::CapReg, effect::Store,
                            effect::CapStore, effect::Branch, effect::Pcc,
                            effect::Halt>;

struct StepRecord {
  uint64_t step = 0;
  Address pc = 0;
  uint64_t word = 0;
  std::optional<Instruction> instr;
  std::vector<Effect> effects;
  std::optional<Trap> trap;
};

// `step# pc=0x... op=MNEMONIC rd=.. rs1=.. rs2=.. imm=.. | effect=...`
std::string FormatTraceLine(const StepRecord& record);

// Register and memory state of one simulated machine. Instances are
// independent; distinct machines may run on distinct threads.
class Machine {
 public:
  // Loads the image. On return pcc = (RX, code) at the entry point, c1 spans
  // the data entries outside the stack, c2 = (RW, stack) with its cursor at
  // the top, and every other register is zero / untagged null.
  static Expected<Machine, std::string> Reset(const ProgramImage& image,
                                              uint64_t mem_size);

  // Executes one instruction. Must only be called while running.
  StepRecord Step();

  // Steps until the machine halts, traps or `max_steps` instructions have
  // executed.
  Outcome Run(uint64_t max_steps,
              const std::function<void(const StepRecord&)>& on_step = {});

  Status status() const { return status_; }
  const std::optional<Trap>& trap() const { return trap_; }
  uint8_t halt_code() const { return halt_code_; }
  uint64_t steps() const { return steps_; }

  const RegisterFile& regs() const { return regs_; }
  RegisterFile& mutable_regs() { return regs_; }
  const Memory& memory() const { return memory_; }
  Memory& mutable_memory() { return memory_; }

 private:
  explicit Machine(uint64_t mem_size) : memory_(mem_size) {}

  // Runs `instr` fetched from `pc`, appending its effects. Leaves pcc at the
  // following instruction unless control is transferred.
  Expected<void, Trap> Execute(const Instruction& instr, Address pc,
                               std::vector<Effect>& effects);

  RegisterFile regs_;
  Memory memory_;
  Status status_ = Status::kRunning;
  std::optional<Trap> trap_;
  uint8_t halt_code_ = 0;
  uint64_t steps_ = 0;
};

}  // namespace ucap

#endif  // UCAP_MACHINE_H_
