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


#include "ucap/scenario.h"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <fstream>
#include <iterator>

#include "ucap/assembler.h"

namespace ucap {

namespace {

constexpr int kUninitReadExit = kTrapExitBase + 2;
constexpr int kBoundsExit = kTrapExitBase + 3;
constexpr int kCursorExit = kTrapExitBase + 5;

constexpr uint64_t kSecret = 0xc0ffee;

std::vector<Scenario> BuildScenarios() {
  std::vector<Scenario> s;
  s.push_back({"S1 push/pop", "s1_push_pop.s", 0,
               {{0xfff8, 0x11}, {0xfff0, 0x22}, {0xffe8, 0x33}},
               {{5, 0x33}, {6, 0x22}, {7, 0x11}, {8, 0xffe8}}});
  for (const char* load : {"cld", "clb", "clwu", "clc"}) {
    s.push_back({fmt::format("S2 stale-data leak via {}", load),
                 fmt::format("s2_leak_{}.s", load), kUninitReadExit,
                 {{0xfff0, kSecret}},
                 {{4, 0}}});
  }
  for (const char* op :
       {"csetoffset", "cincoffset", "cincoffsetimm", "csetaddr", "candaddr"}) {
    s.push_back({fmt::format("S3 cursor rollback via {}", op),
                 fmt::format("s3_rollback_{}.s", op), kCursorExit,
                 {{0xfff8, kSecret}},
                 {{4, kSecret}}});
  }
  s.push_back({"S4 benign callee", "s4_benign.s", 0,
               {{0xfff8, kSecret}, {0xfff0, 0xbeef}, {0xffe8, 0x55}},
               {{7, 0x55}, {8, 0xbeef}, {9, kSecret}}});
  for (const char* probe : {"load", "store", "ucs", "offset", "setbounds"}) {
    s.push_back({fmt::format("S4 frame probe via {}", probe),
                 fmt::format("s4_probe_{}.s", probe), kBoundsExit,
                 {{0xfff8, kSecret}, {0xfff0, 0xbeef}},
                 {{7, 0}}});
  }
  s.push_back({"S5 leaky callee", "s5_leaky.s", kUninitReadExit,
               {{0xfff8, kSecret}},
               {{7, 0}}});
  s.push_back({"S5 clearing callee", "s5_clearing.s", 0,
               {{0xfff8, 0x77}},
               {{7, 0x77}, {8, 0}}});
  return s;
}

std::string Describe(const Outcome& outcome) {
  switch (outcome.kind) {
    case Outcome::Kind::kHalted:
      return fmt::format("halted({})", outcome.halt_code);
    case Outcome::Kind::kTrapped:
      return outcome.trap->ToString();
    case Outcome::Kind::kStepLimit:
      return "step limit";
  }
  return "";
}

}  // namespace

Verdict RunScenarioSource(const Scenario& scenario, const std::string& source) {
  Verdict v;
  auto image = AssembleSource(source, scenario.fixture);
  if (!image) {
    v.details = "fixture does not assemble:";
    for (const auto& d : image.error()) v.details += "\n  " + d.ToString();
    return v;
  }
  auto machine = Machine::Reset(*image, kScenarioMemSize);
  if (!machine) {
    v.details = "fixture does not load: " + machine.error();
    return v;
  }
  const Outcome outcome = machine->Run(kScenarioMaxSteps);
  v.exit_code = ExitCode(outcome);
  std::vector<std::string> problems;
  if (v.exit_code != scenario.expected_exit) {
    problems.push_back(fmt::format("exit {} (expected {}): {}", v.exit_code,
                                   scenario.expected_exit, Describe(outcome)));
  }
  for (const auto& [addr, want] : scenario.memory) {
    auto got = machine->memory().ReadData(addr, 8);
    if (!got || *got != want) {
      problems.push_back(fmt::format("mem[{:#x}] = {:#x} (expected {:#x})",
                                     addr, got ? *got : 0, want));
    }
  }
  for (const auto& [reg, want] : scenario.registers) {
    const uint64_t got = machine->regs().gpr[reg];
    if (got != want) {
      problems.push_back(
          fmt::format("r{} = {:#x} (expected {:#x})", reg, got, want));
    }
  }
  v.pass = problems.empty();
  v.details = v.pass ? Describe(outcome) : fmt::format("{}", fmt::join(problems, "; "));
  return v;
}

Verdict RunScenario(const Scenario& scenario, const std::string& fixture_dir) {
  const std::string path = fixture_dir + "/" + scenario.fixture;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    Verdict v;
    v.details = fmt::format("cannot open fixture '{}'", path);
    return v;
  }
  const std::string source((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  return RunScenarioSource(scenario, source);
}

const std::vector<Scenario>& DemoScenarios() {
  static const std::vector<Scenario> kScenarios = BuildScenarios();
  return kScenarios;
}

}  // namespace ucap
