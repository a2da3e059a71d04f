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


#ifndef UCAP_SCENARIO_H_
#define UCAP_SCENARIO_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ucap/machine.h"

namespace ucap {

// A demo fixture plus everything its run must satisfy.
struct Scenario {
  std::string name;
  std::string fixture;  // file name relative to the fixture directory
  int expected_exit = 0;
  // 64-bit little-endian memory contents after the run.
  std::vector<std::pair<Address, uint64_t>> memory;
  // General-purpose register values after the run.
  std::vector<std::pair<int, uint64_t>> registers;
};

struct Verdict {
  bool pass = false;
  int exit_code = -1;
  std::string details;
};

inline constexpr uint64_t kScenarioMemSize = 65536;
inline constexpr uint64_t kScenarioMaxSteps = 1'000'000;

// Assembles and runs `source`, then checks every expectation. Assembly or
// load failures yield a failing verdict.
Verdict RunScenarioSource(const Scenario& scenario, const std::string& source);

// Reads the fixture from `fixture_dir` and runs it.
Verdict RunScenario(const Scenario& scenario, const std::string& fixture_dir);

// The stack-isolation demo suite, S1 to S5.
const std::vector<Scenario>& DemoScenarios();

}  // namespace ucap

#endif  // UCAP_SCENARIO_H_
