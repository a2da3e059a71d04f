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


#ifndef UCAP_TESTS_TESTING_RANDOM_PROGRAM_H_
#define UCAP_TESTS_TESTING_RANDOM_PROGRAM_H_

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ucap/capability.h"
#include "ucap/image.h"
#include "ucap/isa.h"

namespace ucap::testing {

inline constexpr uint64_t kRandomMemSize = 4096;
inline constexpr uint64_t kRandomMaxInstructions = 200;
inline constexpr uint64_t kRandomMaxSteps = 1000;

// A capability with a valid permission set whose range lies inside
// [0, limit).
Capability RandomCapability(std::mt19937_64& rng, uint64_t limit);

// Random instruction biased towards small registers and the immediates
// that exercise capability rules (-1, small offsets, in-memory addresses).
Instruction RandomInstruction(std::mt19937_64& rng);

// A program for a kRandomMemSize machine: up to kRandomMaxInstructions
// instructions at 0, a few tagged capabilities at 0x800 and a stack at
// [0xc00, 0x1000).
ProgramImage RandomProgram(std::mt19937_64& rng);

// An arbitrary image for serialization tests; not necessarily loadable.
ProgramImage RandomImage(std::mt19937_64& rng);

// Per-step checks over a corpus of random traces.
struct TraceStats {
  uint64_t programs = 0;
  uint64_t steps = 0;
  uint64_t authority_checks = 0;
  uint64_t authority_violations = 0;
  // Indexed by UCS opcode (b, h, w, d, c): distinct cursor decrements seen
  // for imm = -1 on an uninitialized capability.
  std::array<std::set<uint64_t>, 5> decrements;
  uint64_t decrement_checks = 0;
  uint64_t decrement_violations = 0;
  uint64_t zero_decrement_checks = 0;
  uint64_t exclusivity_checks = 0;
  uint64_t exclusivity_violations = 0;
  uint64_t uninit_read_checks = 0;
  uint64_t uninit_read_violations = 0;
  std::vector<std::string> failures;  // first few, for diagnostics

  void Fail(std::string message);
};

// Runs `image` for up to kRandomMaxSteps steps and checks after every step:
//  - reachable authority does not grow, except for Read over the bytes a
//    UCS with imm = -1 has just written below an uninitialized cursor;
//  - UCS with imm = -1 on an uninitialized capability lowers the cursor by
//    exactly the access size, and every other instruction leaves each
//    uninitialized capability's cursor where it was or higher;
//  - reads through an uninitialized capability only touch bytes that were
//    stored earlier in the trace or lie at or above the cursor the
//    capability had when it was created.
void CheckTrace(const ProgramImage& image, TraceStats& stats);

}  // namespace ucap::testing

#endif  // UCAP_TESTS_TESTING_RANDOM_PROGRAM_H_
