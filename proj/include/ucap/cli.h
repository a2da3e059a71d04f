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


#ifndef UCAP_CLI_H_
#define UCAP_CLI_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ucap/machine.h"

namespace ucap {

// Exit code for unreadable inputs, invalid images and bad command lines.
inline constexpr int kIoErrorExitCode = 2;
// Exit code of `asm` when the source has diagnostics.
inline constexpr int kDiagnosticsExitCode = 1;

struct RunConfig {
  uint64_t mem_size = 65536;
  uint64_t max_steps = 1'000'000;
  bool trace = false;
  std::vector<std::pair<Address, Address>> dump_regions;
};

// Parses "START:END" (decimal or 0x hex) into a half-open range.
Expected<std::pair<Address, Address>, std::string> ParseRegion(
    const std::string& text);

// Runs `machine` to completion under `config`, writing trace lines and
// region dumps to `out` and trap details to `err`. Returns the exit code.
int RunMachine(Machine& machine, const RunConfig& config, std::ostream& out,
               std::ostream& err);

// Human-readable listing of an image: header, disassembly, data entries.
std::string DescribeImage(const ProgramImage& image);

// Entry point of the `ucap` tool: `asm`, `run` and `dump` subcommands.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace ucap

#endif  // UCAP_CLI_H_
