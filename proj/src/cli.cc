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


#include "ucap/cli.h"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "ucap/assembler.h"
#include "ucap/image.h"

namespace ucap {

namespace {

Expected<std::string, std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Unexpected(fmt::format("cannot open '{}'", path));
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) return Unexpected(fmt::format("cannot read '{}'", path));
  return data;
}

Expected<void, std::string> WriteFile(const std::string& path,
                                      const std::vector<uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Unexpected(fmt::format("cannot create '{}'", path));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) return Unexpected(fmt::format("cannot write '{}'", path));
  return {};
}

Expected<ProgramImage, std::string> LoadImage(const std::string& path) {
  auto data = ReadFile(path);
  if (!data) return Unexpected(data.error());
  const auto* p = reinterpret_cast<const uint8_t*>(data->data());
  auto image = ReadImage(std::span<const uint8_t>(p, data->size()));
  if (!image) return Unexpected(fmt::format("{}: {}", path, image.error()));
  return image;
}

std::optional<uint64_t> ParseAddress(const std::string& text) {
  if (text.empty()) return std::nullopt;
  size_t used = 0;
  uint64_t value = 0;
  try {
    value = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != text.size() || text[0] == '-') return std::nullopt;
  return value;
}

int CmdAsm(const std::string& input, const std::string& output,
           std::ostream& err) {
  auto source = ReadFile(input);
  if (!source) {
    err << "error: " << source.error() << "\n";
    return kIoErrorExitCode;
  }
  auto image = AssembleSource(*source, input);
  if (!image) {
    for (const auto& d : image.error()) err << d.ToString() << "\n";
    return kDiagnosticsExitCode;
  }
  if (auto ok = WriteFile(output, WriteImage(*image)); !ok) {
    err << "error: " << ok.error() << "\n";
    return kIoErrorExitCode;
  }
  return 0;
}

int CmdRun(const std::string& path, const RunConfig& config, std::ostream& out,
           std::ostream& err) {
  auto image = LoadImage(path);
  if (!image) {
    err << "error: " << image.error() << "\n";
    return kIoErrorExitCode;
  }
  auto machine = Machine::Reset(*image, config.mem_size);
  if (!machine) {
    err << "error: " << machine.error() << "\n";
    return kIoErrorExitCode;
  }
  return RunMachine(*machine, config, out, err);
}

int CmdDump(const std::string& path, std::ostream& out, std::ostream& err) {
  auto image = LoadImage(path);
  if (!image) {
    err << "error: " << image.error() << "\n";
    return kIoErrorExitCode;
  }
  out << DescribeImage(*image);
  return 0;
}

}  // namespace

Expected<std::pair<Address, Address>, std::string> ParseRegion(
    const std::string& text) {
  const size_t colon = text.find(':');
  if (colon == std::string::npos) {
    return Unexpected(fmt::format("region '{}' is not START:END", text));
  }
  auto start = ParseAddress(text.substr(0, colon));
  auto end = ParseAddress(text.substr(colon + 1));
  if (!start || !end) {
    return Unexpected(fmt::format("region '{}' has a malformed address", text));
  }
  if (*start > *end) {
    return Unexpected(fmt::format("region '{}' ends before it starts", text));
  }
  return std::make_pair(*start, *end);
}

int RunMachine(Machine& machine, const RunConfig& config, std::ostream& out,
               std::ostream& err) {
  std::function<void(const StepRecord&)> on_step;
  if (config.trace) {
    on_step = [&out](const StepRecord& rec) {
      out << FormatTraceLine(rec) << std::endl;
    };
  }
  const Outcome outcome = machine.Run(config.max_steps, on_step);
  switch (outcome.kind) {
    case Outcome::Kind::kHalted:
      break;
    case Outcome::Kind::kTrapped:
      err << outcome.trap->ToString() << "\n";
      break;
    case Outcome::Kind::kStepLimit:
      err << fmt::format("step limit of {} reached", config.max_steps) << "\n";
      break;
  }
  for (const auto& [start, end] : config.dump_regions) {
    const Address clamped_end = std::min<Address>(end, machine.memory().size());
    if (start >= clamped_end) continue;
    out << machine.memory().Dump(start, clamped_end);
  }
  return ExitCode(outcome);
}

std::string DescribeImage(const ProgramImage& image) {
  std::string out;
  out += fmt::format("entry      {:#x}\n", image.entry);
  out += fmt::format("code       [{:#x}, {:#x}) {} bytes\n", image.code_base,
                     image.code_end(), image.code.size());
  out += fmt::format("stack      [{:#x}, {:#x})\n", image.stack_base,
                     image.stack_end);
  out += fmt::format("data       {} entries\n", image.data.size());
  out += "\n.text\n";
  for (size_t off = 0; off + kInstructionSize <= image.code.size();
       off += kInstructionSize) {
    uint64_t word = 0;
    for (size_t b = 0; b < kInstructionSize; ++b) {
      word |= uint64_t{image.code[off + b]} << (8 * b);
    }
    const auto instr = Decode(word);
    out += fmt::format("{:#08x}: {:016x}  {}\n", image.code_base + off, word,
                       instr ? Disassemble(*instr)
                             : "<" + instr.error().message + ">");
  }
  if (!image.data.empty()) out += "\n.data\n";
  for (const auto& entry : image.data) {
    if (const auto* tc = std::get_if<TaggedCap>(&entry.payload)) {
      out += fmt::format("{:#08x}: cap {}{}\n", entry.addr,
                         tc->tag ? "T" : ".", tc->cap.ToString());
      continue;
    }
    const auto& bytes = std::get<std::vector<uint8_t>>(entry.payload);
    for (size_t off = 0; off < bytes.size(); off += 16) {
      out += fmt::format("{:#08x}:", entry.addr + off);
      for (size_t i = off; i < std::min(bytes.size(), off + 16); ++i) {
        out += fmt::format(" {:02x}", bytes[i]);
      }
      out += "\n";
    }
  }
  return out;
}

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Assembler and simulator for a capability machine with "
               "uninitialized capabilities"};
  app.require_subcommand(1);

  std::string asm_input;
  std::string asm_output = "a.ucap";
  auto* asm_cmd = app.add_subcommand("asm", "Assemble a source file");
  asm_cmd->add_option("input", asm_input, "Assembly source")->required();
  asm_cmd->add_option("-o,--output", asm_output, "Image file to write");

  std::string run_image;
  RunConfig config;
  std::vector<std::string> regions;
  auto* run_cmd = app.add_subcommand("run", "Run an image");
  run_cmd->add_option("image", run_image, "Image file")->required();
  run_cmd->add_option("--mem-size", config.mem_size,
                      "Memory size in bytes (multiple of 32)");
  run_cmd->add_option("--max-steps", config.max_steps, "Step budget");
  run_cmd->add_flag("--trace", config.trace, "Print one line per step");
  run_cmd->add_option("--dump", regions,
                      "Print memory START:END after the run (repeatable)")
      ->allow_extra_args(false);

  std::string dump_image;
  auto* dump_cmd = app.add_subcommand("dump", "Print the contents of an image");
  dump_cmd->add_option("image", dump_image, "Image file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kIoErrorExitCode;
  }

  if (asm_cmd->parsed()) return CmdAsm(asm_input, asm_output, err);
  if (dump_cmd->parsed()) return CmdDump(dump_image, out, err);

  if (config.mem_size == 0 || config.mem_size % Memory::kLineSize != 0) {
    err << fmt::format("error: --mem-size must be a non-zero multiple of {}\n",
                       Memory::kLineSize);
    return kIoErrorExitCode;
  }
  for (const auto& text : regions) {
    auto region = ParseRegion(text);
    if (!region) {
      err << "error: " << region.error() << "\n";
      return kIoErrorExitCode;
    }
    config.dump_regions.push_back(*region);
  }
  return CmdRun(run_image, config, out, err);
}

}  // namespace ucap
