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


#include "ucap/isa.h"

#include <random>
#include <set>

#include "gtest/gtest.h"

namespace ucap {
namespace {

TEST(IsaTest, OpcodeTableIsConsistent) {
  std::set<uint8_t> bytes;
  std::set<std::string_view> names;
  for (const OpcodeInfo& info : OpcodeTable()) {
    EXPECT_TRUE(bytes.insert(static_cast<uint8_t>(info.opcode)).second);
    EXPECT_TRUE(names.insert(info.mnemonic).second);
    EXPECT_EQ(FindOpcode(static_cast<uint8_t>(info.opcode)), &info);
    EXPECT_EQ(FindMnemonic(info.mnemonic), &info);
    EXPECT_EQ(&Info(info.opcode), &info);
  }
  EXPECT_EQ(FindOpcode(0x00), nullptr);
  EXPECT_EQ(FindMnemonic("CLD"), FindMnemonic("cld"));
  EXPECT_EQ(FindMnemonic("nop"), nullptr);
}

TEST(IsaTest, AccessSizes) {
  EXPECT_EQ(Info(Opcode::kUcsb).access_size, 1);
  EXPECT_EQ(Info(Opcode::kUcsh).access_size, 2);
  EXPECT_EQ(Info(Opcode::kUcsw).access_size, 4);
  EXPECT_EQ(Info(Opcode::kUcsd).access_size, 8);
  EXPECT_EQ(Info(Opcode::kUcsc).access_size, 32);
  EXPECT_TRUE(Info(Opcode::kClh).sign_extend);
  EXPECT_FALSE(Info(Opcode::kClhu).sign_extend);
}

TEST(IsaTest, EncodingLayout) {
  const Instruction in{Opcode::kUcsd, 3, 4, 5, -1};
  EXPECT_EQ(Encode(in), 0xffffffff'05040333ULL);
}

TEST(IsaTest, ExhaustiveRoundTripOverTheTable) {
  const int32_t imms[] = {0, 1, -1, 8, -8, INT32_MAX, INT32_MIN};
  const uint8_t regs[] = {0, 1, 30, 31};
  for (const OpcodeInfo& info : OpcodeTable()) {
    for (uint8_t rd : regs) {
      for (uint8_t rs1 : regs) {
        for (uint8_t rs2 : regs) {
          for (int32_t imm : imms) {
            const Instruction in{info.opcode, rd, rs1, rs2, imm};
            const uint64_t word = Encode(in);
            auto back = Decode(word);
            ASSERT_TRUE(back.has_value());
            ASSERT_EQ(*back, in);
            ASSERT_EQ(Encode(*back), word);
          }
        }
      }
    }
  }
}

TEST(IsaTest, UnknownOpcodesFailToDecode) {
  for (int byte = 0; byte < 256; ++byte) {
    const bool known = FindOpcode(static_cast<uint8_t>(byte)) != nullptr;
    EXPECT_EQ(Decode(static_cast<uint64_t>(byte)).has_value(), known) << byte;
  }
}

TEST(IsaTest, RegisterFieldsOutOfRangeFailToDecode) {
  const uint64_t base = Encode({Opcode::kAdd, 1, 2, 3, 0});
  for (int field = 1; field <= 3; ++field) {
    const uint64_t word =
        (base & ~(uint64_t{0xff} << (8 * field))) | (uint64_t{32} << (8 * field));
    EXPECT_FALSE(Decode(word).has_value()) << field;
  }
}

TEST(IsaTest, RandomWordsRoundTripWhenTheyDecode) {
  std::mt19937_64 rng(23);
  int decoded = 0;
  for (int i = 0; i < 200000 && decoded < 10000; ++i) {
    uint64_t word = rng();
    const auto table = OpcodeTable();
    word = (word & ~uint64_t{0xff}) |
           static_cast<uint8_t>(table[rng() % table.size()].opcode);
    for (int field = 1; field <= 3; ++field) {
      word &= ~(uint64_t{0xe0} << (8 * field));
    }
    auto in = Decode(word);
    ASSERT_TRUE(in.has_value());
    ASSERT_EQ(Encode(*in), word);
    ++decoded;
  }
  EXPECT_EQ(decoded, 10000);
}

TEST(IsaTest, Disassemble) {
  EXPECT_EQ(Disassemble({Opcode::kUcsd, 3, 4, 3, -1}), "ucsd c3, r4, -1(c3)");
  EXPECT_EQ(Disassemble({Opcode::kBeq, 0, 0, 0, 2}), "beq r0, r0, +2");
  EXPECT_EQ(Disassemble({Opcode::kLi, 3, 0, 0, 7}), "li r3, 7");
  EXPECT_EQ(Disassemble({Opcode::kCld, 4, 0, 3, 0}), "cld r4, 0(c3)");
  EXPECT_EQ(Disassemble({Opcode::kHalt, 0, 0, 0, 0}), "halt");
  EXPECT_EQ(Disassemble({Opcode::kCShrinkImm, 4, 3, 0, 20}),
            "cshrinkimm c4, c3, 20");
}

}  // namespace
}  // namespace ucap
