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

#include <set>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace ucap {

void PrintTo(const Scenario& s, std::ostream* os) { *os << s.fixture; }

namespace {

using ::testing::HasSubstr;

class DemoScenarioTest : public ::testing::TestWithParam<Scenario> {};

TEST_P(DemoScenarioTest, Passes) {
  const Verdict v = RunScenario(GetParam(), UCAP_DEMO_DIR);
  EXPECT_TRUE(v.pass) << v.details;
  EXPECT_EQ(v.exit_code, GetParam().expected_exit);
}

TEST_P(DemoScenarioTest, IsDeterministic) {
  const Verdict a = RunScenario(GetParam(), UCAP_DEMO_DIR);
  const Verdict b = RunScenario(GetParam(), UCAP_DEMO_DIR);
  EXPECT_EQ(a.pass, b.pass);
  EXPECT_EQ(a.exit_code, b.exit_code);
  EXPECT_EQ(a.details, b.details);
}

std::string ScenarioName(const ::testing::TestParamInfo<Scenario>& info) {
  return info.param.fixture.substr(0, info.param.fixture.find('.'));
}

INSTANTIATE_TEST_SUITE_P(Demo, DemoScenarioTest,
                         ::testing::ValuesIn(DemoScenarios()), ScenarioName);

TEST(ScenarioSuiteTest, AdversariesCoverEveryCursorModifyingInstruction) {
  std::set<std::string> fixtures;
  for (const auto& s : DemoScenarios()) fixtures.insert(s.fixture);
  for (const char* f :
       {"s3_rollback_csetoffset.s", "s3_rollback_cincoffset.s",
        "s3_rollback_cincoffsetimm.s", "s3_rollback_csetaddr.s",
        "s3_rollback_candaddr.s", "s2_leak_cld.s", "s4_probe_load.s",
        "s4_probe_store.s"}) {
    EXPECT_TRUE(fixtures.count(f)) << f;
  }
  for (const auto& s : DemoScenarios()) {
    if (s.fixture.rfind("s2_", 0) == 0 || s.fixture.rfind("s3_", 0) == 0 ||
        s.fixture.rfind("s4_probe", 0) == 0) {
      EXPECT_GE(s.expected_exit, kTrapExitBase) << s.name;
    }
  }
}

TEST(ScenarioRunnerTest, BuildFailureIsAFailingVerdict) {
  const Scenario s{"broken", "broken.s", 0, {}, {}};
  const Verdict v = RunScenarioSource(s, "frob r1\n");
  EXPECT_FALSE(v.pass);
  EXPECT_THAT(v.details, HasSubstr("broken.s:1:1: error: unknown mnemonic"));
}

TEST(ScenarioRunnerTest, MissingFixture) {
  const Scenario s{"missing", "missing.s", 0, {}, {}};
  EXPECT_FALSE(RunScenario(s, UCAP_DEMO_DIR).pass);
}

TEST(ScenarioRunnerTest, ReportsEveryMismatch) {
  const Scenario s{"wrong", "wrong.s", 3, {{0x100, 1}}, {{2, 9}}};
  const Verdict v = RunScenarioSource(s, "halt\n");
  EXPECT_FALSE(v.pass);
  EXPECT_THAT(v.details, HasSubstr("exit 0 (expected 3)"));
  EXPECT_THAT(v.details, HasSubstr("mem[0x100]"));
  EXPECT_THAT(v.details, HasSubstr("r2 = 0x0 (expected 0x9)"));
}

}  // namespace
}  // namespace ucap
