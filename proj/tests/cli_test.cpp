// Copyright 2026 The Proxtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the proxtrace binary end to end. The build passes its path in the
// PROXTRACE_CLI definition.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cli_ = PROXTRACE_CLI;
    ASSERT_TRUE(fs::exists(cli_)) << cli_;
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("proxtrace_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  // Runs `env_prefix cli args`, discarding output, and returns the exit code.
  int Run(const std::string& args, const std::string& env_prefix = "") const {
    const std::string cmd = env_prefix + " '" + cli_ + "' " + args + " > '" +
                            (dir_ / "stdout.txt").string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string Out(const std::string& sub) const { return "--out '" + (dir_ / sub).string() + "'"; }

  static std::string Slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> Lines(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
  }

  std::string cli_;
  fs::path dir_;
};

TEST_F(CliTest, TablesWritesThreeFiles) {
  ASSERT_EQ(Run("tables " + Out("t")), 0);
  for (const char* name : {"table3_pfa_targets.csv", "table4_pi_md_av.csv",
                           "table5_performance.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "t" / name)) << name;
  }
  const std::vector<std::string> t4 = Lines(dir_ / "t" / "table4_pi_md_av.csv");
  EXPECT_EQ(t4.size(), 9u);  // header plus eight values of n
}

TEST_F(CliTest, CurvesWritesBothFigures) {
  ASSERT_EQ(Run("curves " + Out("c")), 0);
  EXPECT_TRUE(fs::exists(dir_ / "c" / "fig2_pi_md.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "c" / "fig5_audio.csv"));
}

TEST_F(CliTest, ProtocolRecoversDistances) {
  ASSERT_EQ(Run("protocol --seed 3 --positions 0,2,3.5,5,9 " + Out("p")), 0);
  // Every ordered pair of five devices exchanges one time difference.
  EXPECT_EQ(Lines(dir_ / "p" / "protocol_deltas.csv").size(), 1u + 20u);
  EXPECT_EQ(Lines(dir_ / "p" / "protocol_distances.csv").size(), 1u + 10u);

  ASSERT_EQ(Run("protocol --seed 3 --positions 0,2 " + Out("two")), 0);
  EXPECT_NE(Slurp(dir_ / "stdout.txt").find("recovered 2.000000 m"), std::string::npos)
      << Slurp(dir_ / "stdout.txt");
}

TEST_F(CliTest, SameSeedSameBytes) {
  ASSERT_EQ(Run("protocol --seed 11 " + Out("a")), 0);
  ASSERT_EQ(Run("protocol --seed 11 " + Out("b")), 0);
  for (const char* name :
       {"protocol_transcript.csv", "protocol_deltas.csv", "protocol_distances.csv"}) {
    EXPECT_EQ(Slurp(dir_ / "a" / name), Slurp(dir_ / "b" / name)) << name;
  }
}

TEST_F(CliTest, DspExperimentIsReproducible) {
  const std::string env = "PROXTRACE_DSP_TRIALS=20 PROXTRACE_DSP_ESN0_DB=10";
  ASSERT_EQ(Run("dsp-experiment --seed 5 " + Out("a"), env), 0);
  ASSERT_EQ(Run("dsp-experiment --seed 5 " + Out("b"), env), 0);
  EXPECT_EQ(Slurp(dir_ / "a" / "dsp_trials.csv"), Slurp(dir_ / "b" / "dsp_trials.csv"));
  EXPECT_EQ(Lines(dir_ / "a" / "dsp_trials.csv").size(), 21u);
  for (const char* name : {"dsp_experiment.csv", "dsp_example_rx.f32", "dsp_example_rx.f32.json",
                           "dsp_reference.f32"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / name)) << name;
  }
}

TEST_F(CliTest, ValidateReportsEveryCheck) {
  const int code = Run("validate --seed 2 --trials 1000 " + Out("v"));
  // A check failure is a legitimate outcome; anything else is not.
  EXPECT_TRUE(code == 0 || code == 1) << code;
  EXPECT_GT(Lines(dir_ / "v" / "validate_report.csv").size(), 1u);
  EXPECT_GT(Lines(dir_ / "v" / "episode_trace.csv").size(), 1u);
}

TEST_F(CliTest, ConfigurationErrorsExitTwo) {
  std::ofstream(dir_ / "bad.ini") << "[run]\nno_such_key = 1\n";
  EXPECT_EQ(Run("tables --config '" + (dir_ / "bad.ini").string() + "' " + Out("x")), 2);
  EXPECT_EQ(Run("protocol " + Out("x")), 2);  // no seed
  EXPECT_EQ(Run("tables " + Out("x"), "PROXTRACE_LOGNORMAL_SIGMA_NEAR=-1"), 2);
  EXPECT_EQ(Run("tables --bogus"), 2);
  EXPECT_EQ(Run(""), 2);
}

TEST_F(CliTest, EnvironmentOverridesSeed) {
  ASSERT_EQ(Run("protocol " + Out("e"), "PROXTRACE_RUN_SEED=11"), 0);
  ASSERT_EQ(Run("protocol --seed 11 " + Out("f")), 0);
  EXPECT_EQ(Slurp(dir_ / "e" / "protocol_deltas.csv"), Slurp(dir_ / "f" / "protocol_deltas.csv"));
}

TEST_F(CliTest, IoErrorsExitThree) {
  std::ofstream(dir_ / "blocker") << "not a directory";
  EXPECT_EQ(Run("tables --out '" + (dir_ / "blocker" / "sub").string() + "'"), 3);
  EXPECT_EQ(Run("tables --config '" + (dir_ / "missing.ini").string() + "' " + Out("x")), 3);
}

}  // namespace
