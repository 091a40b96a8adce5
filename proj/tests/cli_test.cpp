// Copyright 2026 The timfg Authors.
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

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "timfg/cli.hpp"

namespace timfg {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("timfg_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Cli, Example31EmitsRareEventProbability) {
  const auto dir = scratch("e31");
  const auto r = run({"example-3-1", "--N", "4", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "example_3_1.csv").find("\n4,20,"), std::string::npos);
  EXPECT_NE(slurp(dir / "example_3_1.csv").find(",0.25\n"), std::string::npos);
}

TEST(Cli, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  for (const auto& d : {a, b}) {
    ASSERT_EQ(run({"nagent-mc", "--model", "example43", "--action-m", "101", "--nu-k", "20", "--N", "4,6", "--samples",
                   "300", "--seed", "5", "--out", d.string()})
                  .code,
              0);
  }
  for (const char* f : {"nagent_mc.csv", "nagent_mc_flow.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  // The JSON differs only through the output directory, which the hash ignores.
  const auto ja = nlohmann::json::parse(slurp(a / "nagent_mc.json"));
  const auto jb = nlohmann::json::parse(slurp(b / "nagent_mc.json"));
  EXPECT_EQ(ja["provenance"]["config_hash"], jb["provenance"]["config_hash"]);
  EXPECT_EQ(ja["provenance"]["seed"], 5);
}

TEST(Cli, VerifyMfgFlagsDiracHalfAtThreeQuarters) {
  const auto dir = scratch("verify");
  ASSERT_EQ(run({"verify-mfg", "--model", "example31", "--constant-action", "0.5", "--nu-k", "4", "--out", dir.string()}).code, 0);
  const auto j = nlohmann::json::parse(slurp(dir / "verify.json"));
  for (int x = 0; x < 2; ++x) EXPECT_GT(j["residual_map"][x][3].get<double>(), 0.05);
}

TEST(Cli, SavedPolicyReverifiesToRecordedResidual) {
  const auto dir = scratch("roundtrip");
  ASSERT_EQ(run({"solve-consistent", "--action-m", "201", "--nu-k", "40", "--atoms", "0.1:0.5,0.142857142857:0.5",
                 "--out", dir.string()})
                .code,
            0);
  const auto solved = nlohmann::json::parse(slurp(dir / "consistent_result.json"));
  const auto v = dir / "v";
  ASSERT_EQ(run({"verify-mfg", "--action-m", "201", "--atoms", "0.1:0.5,0.142857142857:0.5", "--policy",
                 (dir / "policy.json").string(), "--out", v.string()})
                .code,
            0);
  const auto verified = nlohmann::json::parse(slurp(v / "verify.json"));
  EXPECT_NEAR(verified["residual"].get<double>(), solved["residual"].get<double>(), 1e-12);
}

TEST(Cli, ErrorsNameTheField) {
  const auto dir = scratch("errors");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << R"({"tolerances": {"tail_eps": -1}})";
  }
  auto r = run({"solve-classic", "--config", (dir / "bad.json").string(), "--out", dir.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("tolerances.tail_eps"), std::string::npos);
  r = run({"nagent-mc", "--model", "example31", "--out", dir.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("'seed'"), std::string::npos);
  r = run({"solve-classic", "--model", (dir / "missing.json").string(), "--out", dir.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("'model'"), std::string::npos);
  r = run({"example-3-1", "--N", "6", "--out", dir.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(run({}).code, 0);
}

TEST(Cli, FlagsOverrideConfigAndEnvSetsOutput) {
  const auto dir = scratch("env");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "cfg.json") << R"({"model": "example31", "N": [8], "output_dir": ")" + (dir / "from_cfg").string() + R"("})";
  }
  ASSERT_EQ(run({"example-3-1", "--config", (dir / "cfg.json").string(), "--N", "4"}).code, 0);
  EXPECT_NE(slurp(dir / "from_cfg" / "example_3_1.csv").find("\n4,"), std::string::npos);
  ::setenv(cli::kOutDirEnv, (dir / "from_env").string().c_str(), 1);
  ASSERT_EQ(run({"example-3-1", "--N", "4"}).code, 0);
  ::unsetenv(cli::kOutDirEnv);
  EXPECT_TRUE(fs::exists(dir / "from_env" / "example_3_1.csv"));
}

}  // namespace
}  // namespace timfg
