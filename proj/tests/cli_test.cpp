// Copyright 2026 The ddidd Authors
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

#include <gtest/gtest.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

namespace ddidd {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// One synthesized p1 scenario shared by every test in this file.
class CliTest : public ::testing::Test {
 public:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    std::ofstream(dir_->file("profile.json")) << R"({"n_sources": 1000, "rate_min": 1e-5, "rate_max": 1.0,
                                                   "duration": 1500, "seed": 42})";
    std::ofstream(dir_->file("attacks.json"))
        << R"({"seed": 7, "attacks": [{"kind": "p1", "start": 1200, "end": 1440}]})";
    auto r = invoke({"synth", "--profile", dir_->file("profile.json"), "--attacks", dir_->file("attacks.json"), "--out",
                    dir_->file("attack.jsonl"), "--peace-out", dir_->file("peace.jsonl"), "--split-at", "1200"});
    ASSERT_EQ(r.code, 0) << r.err;
    manifest_ = nlohmann::json::parse(r.out);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string f(const std::string& name) { return dir_->file(name); }
  static std::vector<std::string> traces() { return {"--peace", f("peace.jsonl"), "--attack", f("attack.jsonl")}; }

  static TempDir* dir_;
  static nlohmann::json manifest_;
};

TempDir* CliTest::dir_ = nullptr;
nlohmann::json CliTest::manifest_;

std::vector<std::string> with_traces(std::vector<std::string> args) {
  for (auto& a : CliTest::traces()) args.push_back(std::move(a));
  return args;
}

TEST_F(CliTest, SynthWritesLabeledTracesAndManifest) {
  EXPECT_EQ(manifest_.at("files").size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(f("attack.jsonl.manifest.json")));
  EXPECT_EQ(nlohmann::json::parse(slurp(f("attack.jsonl.manifest.json"))), manifest_);
  double legit = manifest_.at("legit_rate_qps").get<double>();
  double attack = manifest_.at("attacks").at(0).at("qps").get<double>();
  EXPECT_NEAR(attack / legit, 10.0, 0.05);

  // measured on the written trace
  TraceReader in(f("attack.jsonl"));
  QueryRecord r;
  std::size_t a = 0, l = 0;
  while (in.next(r)) {
    if (r.ts >= 1200 && r.ts < 1440) (*r.label == Label::attack ? a : l) += 1;
  }
  EXPECT_NEAR(static_cast<double>(a) / static_cast<double>(l), 10.0, 0.5);
}

TEST_F(CliTest, SynthIsSeedDeterministic) {
  auto args = std::vector<std::string>{"synth", "--profile", f("profile.json"), "--attacks", f("attacks.json"),
                                       "--out",  f("again.jsonl"), "--peace-out", f("again-peace.jsonl"),
                                       "--split-at", "1200"};
  ASSERT_EQ(invoke(args).code, 0);
  EXPECT_EQ(slurp(f("again.jsonl")), slurp(f("attack.jsonl")));
  args[6] = f("other.jsonl");
  args[8] = f("other-peace.jsonl");
  args.insert(args.end(), {"--seed", "43"});
  ASSERT_EQ(invoke(args).code, 0);
  EXPECT_NE(slurp(f("other.jsonl")), slurp(f("attack.jsonl")));
}

TEST_F(CliTest, SynthRejectsBadSpecs) {
  std::ofstream(f("p6.json")) << R"({"attacks": [{"kind": "p6", "start": 10, "end": 20}]})";
  auto r = invoke({"synth", "--profile", f("profile.json"), "--attacks", f("p6.json"), "--out", f("x.jsonl")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("p6"), std::string::npos);
  EXPECT_EQ(invoke({"synth", "--profile", f("nope.json"), "--attacks", f("p6.json"), "--out", f("x.jsonl")}).code, 2);
  EXPECT_EQ(invoke({"synth", "--profile", f("profile.json"), "--attacks", f("attacks.json"), "--out", f("x.jsonl"),
                   "--split-at", "100"})
                .code,
            2);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({"replay", "--no-such-flag"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  auto r = invoke({"learn", "--peace", f("missing.jsonl"), "--out", f("tables")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.jsonl"), std::string::npos);
  EXPECT_EQ(invoke(with_traces({"replay", "--mode", "XYZ"})).code, 2);
  EXPECT_EQ(invoke(with_traces({"replay", "--windows", "4,2"})).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, RuntimeFailureExitsOne) {
  {
    std::ofstream bad(f("bad.jsonl"));
    bad << slurp(f("attack.jsonl")).substr(0, 2000) << "this is not json\n";
  }
  auto r = invoke({"replay", "--peace", f("peace.jsonl"), "--attack", f("bad.jsonl"), "--timeline", f("bad.csv")});
  EXPECT_EQ(r.code, 1) << r.err;
}

TEST_F(CliTest, LearnWritesFourTables) {
  auto r = invoke({"learn", "--peace", f("peace.jsonl"), "--out", f("tables"), "--l-ur", "600"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"allowlist.json", "ttltable.json", "ratetable.json", "fqbaseline.json"}) {
    EXPECT_TRUE(std::filesystem::exists(f("tables/") + name)) << name;
  }
  auto allow = load_allowlist(f("tables/allowlist.json"));
  EXPECT_EQ(allow.clock.learn_span, 600);
  EXPECT_EQ(allow.clock.built_at, 1200);
  auto defaults = invoke({"learn", "--peace", f("peace.jsonl"), "--out", f("tables2")});
  ASSERT_EQ(defaults.code, 0);
  // the default 7200 s period is capped by the 1200 s of peace available
  EXPECT_EQ(load_allowlist(f("tables2/allowlist.json")).clock.learn_span, 1200);
  EXPECT_NE(r.err.find("\"ur_learn\":600"), std::string::npos) << r.err;
  load_ttltable(f("tables/ttltable.json"));
  load_ratetable(f("tables/ratetable.json"));
  load_fqbaseline(f("tables/fqbaseline.json"));
}

TEST_F(CliTest, ReplayReportsAndTimeline) {
  auto r = invoke(with_traces({"replay", "--seed", "3", "--timeline", f("a.csv"), "--deployment-out", f("dep.json")}));
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = nlohmann::json::parse(r.out);
  EXPECT_EQ(rep.at("mode"), "ddidd");
  EXPECT_GE(rep.at("controlled_load_pct").get<double>(), 95.0);
  EXPECT_EQ(rep.at("deployments").at(0).at("pipeline"), "FQ_t");
  auto csv = slurp(f("a.csv"));
  EXPECT_EQ(csv.rfind("ts,incoming_qps,passed_qps,blocked_qps,al,attack_flag,pipeline,events\n", 0), 0u);
  EXPECT_NE(r.err.find("resolved config"), std::string::npos);
  EXPECT_NE(r.err.find("\"seed\":3"), std::string::npos);

  auto again = invoke(with_traces({"replay", "--seed", "3", "--timeline", f("b.csv")}));
  EXPECT_EQ(again.out, r.out);
  EXPECT_EQ(slurp(f("b.csv")), csv);

  auto rendered = invoke({"render", "--deployment", f("dep.json")});
  ASSERT_EQ(rendered.code, 0) << rendered.err;
  EXPECT_EQ(rendered.out, "BLOCK_QNAME_EXACT a.attack\n");
  auto ipt = invoke({"render", "--deployment", f("dep.json"), "--format", "iptables", "--out", f("rules.sh")});
  ASSERT_EQ(ipt.code, 0);
  EXPECT_NE(slurp(f("rules.sh")).find("|01|a|06|attack|00|"), std::string::npos);
  EXPECT_EQ(invoke({"render", "--deployment", f("dep.json"), "--format", "pf"}).code, 2);

  auto text = invoke({"report", f("dep.json")});
  EXPECT_EQ(text.code, 2);  // a deployment is not a report
  std::ofstream(f("rep.json")) << r.out;
  auto human = invoke({"report", f("rep.json")});
  ASSERT_EQ(human.code, 0) << human.err;
  EXPECT_NE(human.out.find("controlled load"), std::string::npos);
}

TEST_F(CliTest, ReplayModes) {
  auto partial = invoke(with_traces({"replay", "--mode", "partial", "--timeline", f("p.csv")}));
  ASSERT_EQ(partial.code, 0);
  auto rp = nlohmann::json::parse(partial.out);
  EXPECT_EQ(rp.at("dropped_by").at("FQ_t"), 0);
  EXPECT_EQ(rp.at("dropped_by").at("FQ_s"), 0);
  auto ur = invoke(with_traces({"replay", "--mode", "UR", "--timeline", f("u.csv")}));
  ASSERT_EQ(ur.code, 0);
  for (const auto& d : nlohmann::json::parse(ur.out).at("deployments")) {
    auto p = d.at("pipeline").get<std::string>();
    EXPECT_TRUE(p == "UR" || p == "-") << p;
  }
}

TEST_F(CliTest, SeedFallsBackToEnvironment) {
  ::setenv("DDIDD_SEED", "77", 1);
  auto r = invoke(with_traces({"replay", "--timeline", f("e.csv")}));
  ::unsetenv("DDIDD_SEED");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("\"seed\":77"), std::string::npos) << r.err;
  ::setenv("DDIDD_SEED", "lots", 1);
  EXPECT_EQ(invoke(with_traces({"replay", "--timeline", f("e.csv")})).code, 2);
  ::unsetenv("DDIDD_SEED");
}

TEST_F(CliTest, CompareMatchesIndividualReplays) {
  auto c = invoke(with_traces({"compare", "--seed", "3"}));
  ASSERT_EQ(c.code, 0) << c.err;
  auto doc = nlohmann::json::parse(c.out);
  const auto& rows = doc.at("rows");
  ASSERT_EQ(rows.size(), 5u);
  std::vector<std::string> modes;
  for (const auto& row : rows) modes.push_back(row.at("mode"));
  EXPECT_EQ(modes, (std::vector<std::string>{"FQ", "UR", "HC", "WR", "ddidd"}));
  EXPECT_NE(c.err.find("attack_drop%"), std::string::npos);
  for (const auto& row : rows) {
    auto mode = row.at("mode").get<std::string>();
    auto single = invoke(with_traces({"replay", "--seed", "3", "--mode", mode, "--timeline", f(mode + ".csv")}));
    ASSERT_EQ(single.code, 0);
    EXPECT_EQ(nlohmann::json::parse(single.out), row.at("report")) << mode;
  }
  // Query names stop a fixed-name flood; per-source rate models cannot.
  EXPECT_GE(rows[0].at("controlled_load_pct").get<double>(), 99.0);
  EXPECT_LE(rows[3].at("controlled_load_pct").get<double>(), 5.0);

  auto text = invoke(with_traces({"compare", "--text", "--modes", "UR,ddidd"}));
  ASSERT_EQ(text.code, 0);
  std::istringstream lines(text.out);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  // columns are right-aligned under their headers
  std::size_t con_end = header.find("con%") + 4;
  EXPECT_EQ(first.rfind("UR", 0), 0u);
  EXPECT_TRUE(std::isdigit(static_cast<unsigned char>(first[con_end - 1]))) << first;
  EXPECT_EQ(first[con_end], ' ') << first;
  EXPECT_EQ(invoke(with_traces({"compare", "--modes", ","})).code, 2);
}

}  // namespace
}  // namespace ddidd
