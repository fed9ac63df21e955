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

#include <algorithm>
#include <numeric>
#include <random>

#include "support.hpp"

namespace ddidd {
namespace {

using testing::ip;
using testing::rec;

TEST(FilterParams, DefaultsMatchTheRecommendedTable) {
  FilterParams p;
  EXPECT_EQ(p.fq_sample, 10'000u);
  EXPECT_DOUBLE_EQ(p.fq_threshold, 0.3);
  EXPECT_DOUBLE_EQ(p.ur_learn, 7200);
  EXPECT_DOUBLE_EQ(p.ur_use, 7200);
  EXPECT_DOUBLE_EQ(p.hc_learn, 7200);
  EXPECT_DOUBLE_EQ(p.hc_use, 7200);
  EXPECT_DOUBLE_EQ(p.wr_learn, 7200);
  EXPECT_DOUBLE_EQ(p.wr_refresh, 1200);
  EXPECT_EQ(p.windows, (std::vector<int>{1, 2, 4, 8, 16, 32, 64, 128, 256}));
  EXPECT_DOUBLE_EQ(p.wr_threshold, 0.5);
  EXPECT_DOUBLE_EQ(p.acceptable_factor, 2.5);
  EXPECT_EQ(p.fq_rule_cap, 5u);
  EXPECT_NO_THROW(p.validate());
}

TEST(FilterParams, ValidateRejectsBadValues) {
  auto bad = [](auto mutate) {
    FilterParams p;
    mutate(p);
    EXPECT_THROW(p.validate(), Error);
  };
  bad([](FilterParams& p) { p.ur_learn = 0; });
  bad([](FilterParams& p) { p.windows = {1, 4, 2}; });
  bad([](FilterParams& p) { p.wr_threshold = 0; });
  bad([](FilterParams& p) { p.acceptable_factor = 1.0; });
  bad([](FilterParams& p) { p.fq_rule_cap = 0; });
}

TEST(UrBuild, DistinctSources) {
  std::vector<QueryRecord> w = {rec(0, "10.0.0.1"), rec(1, "10.0.0.2"), rec(2, "10.0.0.1"), rec(3, "10.0.0.3")};
  auto list = ur_build(w, 7200);
  EXPECT_EQ(list.sources, (SourceSet{ip("10.0.0.1"), ip("10.0.0.2"), ip("10.0.0.3")}));
  EXPECT_DOUBLE_EQ(list.clock.built_at, 4.0);
  EXPECT_DOUBLE_EQ(list.clock.learn_span, 4.0);
  EXPECT_THROW(ur_build(std::vector<QueryRecord>{}, 7200), Error);
}

TEST(UrVerdict, DropsExactlyTheComplementOfTheList) {
  std::mt19937_64 rng(4);
  std::vector<QueryRecord> learn;
  for (int i = 0; i < 300; ++i) learn.push_back(rec(i, testing::random_addr(rng)));
  auto list = ur_build(learn, 7200);
  EXPECT_FALSE(ur_verdict(list, learn[0].view(), 10).dropped());
  for (int i = 0; i < 2000; ++i) {
    auto r = i % 2 ? learn[rng() % learn.size()] : rec(5, testing::random_addr(rng));
    EXPECT_EQ(ur_verdict(list, r.view(), 10).dropped(), !list.contains(r.src));
  }
  auto drop = ur_verdict(list, rec(5, "203.0.113.77").view(), 10);
  EXPECT_TRUE(drop.dropped());
  EXPECT_EQ(*drop.filter, FilterId::UR);
}

TEST(UrVerdict, SelfLearnedSampleHasNoCollateral) {
  std::mt19937_64 rng(6);
  std::vector<QueryRecord> peace;
  for (int i = 0; i < 500; ++i) peace.push_back(rec(i * 0.1, testing::random_addr(rng)));
  FilterRules rules;
  rules.ur = std::make_shared<const AllowList>(ur_build(peace, 7200));
  auto ev = estimate(FilterId::UR, rules, peace, peace, 100, 60, FilterParams{});
  EXPECT_DOUBLE_EQ(ev.cd_estimate, 0.0);
  EXPECT_DOUBLE_EQ(ev.drop_estimate, 0.0);
}

TEST(UrVerdict, RandomSpoofedFloodIsAlmostEntirelyDropped) {
  auto profile = testing::small_profile(300);
  auto legit = gen_legit(profile);
  auto list = ur_build(legit, 7200);
  AttackSpec spec;
  spec.kind = AttackKind::p1;
  spec.start = 300;
  spec.end = 330;
  auto attack = gen_attack(spec, profile);
  ASSERT_GT(attack.size(), 10'000u);
  FilterRules rules;
  rules.ur = std::make_shared<const AllowList>(list);
  auto ev = estimate(FilterId::UR, rules, attack, legit, 1000, 310, FilterParams{});
  EXPECT_GE(ev.drop_estimate, 0.9999);
  EXPECT_DOUBLE_EQ(ev.cd_estimate, 0.0);
}

TEST(HcBuild, CollectsEveryObservedTtl) {
  std::vector<QueryRecord> w = {rec(0, "10.0.0.1", 57), rec(1, "10.0.0.1", 57), rec(2, "10.0.0.1", 58)};
  auto t = hc_build(w, 7200);
  ASSERT_NE(t.find(ip("10.0.0.1")), nullptr);
  const auto& s = *t.find(ip("10.0.0.1"));
  EXPECT_EQ(s.count(), 2u);
  EXPECT_TRUE(s.test(57));
  EXPECT_TRUE(s.test(58));
  try {
    hc_build(std::vector<QueryRecord>{}, 7200);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyWindow);
  }
}

TEST(HcVerdict, Examples) {
  auto t = hc_build(std::vector<QueryRecord>{rec(0, "10.0.0.1", 57)}, 7200);
  EXPECT_FALSE(hc_verdict(t, rec(1, "10.0.0.1", 57).view(), 1).dropped());
  auto v = hc_verdict(t, rec(1, "10.0.0.1", 120).view(), 1);
  EXPECT_TRUE(v.dropped());
  EXPECT_EQ(*v.filter, FilterId::HC);
  EXPECT_FALSE(hc_verdict(t, rec(1, "10.9.9.9", 3).view(), 1).dropped());
}

TEST(HcVerdict, NeverDropsALearnedPair) {
  std::mt19937_64 rng(9);
  std::vector<QueryRecord> w;
  std::vector<Ipv4> srcs;
  for (int i = 0; i < 50; ++i) srcs.push_back(testing::random_addr(rng));
  for (int i = 0; i < 5000; ++i) w.push_back(rec(i * 0.01, srcs[rng() % srcs.size()], static_cast<int>(rng() % 256)));
  auto t = hc_build(w, 7200);
  for (const auto& r : w) EXPECT_FALSE(hc_verdict(t, r.view(), 10).dropped());
}

TEST(TableClock, ExpiredTablesHardFail) {
  auto list = ur_build(std::vector<QueryRecord>{rec(0, "10.0.0.1")}, 100);
  auto t = hc_build(std::vector<QueryRecord>{rec(0, "10.0.0.1")}, 100);
  EXPECT_NO_THROW(ur_verdict(list, rec(101, "10.0.0.1").view(), 101));
  for (auto fn : {std::function<void()>([&] { ur_verdict(list, rec(102, "10.0.0.1").view(), 101.5); }),
                  std::function<void()>([&] { hc_verdict(t, rec(102, "10.0.0.1").view(), 101.5); })}) {
    try {
      fn();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ExpiredState);
    }
  }
}

TEST(ArSelect, Examples) {
  auto a = ip("10.0.0.1"), b = ip("10.0.0.2"), c = ip("10.0.0.3");
  EXPECT_EQ(ar_select({{a, 50}, {b, 30}, {c, 5}}, 85, 40), (std::vector<Ipv4>{a}));
  EXPECT_TRUE(ar_select({{a, 50}, {b, 30}, {c, 5}}, 40, 40).empty());
  EXPECT_EQ(ar_select({{b, 10}, {a, 10}}, 20, 5), (std::vector<Ipv4>{a, b}));
}

TEST(ArSelect, OutputIsMinimalAndDeterministic) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<SourceRate> rates;
    int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) rates.push_back({testing::random_addr(rng), static_cast<double>(rng() % 20)});
    double cl = 0;
    for (const auto& r : rates) cl += r.qps;
    double al = std::uniform_real_distribution<double>(0, cl)(rng);
    auto out = ar_select(rates, cl, al);
    std::shuffle(rates.begin(), rates.end(), rng);
    EXPECT_EQ(ar_select(rates, cl, al), out);
    if (cl <= al) {
      EXPECT_TRUE(out.empty());
      continue;
    }
    auto rate_of = [&](Ipv4 a) {
      return std::find_if(rates.begin(), rates.end(), [&](const SourceRate& r) { return r.src == a; })->qps;
    };
    double removed = 0;
    for (auto x : out) removed += rate_of(x);
    EXPECT_LE(cl - removed, al);
    ASSERT_FALSE(out.empty());
    EXPECT_GT(cl - (removed - rate_of(out.back())), al);
    for (std::size_t i = 1; i < out.size(); ++i) {
      double p = rate_of(out[i - 1]), q = rate_of(out[i]);
      EXPECT_TRUE(p > q || (p == q && out[i - 1] < out[i]));
    }
  }
}

TEST(ArVerdict, DropsBlockedSourcesOnly) {
  SourceSet blocked = {ip("10.0.0.1")};
  EXPECT_EQ(*ar_verdict(blocked, rec(0, "10.0.0.1").view()).filter, FilterId::AR);
  EXPECT_FALSE(ar_verdict(blocked, rec(0, "10.0.0.2").view()).dropped());
}

TEST(Evaluate, FirstDropInPipelineOrderWins) {
  DeploymentState d;
  d.pipeline = {FilterId::UR, FilterId::HC, FilterId::WR};
  d.rules.ur = std::make_shared<const AllowList>(ur_build(std::vector<QueryRecord>{rec(0, "10.0.0.1", 57)}, 7200));
  d.rules.hc = std::make_shared<const TtlTable>(hc_build(std::vector<QueryRecord>{rec(0, "10.0.0.1", 57)}, 7200));
  d.rules.wr_wild = std::make_shared<const SourceSet>(SourceSet{ip("10.0.0.1")});
  FilterParams p;
  EXPECT_EQ(*evaluate(d, rec(1, "10.0.0.9", 57).view(), 1, p).filter, FilterId::UR);
  EXPECT_EQ(*evaluate(d, rec(1, "10.0.0.1", 99).view(), 1, p).filter, FilterId::HC);
  EXPECT_EQ(*evaluate(d, rec(1, "10.0.0.1", 57).view(), 1, p).filter, FilterId::WR);
  d.pipeline = {FilterId::UR};
  EXPECT_FALSE(evaluate(d, rec(1, "10.0.0.1", 57).view(), 1, p).dropped());
}

}  // namespace
}  // namespace ddidd
