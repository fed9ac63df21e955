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
#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"

namespace ddidd {
namespace {

using testing::ip;
using testing::rec;

FilterParams windows(std::vector<int> w, double learn) {
  FilterParams p;
  p.windows = std::move(w);
  p.wr_learn = learn;
  return p;
}

TEST(WrLearn, ConstantRateHasZeroSpread) {
  std::vector<QueryRecord> w;
  for (int s = 0; s < 512; ++s) {
    w.push_back(rec(s + 0.1, "10.0.0.1"));
    w.push_back(rec(s + 0.6, "10.0.0.1"));
  }
  auto t = wr_learn(w, windows({1, 4}, 512));
  auto idx = t.find(ip("10.0.0.1"));
  ASSERT_TRUE(idx);
  EXPECT_DOUBLE_EQ(t.mean_of(*idx)[1], 8.0);
  EXPECT_DOUBLE_EQ(t.std_of(*idx)[1], 0.0);
  EXPECT_DOUBLE_EQ(t.mean_of(*idx)[0], 2.0);
}

TEST(WrLearn, DefaultWindowsGiveNineModelsPerSource) {
  std::vector<QueryRecord> w;
  for (int s = 0; s < 600; ++s) w.push_back(rec(s, s % 2 ? "10.0.0.1" : "10.0.0.2"));
  auto t = wr_learn(w, FilterParams{});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.windows.size(), 9u);
  EXPECT_EQ(t.mean.size(), 18u);
  EXPECT_EQ(t.stddev.size(), 18u);
  for (double s : t.stddev) EXPECT_GE(s, 0.0);
  EXPECT_EQ(t.deviance, std::vector<double>(2, 0.0));
}

// A steady source, plus a 10-second burst at 100x the usual aggregate sent
// by a second source. Every window touching the burst must be left out of
// every model, at every window size.
TEST(WrLearn, HighLoadWindowsAreExcludedFromEveryModel) {
  std::vector<QueryRecord> w;
  const int kSeconds = 2048;
  for (int s = 0; s < kSeconds; ++s) {
    w.push_back(rec(s + 0.5, "10.0.0.1"));
    if (s >= 1000 && s < 1010) {
      for (int k = 0; k < 100; ++k) w.push_back(rec(s + 0.5 + k * 1e-4, "10.0.0.2"));
    }
  }
  std::sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return a.ts < b.ts; });
  auto p = windows({1, 2, 4, 8, 16, 32, 64, 128, 256}, kSeconds);
  auto t = wr_learn(w, p);
  auto steady = *t.find(ip("10.0.0.1"));
  auto burst = *t.find(ip("10.0.0.2"));
  for (std::size_t j = 0; j < p.windows.size(); ++j) {
    EXPECT_DOUBLE_EQ(t.mean_of(burst)[j], 0.0) << "window " << p.windows[j];
    EXPECT_DOUBLE_EQ(t.std_of(burst)[j], 0.0) << "window " << p.windows[j];
    EXPECT_DOUBLE_EQ(t.mean_of(steady)[j], p.windows[j]) << "window " << p.windows[j];
    EXPECT_DOUBLE_EQ(t.std_of(steady)[j], 0.0) << "window " << p.windows[j];
  }
}

TEST(WrLearn, EmptyWindowIsAnError) {
  EXPECT_THROW(wr_learn(std::vector<QueryRecord>{}, FilterParams{}), Error);
  // shorter than the largest window
  EXPECT_THROW(wr_learn(std::vector<QueryRecord>{rec(0, "10.0.0.1"), rec(10, "10.0.0.1")}, FilterParams{}), Error);
}

RateTable one_source(std::vector<double> mean, std::vector<double> sd) {
  RateTable t;
  t.windows.resize(mean.size());
  std::iota(t.windows.begin(), t.windows.end(), 1);
  t.sources = {ip("10.0.0.1")};
  t.index.emplace(ip("10.0.0.1"), 0);
  t.mean = std::move(mean);
  t.stddev = std::move(sd);
  t.deviance = {0.0};
  t.deviance_ts = {0.0};
  return t;
}

TEST(WrScore, BoundaryValuesScoreZero) {
  auto t = one_source({10, 20, 40}, {2, 3, 5});
  std::vector<double> r = {16, 29, 55};
  EXPECT_DOUBLE_EQ(wr_score(t, ip("10.0.0.1"), r, 5, FilterParams{}), 0.0);
  EXPECT_DOUBLE_EQ(t.deviance_ts[0], 5.0);
}

TEST(WrScore, SingleWindowHandEvaluation) {
  auto t = one_source({10}, {2});
  std::vector<double> r = {20};
  double d = wr_score(t, ip("10.0.0.1"), r, 1, FilterParams{});
  EXPECT_DOUBLE_EQ(d, 1.0);
  EXPECT_TRUE(wr_is_wild(d, FilterParams{}));
  EXPECT_DOUBLE_EQ(t.deviance[0], 1.0);
}

TEST(WrScore, FarBelowModelIsNegative) {
  auto t = one_source({100, 200}, {5, 5});
  std::vector<double> r = {0, 0};
  double d = wr_score(t, ip("10.0.0.1"), r, 1, FilterParams{});
  EXPECT_LT(d, 0.0);
  EXPECT_FALSE(wr_is_wild(d, FilterParams{}));
  EXPECT_GE(d, FilterParams{}.wr_clamp_low);
}

TEST(WrScore, CountVectorMustMatchWindows) {
  auto t = one_source({1, 2}, {1, 1});
  std::vector<double> r = {1};
  EXPECT_THROW(wr_score(t, ip("10.0.0.1"), r, 1, FilterParams{}), Error);
}

TEST(WrScore, UnknownSourceIsRejected) {
  auto t = one_source({1}, {1});
  std::vector<double> r = {1};
  try {
    wr_score(t, ip("10.0.0.2"), r, 1, FilterParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownSource);
  }
}

// Same update rearranged: sum_i (r_i - m_i) / s_i - 3n.
double oracle(double prev, const std::vector<double>& r, const std::vector<double>& m, const std::vector<double>& s,
              double floor, double lo, double hi) {
  double z = 0;
  for (std::size_t i = 0; i < r.size(); ++i) z += (r[i] - m[i]) / std::max(s[i], floor);
  z -= 3.0 * static_cast<double>(r.size());
  return std::clamp((prev + z) / 2, lo, hi);
}

TEST(WrScore, MatchesRearrangedOracleOnRandomInputs) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> nw(1, 9);
  std::uniform_real_distribution<double> u(0, 1);
  FilterParams p;
  for (int trial = 0; trial < 10'000; ++trial) {
    int n = nw(rng);
    std::vector<double> m(n), s(n), r(n);
    for (int i = 0; i < n; ++i) {
      m[i] = std::pow(10.0, 4 * u(rng) - 1);
      // half the trials stay above the floor, half exercise it
      s[i] = trial % 2 ? 1.0 + 50 * u(rng) : 2 * u(rng);
      r[i] = std::floor(m[i] * 4 * u(rng));
    }
    auto t = one_source(m, s);
    double prev = std::uniform_real_distribution<double>(-10, 50)(rng);
    t.deviance[0] = prev;
    double got = wr_score(t, ip("10.0.0.1"), r, 1, p);
    double want = oracle(prev, r, m, s, p.wr_std_floor, p.wr_clamp_low, p.wr_clamp_high);
    ASSERT_NEAR(got, want, 1e-9) << "trial " << trial;
  }
}

TEST(WrVerdict, OnlyWildSourcesDrop) {
  SourceSet wild = {ip("10.0.0.1")};
  EXPECT_EQ(*wr_verdict(wild, rec(0, "10.0.0.1").view()).filter, FilterId::WR);
  EXPECT_FALSE(wr_verdict(wild, rec(0, "10.0.0.2").view()).dropped());
  EXPECT_FALSE(wr_verdict(wild, rec(0, "203.0.113.1").view()).dropped());
}

TEST(WrTracker, TrailingWindowsAreRightAligned) {
  auto p = windows({1, 2, 4}, 8);
  std::vector<QueryRecord> learn;
  for (int s = 0; s < 8; ++s) learn.push_back(rec(s, "10.0.0.1"));
  WrTracker tr(wr_learn(learn, p), p);
  // counts 1, 2, 3, 4 in ticks 10..13
  for (int tick = 10; tick < 14; ++tick) {
    for (int k = 0; k < tick - 9; ++k) tr.observe(ip("10.0.0.1"));
    tr.observe(ip("203.0.113.5"));  // unmodeled: ignored
    tr.end_tick(tick);
  }
  EXPECT_EQ(tr.trailing(ip("10.0.0.1")), (std::vector<double>{4, 7, 10}));
  EXPECT_TRUE(tr.trailing(ip("203.0.113.5")).empty());
  tr.end_tick(14);  // quiet second
  EXPECT_EQ(tr.trailing(ip("10.0.0.1")), (std::vector<double>{0, 4, 9}));
}

TEST(WrTracker, RateSurgeBecomesWildAndDecays) {
  auto p = windows({1, 2, 4}, 64);
  std::vector<QueryRecord> learn;
  for (int s = 0; s < 64; ++s) learn.push_back(rec(s, "10.0.0.1"));
  WrTracker tr(wr_learn(learn, p), p);
  for (int k = 0; k < 50; ++k) tr.observe(ip("10.0.0.1"));
  tr.end_tick(100);
  EXPECT_TRUE(tr.wild().contains(ip("10.0.0.1")));
  for (int tick = 101; tick < 120; ++tick) tr.end_tick(tick);
  EXPECT_FALSE(tr.wild().contains(ip("10.0.0.1")));
  EXPECT_LE(tr.deviance(ip("10.0.0.1")), p.wr_threshold);
}

TEST(WrTracker, TrackerMatchesScalarScoring) {
  auto p = windows({1, 2, 4, 8}, 64);
  std::mt19937_64 rng(8);
  std::vector<QueryRecord> learn;
  for (int s = 0; s < 64; ++s) {
    int n = static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) learn.push_back(rec(s + 0.1 * k, "10.0.0.1"));
  }
  auto table = wr_learn(learn, p);
  WrTracker tr(table, p);
  RateTable scalar = table;
  std::vector<int> history;
  for (int tick = 70; tick < 120; ++tick) {
    int n = static_cast<int>(rng() % 9);
    for (int k = 0; k < n; ++k) tr.observe(ip("10.0.0.1"));
    tr.end_tick(tick);
    history.push_back(n);
    std::vector<double> r;
    for (int w : p.windows) {
      double c = 0;
      for (int k = 0; k < w && k < static_cast<int>(history.size()); ++k) c += history[history.size() - 1 - k];
      r.push_back(c);
    }
    double d = wr_score(scalar, ip("10.0.0.1"), r, tick + 1, p);
    ASSERT_NEAR(tr.deviance(ip("10.0.0.1")), d, 1e-9) << tick;
  }
}

}  // namespace
}  // namespace ddidd
