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

#pragma once

// Per-source filters: unknown recursive (allow-list), hop-count (TTL table)
// and aggressive recursive (rate-ordered block-list).

#include <algorithm>
#include <bitset>
#include <cmath>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddidd/error.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

/// Common header for every learned table.
struct TableClock {
  double built_at = 0.0;
  double learn_span = 0.0;
  double use_period = 0.0;

  bool expired(double now) const { return now - built_at > use_period; }

  void check(double now, const char* what) const {
    if (expired(now)) {
      throw Error(ErrorCode::ExpiredState, std::string(what) + " built at " + std::to_string(built_at) +
                                               " is older than its use period at " + std::to_string(now));
    }
  }
};

namespace detail {
inline TableClock clock_for(std::span<const QueryRecord> records, double use_period) {
  double first = records.front().ts;
  double last = records.back().ts;
  return TableClock{std::floor(last) + 1.0, std::floor(last) + 1.0 - std::floor(first), use_period};
}
}  // namespace detail

// ---------------------------------------------------------------- UR

struct AllowList {
  TableClock clock;
  SourceSet sources;

  bool contains(Ipv4 a) const { return sources.contains(a); }
};

inline AllowList ur_build(std::span<const QueryRecord> records, double use_period) {
  if (records.empty()) throw Error(ErrorCode::EmptyWindow, "UR learning window is empty");
  AllowList list;
  list.clock = detail::clock_for(records, use_period);
  for (const auto& r : records) list.sources.insert(r.src);
  return list;
}

inline bool ur_drops(const AllowList& list, const QueryView& q) { return !list.contains(q.src); }

inline Verdict ur_verdict(const AllowList& list, const QueryView& q, double now) {
  list.clock.check(now, "allow-list");
  return ur_drops(list, q) ? Verdict::drop(FilterId::UR) : Verdict::pass();
}

// ---------------------------------------------------------------- HC

using TtlSet = std::bitset<256>;

struct TtlTable {
  TableClock clock;
  std::unordered_map<Ipv4, TtlSet, Ipv4Hash> entries;

  const TtlSet* find(Ipv4 a) const {
    auto it = entries.find(a);
    return it == entries.end() ? nullptr : &it->second;
  }
};

inline TtlTable hc_build(std::span<const QueryRecord> records, double use_period) {
  if (records.empty()) throw Error(ErrorCode::EmptyWindow, "HC learning window is empty");
  TtlTable table;
  table.clock = detail::clock_for(records, use_period);
  for (const auto& r : records) table.entries[r.src].set(r.ttl);
  return table;
}

/// Unknown sources pass; known sources must present a learned TTL.
inline bool hc_drops(const TtlTable& table, const QueryView& q) {
  const TtlSet* ttls = table.find(q.src);
  return ttls != nullptr && !ttls->test(q.ttl);
}

inline Verdict hc_verdict(const TtlTable& table, const QueryView& q, double now) {
  table.clock.check(now, "TTL table");
  return hc_drops(table, q) ? Verdict::drop(FilterId::HC) : Verdict::pass();
}

// ---------------------------------------------------------------- AR

struct SourceRate {
  Ipv4 src;
  double qps = 0.0;
};

/// Shortest prefix of sources, by descending rate then ascending address,
/// whose removal brings CL down to AL. Empty when CL <= AL.
inline std::vector<Ipv4> ar_select(std::vector<SourceRate> rates, double current_load, double acceptable_load) {
  std::vector<Ipv4> out;
  if (current_load <= acceptable_load) return out;
  std::sort(rates.begin(), rates.end(), [](const SourceRate& a, const SourceRate& b) {
    if (a.qps != b.qps) return a.qps > b.qps;
    return a.src < b.src;
  });
  double load = current_load;
  for (const auto& r : rates) {
    if (load <= acceptable_load) break;
    out.push_back(r.src);
    load -= r.qps;
  }
  return out;
}

inline Verdict ar_verdict(const SourceSet& blocked, const QueryView& q) {
  return blocked.contains(q.src) ? Verdict::drop(FilterId::AR) : Verdict::pass();
}

}  // namespace ddidd
