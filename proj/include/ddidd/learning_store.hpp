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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddidd/fq_filter.hpp"
#include "ddidd/params.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/trace.hpp"
#include "ddidd/wr_filter.hpp"

namespace ddidd {

/// Rolling history of peace-time traffic from which all filter tables are
/// built. Only ticks the engine considers non-overloaded are ingested.
///
/// Per source it keeps (second, ttl, count) observations; it also keeps the
/// last fq_sample query names and a per-tick sample of whole records used as
/// the peace sample for collateral-damage estimates.
class LearningStore {
 public:
  struct Obs {
    std::int64_t sec;
    std::uint32_t count;
    std::uint8_t ttl;
  };

  explicit LearningStore(const FilterParams& params = {}, std::size_t peace_sample_per_tick = 64)
      : params_(params), per_tick_sample_(peace_sample_per_tick) {
    fq_ring_.resize(params_.fq_sample);
  }

  /// Adds every record of one second. Ticks must arrive in increasing order.
  void ingest_tick(std::int64_t tick, std::span<const QueryRecord> records) {
    if (have_tick_ && tick <= last_tick_) {
      throw Error(ErrorCode::TraceError, "learning store ticks must increase");
    }
    if (!have_tick_) first_tick_ = tick;
    have_tick_ = true;
    last_tick_ = tick;
    ++version_;
    load_.push_back({tick, static_cast<double>(records.size())});

    for (const auto& r : records) {
      auto [it, inserted] = index_.try_emplace(r.src, static_cast<std::uint32_t>(addrs_.size()));
      if (inserted) {
        addrs_.push_back(r.src);
        obs_.emplace_back();
      }
      auto& v = obs_[it->second];
      if (!v.empty() && v.back().sec == tick && v.back().ttl == r.ttl) ++v.back().count;
      else v.push_back(Obs{tick, 1, r.ttl});

      fq_ring_[fq_pos_] = r.qname;
      fq_pos_ = (fq_pos_ + 1) % fq_ring_.size();
      if (fq_filled_ < fq_ring_.size()) ++fq_filled_;
    }

    if (!records.empty()) {
      std::size_t stride = std::max<std::size_t>(1, (records.size() + per_tick_sample_ - 1) / per_tick_sample_);
      auto& bucket = sample_.emplace_back();
      bucket.first = tick;
      for (std::size_t i = 0; i < records.size(); i += stride) {
        QueryRecord copy = records[i];
        copy.label.reset();
        bucket.second.push_back(std::move(copy));
      }
    }
  }

  bool empty() const { return !have_tick_; }
  std::int64_t first_tick() const { return first_tick_; }
  std::int64_t last_tick() const { return last_tick_; }
  std::size_t source_count() const { return addrs_.size(); }

  /// Drops history older than `keep_from` (a tick).
  void evict_before(std::int64_t keep_from) {
    while (!load_.empty() && load_.front().first < keep_from) load_.pop_front();
    while (!sample_.empty() && sample_.front().first < keep_from) sample_.pop_front();
    std::unordered_map<Ipv4, std::uint32_t, Ipv4Hash> index;
    std::vector<Ipv4> addrs;
    std::vector<std::vector<Obs>> obs;
    for (std::size_t i = 0; i < addrs_.size(); ++i) {
      auto& v = obs_[i];
      auto cut = std::lower_bound(v.begin(), v.end(), keep_from,
                                  [](const Obs& o, std::int64_t s) { return o.sec < s; });
      if (cut == v.end()) continue;
      index.emplace(addrs_[i], static_cast<std::uint32_t>(addrs.size()));
      addrs.push_back(addrs_[i]);
      obs.emplace_back(cut, v.end());
    }
    index_ = std::move(index);
    addrs_ = std::move(addrs);
    obs_ = std::move(obs);
    if (!load_.empty()) first_tick_ = std::max(first_tick_, keep_from);
  }

  /// Allow-list of sources observed in [begin, end).
  AllowList build_allowlist(std::int64_t begin, std::int64_t end, double use_period) const {
    AllowList list;
    list.clock = TableClock{static_cast<double>(end), static_cast<double>(end - begin), use_period};
    for (std::size_t i = 0; i < addrs_.size(); ++i) {
      if (any_in(obs_[i], begin, end)) list.sources.insert(addrs_[i]);
    }
    if (list.sources.empty()) throw Error(ErrorCode::EmptyWindow, "no traffic in UR learning window");
    return list;
  }

  TtlTable build_ttl_table(std::int64_t begin, std::int64_t end, double use_period) const {
    TtlTable table;
    table.clock = TableClock{static_cast<double>(end), static_cast<double>(end - begin), use_period};
    for (std::size_t i = 0; i < addrs_.size(); ++i) {
      const auto& v = obs_[i];
      TtlSet set;
      for (auto it = lower(v, begin); it != v.end() && it->sec < end; ++it) set.set(it->ttl);
      if (set.any()) table.entries.emplace(addrs_[i], set);
    }
    if (table.entries.empty()) throw Error(ErrorCode::EmptyWindow, "no traffic in HC learning window");
    return table;
  }

  RateTable build_rate_table(std::int64_t begin, std::int64_t end) const {
    std::vector<double> load(static_cast<std::size_t>(std::max<std::int64_t>(0, end - begin)), 0.0);
    for (const auto& [t, n] : load_) {
      if (t >= begin && t < end) load[t - begin] = n;
    }
    bool any = false;
    auto table = ddidd::build_rate_table(begin, end, load, params_, [&](auto&& emit) {
      for_each_series(begin, end, [&](Ipv4 src, std::span<const SecCount> s) {
        any = true;
        emit(src, s);
      });
    });
    if (!any) throw Error(ErrorCode::EmptyWindow, "no traffic in WR learning window");
    return table;
  }

  /// Calls fn(Ipv4, span<const SecCount>) for every source with traffic in [begin, end).
  template <class Fn>
  void for_each_series(std::int64_t begin, std::int64_t end, Fn&& fn) const {
    std::vector<SecCount> buf;
    for (std::size_t i = 0; i < addrs_.size(); ++i) {
      buf.clear();
      const auto& v = obs_[i];
      for (auto it = lower(v, begin); it != v.end() && it->sec < end; ++it) {
        if (!buf.empty() && buf.back().sec == it->sec) buf.back().count += it->count;
        else buf.push_back({it->sec, it->count});
      }
      if (!buf.empty()) fn(addrs_[i], std::span<const SecCount>(buf));
    }
  }

  /// Baseline frequency table over the most recent fq_sample names.
  QnameFreqTable fq_baseline() const {
    if (fq_filled_ == 0) throw Error(ErrorCode::EmptySample, "no peace-time names observed");
    std::vector<std::string_view> names;
    names.reserve(fq_filled_);
    for (std::size_t i = 0; i < fq_filled_; ++i) names.push_back(fq_ring_[i]);
    return fq_learn(std::span<const std::string_view>(names));
  }

  /// Sampled peace-time records from ticks in [begin, end).
  std::vector<QueryRecord> peace_sample(std::int64_t begin, std::int64_t end) const {
    std::vector<QueryRecord> out;
    for (const auto& [t, recs] : sample_) {
      if (t >= begin && t < end) out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
  }

  /// Share of the records in [split, end) whose source sent nothing in
  /// [begin, split): what an allow-list built on the earlier part would drop.
  double holdout_ur_cd(std::int64_t begin, std::int64_t split, std::int64_t end) const {
    std::uint64_t total = 0, dropped = 0;
    for (const auto& v : obs_) {
      std::uint64_t later = count_in(v, split, end);
      total += later;
      if (later && !any_in(v, begin, split)) dropped += later;
    }
    return total ? static_cast<double>(dropped) / static_cast<double>(total) : 0.0;
  }

  /// Same split for TTL tables: records in [split, end) from sources known in
  /// [begin, split) whose TTL was not seen there.
  double holdout_hc_cd(std::int64_t begin, std::int64_t split, std::int64_t end) const {
    std::uint64_t total = 0, dropped = 0;
    for (const auto& v : obs_) {
      TtlSet seen;
      for (auto it = lower(v, begin); it != v.end() && it->sec < split; ++it) seen.set(it->ttl);
      for (auto it = lower(v, split); it != v.end() && it->sec < end; ++it) {
        total += it->count;
        if (seen.any() && !seen.test(it->ttl)) dropped += it->count;
      }
    }
    return total ? static_cast<double>(dropped) / static_cast<double>(total) : 0.0;
  }

  /// Query count per source over [begin, end).
  std::unordered_map<Ipv4, double, Ipv4Hash> source_counts(std::int64_t begin, std::int64_t end) const {
    std::unordered_map<Ipv4, double, Ipv4Hash> out;
    for (std::size_t i = 0; i < addrs_.size(); ++i) {
      std::uint64_t c = count_in(obs_[i], begin, end);
      if (c) out.emplace(addrs_[i], static_cast<double>(c));
    }
    return out;
  }

  /// Share of the retained FQ names satisfying `pred`.
  template <class Pred>
  double fq_ring_fraction(Pred&& pred) const {
    if (fq_filled_ == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < fq_filled_; ++i) {
      if (pred(std::string_view(fq_ring_[i]))) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(fq_filled_);
  }

  /// Bumped on every ingested tick.
  std::uint64_t version() const { return version_; }

  /// Mean records per second over the ingested ticks (gaps count as zero).
  double mean_load() const {
    if (!have_tick_) throw Error(ErrorCode::NoBaseline, "no peace traffic");
    double total = 0;
    for (const auto& [t, n] : load_) total += n;
    return total / static_cast<double>(last_tick_ - first_tick_ + 1);
  }

 private:
  static std::vector<Obs>::const_iterator lower(const std::vector<Obs>& v, std::int64_t begin) {
    return std::lower_bound(v.begin(), v.end(), begin, [](const Obs& o, std::int64_t s) { return o.sec < s; });
  }

  static std::uint64_t count_in(const std::vector<Obs>& v, std::int64_t begin, std::int64_t end) {
    std::uint64_t c = 0;
    for (auto it = lower(v, begin); it != v.end() && it->sec < end; ++it) c += it->count;
    return c;
  }

  static bool any_in(const std::vector<Obs>& v, std::int64_t begin, std::int64_t end) {
    auto it = lower(v, begin);
    return it != v.end() && it->sec < end;
  }

  FilterParams params_;
  std::size_t per_tick_sample_;
  std::unordered_map<Ipv4, std::uint32_t, Ipv4Hash> index_;
  std::vector<Ipv4> addrs_;
  std::vector<std::vector<Obs>> obs_;
  std::deque<std::pair<std::int64_t, double>> load_;
  std::deque<std::pair<std::int64_t, std::vector<QueryRecord>>> sample_;
  std::vector<std::string> fq_ring_;
  std::size_t fq_pos_ = 0;
  std::size_t fq_filled_ = 0;
  std::int64_t first_tick_ = 0;
  std::int64_t last_tick_ = 0;
  bool have_tick_ = false;
  std::uint64_t version_ = 0;
};

}  // namespace ddidd
