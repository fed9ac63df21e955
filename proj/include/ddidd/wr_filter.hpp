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

// Wild recursive filter.
//
// Each known source gets a (mean, std) model of its query count per window
// size. At every tick the trailing counts r_i are compared to
// mean_i + 3 std_i and folded into a smoothed deviance
//
//   d_t = 0.5 d_{t-1} + 0.5 * sum_i (r_i - mean_i - 3 s_i) / s_i,
//   s_i = max(std_i, wr_std_floor)
//
// A source is wild while d_t > wr_threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddidd/error.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/params.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

struct SecCount {
  std::int64_t sec = 0;
  std::uint32_t count = 0;
};

struct RateTable {
  TableClock clock;
  std::vector<int> windows;
  std::vector<Ipv4> sources;  // ascending address
  std::unordered_map<Ipv4, std::uint32_t, Ipv4Hash> index;
  std::vector<double> mean;    // sources.size() * windows.size(), row per source
  std::vector<double> stddev;  // same layout
  std::vector<double> deviance;
  std::vector<double> deviance_ts;

  std::size_t size() const { return sources.size(); }

  std::optional<std::uint32_t> find(Ipv4 a) const {
    auto it = index.find(a);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  std::span<const double> mean_of(std::uint32_t idx) const {
    return {mean.data() + std::size_t{idx} * windows.size(), windows.size()};
  }
  std::span<const double> std_of(std::uint32_t idx) const {
    return {stddev.data() + std::size_t{idx} * windows.size(), windows.size()};
  }
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace detail

/// Builds a rate table over the seconds [begin, end).
///
/// `load[s - begin]` is the aggregate query count of second s. `for_each`
/// is called with an emitter `emit(Ipv4, std::span<const SecCount>)` and must
/// emit every source once with its per-second counts in ascending order.
///
/// Tumbling windows are epoch-aligned and only complete windows count. At
/// each window size, windows whose aggregate load exceeds mean + 1 std of the
/// aggregate loads at that size are left out of every source's model.
template <class ForEachSource>
RateTable build_rate_table(std::int64_t begin, std::int64_t end, std::span<const double> load,
                           const FilterParams& params, ForEachSource&& for_each) {
  if (end <= begin) throw Error(ErrorCode::EmptyWindow, "WR learning window is empty");
  const std::size_t n_win = params.windows.size();

  struct Scale {
    std::int64_t first = 0;  // first complete window index
    std::int64_t count = 0;  // number of complete windows
    std::vector<char> included;
    double n_included = 0;
  };
  std::vector<Scale> scales(n_win);
  for (std::size_t j = 0; j < n_win; ++j) {
    const std::int64_t w = params.windows[j];
    auto& sc = scales[j];
    sc.first = detail::floor_div(begin + w - 1, w);
    std::int64_t last = detail::floor_div(end, w);  // exclusive
    sc.count = std::max<std::int64_t>(0, last - sc.first);
    if (sc.count == 0) {
      throw Error(ErrorCode::EmptyWindow, "WR learning window shorter than window " + std::to_string(w));
    }
    std::vector<double> agg(sc.count, 0.0);
    for (std::int64_t k = 0; k < sc.count; ++k) {
      std::int64_t s0 = (sc.first + k) * w - begin;
      for (std::int64_t s = s0; s < s0 + w; ++s) agg[k] += load[s];
    }
    double m = 0;
    for (double a : agg) m += a;
    m /= static_cast<double>(sc.count);
    double v = 0;
    for (double a : agg) v += (a - m) * (a - m);
    double sd = std::sqrt(v / static_cast<double>(sc.count));
    sc.included.assign(sc.count, 1);
    for (std::int64_t k = 0; k < sc.count; ++k) {
      if (agg[k] > m + sd) sc.included[k] = 0;
    }
    sc.n_included = static_cast<double>(std::count(sc.included.begin(), sc.included.end(), 1));
  }

  struct Row {
    Ipv4 src;
    std::vector<double> mean, sd;
  };
  std::vector<Row> rows;

  auto emit = [&](Ipv4 src, std::span<const SecCount> series) {
    if (series.empty()) return;
    Row row{src, std::vector<double>(n_win), std::vector<double>(n_win)};
    for (std::size_t j = 0; j < n_win; ++j) {
      const std::int64_t w = params.windows[j];
      const auto& sc = scales[j];
      double s1 = 0, s2 = 0;
      std::int64_t cur = -1;
      double c = 0;
      auto flush = [&] {
        if (cur >= 0 && cur < sc.count && sc.included[cur]) {
          s1 += c;
          s2 += c * c;
        }
      };
      for (const auto& e : series) {
        std::int64_t k = detail::floor_div(e.sec, w) - sc.first;
        if (k != cur) {
          flush();
          cur = k;
          c = 0;
        }
        c += e.count;
      }
      flush();
      double mean = s1 / sc.n_included;
      double var = std::max(0.0, s2 / sc.n_included - mean * mean);
      row.mean[j] = mean;
      row.sd[j] = std::sqrt(var);
    }
    rows.push_back(std::move(row));
  };
  for_each(emit);

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.src < b.src; });
  RateTable table;
  table.clock = TableClock{static_cast<double>(end), static_cast<double>(end - begin), params.wr_use()};
  table.windows = params.windows;
  table.sources.reserve(rows.size());
  table.mean.reserve(rows.size() * n_win);
  table.stddev.reserve(rows.size() * n_win);
  for (const auto& row : rows) {
    table.index.emplace(row.src, static_cast<std::uint32_t>(table.sources.size()));
    table.sources.push_back(row.src);
    table.mean.insert(table.mean.end(), row.mean.begin(), row.mean.end());
    table.stddev.insert(table.stddev.end(), row.sd.begin(), row.sd.end());
  }
  table.deviance.assign(rows.size(), 0.0);
  table.deviance_ts.assign(rows.size(), static_cast<double>(end));
  return table;
}

/// Learns from an in-memory window of records covering [floor(first), floor(last)+1).
inline RateTable wr_learn(std::span<const QueryRecord> records, const FilterParams& params) {
  if (records.empty()) throw Error(ErrorCode::EmptyWindow, "WR learning window is empty");
  const auto begin = static_cast<std::int64_t>(std::floor(records.front().ts));
  const auto end = static_cast<std::int64_t>(std::floor(records.back().ts)) + 1;
  std::vector<double> load(static_cast<std::size_t>(end - begin), 0.0);
  std::unordered_map<Ipv4, std::vector<SecCount>, Ipv4Hash> series;
  for (const auto& r : records) {
    auto s = static_cast<std::int64_t>(std::floor(r.ts));
    load[s - begin] += 1.0;
    auto& v = series[r.src];
    if (!v.empty() && v.back().sec == s) ++v.back().count;
    else v.push_back({s, 1});
  }
  return build_rate_table(begin, end, load, params, [&](auto&& emit) {
    for (const auto& [src, v] : series) emit(src, std::span<const SecCount>(v));
  });
}

/// Sum of normalized excesses over the model for one source.
inline double wr_deviance_sum(std::span<const double> current, std::span<const double> mean,
                              std::span<const double> sd, double std_floor) {
  double sum = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    double s = std::max(sd[i], std_floor);
    sum += (current[i] - mean[i] - 3.0 * s) / s;
  }
  return sum;
}

inline double wr_next_deviance(double previous, double deviance_sum, const FilterParams& params) {
  double d = 0.5 * previous + 0.5 * deviance_sum;
  return std::clamp(d, params.wr_clamp_low, params.wr_clamp_high);
}

/// Updates and returns the smoothed deviance of `src` given its trailing
/// window counts (one per configured window).
inline double wr_score(RateTable& table, Ipv4 src, std::span<const double> current, double now,
                       const FilterParams& params) {
  auto idx = table.find(src);
  if (!idx) throw Error(ErrorCode::UnknownSource, src.str() + " has no rate model");
  if (current.size() != table.windows.size()) {
    throw Error(ErrorCode::ConfigError, "expected one count per window");
  }
  double sum = wr_deviance_sum(current, table.mean_of(*idx), table.std_of(*idx), params.wr_std_floor);
  double d = wr_next_deviance(table.deviance[*idx], sum, params);
  table.deviance[*idx] = d;
  table.deviance_ts[*idx] = now;
  return d;
}

inline bool wr_is_wild(double deviance, const FilterParams& params) { return deviance > params.wr_threshold; }

inline Verdict wr_verdict(const SourceSet& wild, const QueryView& q) {
  return wild.contains(q.src) ? Verdict::drop(FilterId::WR) : Verdict::pass();
}

/// Keeps right-aligned trailing counts for every modeled source and rescores
/// all of them once per tick.
class WrTracker {
 public:
  WrTracker() = default;

  WrTracker(RateTable table, const FilterParams& params) : table_(std::move(table)), params_(params) {
    ring_size_ = static_cast<std::size_t>(params_.max_window());
    const std::size_t n = table_.size();
    const std::size_t nw = table_.windows.size();
    ring_.assign(n * ring_size_, 0);
    sums_.assign(n * nw, 0);
    tick_counts_.assign(n, 0);
    floored_.resize(table_.stddev.size());
    for (std::size_t i = 0; i < floored_.size(); ++i) floored_[i] = std::max(table_.stddev[i], params_.wr_std_floor);
  }

  const RateTable& table() const { return table_; }
  bool empty() const { return table_.size() == 0; }

  /// Seeds the trailing history with counts for seconds before `next_tick`.
  template <class ForEachSource>
  void seed(std::int64_t next_tick, ForEachSource&& for_each) {
    next_tick_ = next_tick;
    started_ = true;
    for_each([&](Ipv4 src, std::span<const SecCount> series) {
      auto idx = table_.find(src);
      if (!idx) return;
      for (const auto& e : series) {
        std::int64_t age = next_tick - e.sec;  // 1 = previous second
        if (age < 1 || age > static_cast<std::int64_t>(ring_size_)) continue;
        ring_[std::size_t{*idx} * ring_size_ + slot(e.sec)] += e.count;
        for (std::size_t j = 0; j < table_.windows.size(); ++j) {
          if (age <= table_.windows[j]) sums_[std::size_t{*idx} * table_.windows.size() + j] += e.count;
        }
      }
    });
  }

  void observe(Ipv4 src) {
    auto it = table_.index.find(src);
    if (it != table_.index.end()) ++tick_counts_[it->second];
  }

  /// Closes `tick`: shifts windows, rescores every source, rebuilds the wild set.
  void end_tick(std::int64_t tick) {
    if (!started_) {
      next_tick_ = tick;
      started_ = true;
    }
    while (next_tick_ < tick) advance(next_tick_++);
    advance(tick);
    next_tick_ = tick + 1;
  }

  const SourceSet& wild() const { return wild_; }

  std::vector<double> trailing(Ipv4 src) const {
    std::vector<double> out;
    auto idx = table_.find(src);
    if (!idx) return out;
    for (std::size_t j = 0; j < table_.windows.size(); ++j) {
      out.push_back(static_cast<double>(sums_[std::size_t{*idx} * table_.windows.size() + j]));
    }
    return out;
  }

  double deviance(Ipv4 src) const {
    auto idx = table_.find(src);
    return idx ? table_.deviance[*idx] : 0.0;
  }

 private:
  std::size_t slot(std::int64_t sec) const {
    auto r = static_cast<std::int64_t>(ring_size_);
    return static_cast<std::size_t>(((sec % r) + r) % r);
  }

  void advance(std::int64_t tick) {
    const std::size_t nw = table_.windows.size();
    const auto& win = table_.windows;
    wild_.clear();
    for (std::size_t i = 0; i < table_.size(); ++i) {
      std::uint32_t* ring = &ring_[i * ring_size_];
      std::uint64_t* sums = &sums_[i * nw];
      const std::uint32_t c = tick_counts_[i];
      tick_counts_[i] = 0;
      for (std::size_t j = 0; j < nw; ++j) {
        std::uint32_t old = ring[slot(tick - win[j])];
        sums[j] += c;
        sums[j] -= old;
      }
      ring[slot(tick)] = c;
      const double* mean = &table_.mean[i * nw];
      const double* s = &floored_[i * nw];
      double sum = 0.0;
      for (std::size_t j = 0; j < nw; ++j) {
        sum += (static_cast<double>(sums[j]) - mean[j] - 3.0 * s[j]) / s[j];
      }
      double d = wr_next_deviance(table_.deviance[i], sum, params_);
      table_.deviance[i] = d;
      table_.deviance_ts[i] = static_cast<double>(tick + 1);
      if (wr_is_wild(d, params_)) wild_.insert(table_.sources[i]);
    }
  }

  RateTable table_;
  FilterParams params_;
  std::size_t ring_size_ = 0;
  std::vector<std::uint32_t> ring_;
  std::vector<std::uint64_t> sums_;
  std::vector<std::uint32_t> tick_counts_;
  std::vector<double> floored_;
  SourceSet wild_;
  std::int64_t next_tick_ = 0;
  bool started_ = false;
};

}  // namespace ddidd
