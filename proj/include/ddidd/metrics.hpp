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

// Per-second timeline and the summary metrics computed from it.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddidd/filter_id.hpp"

namespace ddidd {

struct TimelineRow {
  std::int64_t ts = 0;
  std::uint64_t incoming = 0;
  std::uint64_t passed = 0;
  std::uint64_t blocked = 0;
  std::uint64_t incoming_bytes = 0;
  double al = 0.0;
  bool attack_flag = false;
  std::string pipeline = "-";  // pipeline in force during the second
  std::string events;          // ';'-joined, raised at the end of the second

  // Ground-truth tallies; only metrics read these.
  std::uint64_t legit_in = 0;
  std::uint64_t legit_dropped = 0;
  std::uint64_t attack_in = 0;
  std::uint64_t attack_dropped = 0;
  std::array<std::uint64_t, kAllFilters.size()> dropped_by{};
};

struct DeploymentEvent {
  std::int64_t ts = 0;
  std::string action;  // deploy, reselect, retire, retire_all
  std::vector<FilterId> pipeline;
  double drop_estimate = 0.0;
  double cd_estimate = 0.0;
};

struct MetricsReport {
  std::string mode;
  double acceptable_load = 0.0;
  std::int64_t window_begin = 0;  // [begin, end) attack seconds measured
  std::int64_t window_end = 0;
  std::int64_t attack_seconds = 0;
  double controlled_load_pct = 100.0;
  double collateral_damage_pct = 0.0;
  std::optional<std::int64_t> selection_delay_s;
  double ulq_pct = 0.0;  // legit loss under no defense with random drops above AL
  double attack_dropped_pct = 0.0;
  double attack_dropped_while_deployed_pct = 0.0;
  std::uint64_t legit_total = 0;
  std::uint64_t legit_dropped = 0;
  std::uint64_t attack_total = 0;
  std::uint64_t attack_dropped = 0;
  std::uint64_t records_total = 0;
  std::uint64_t dropped_total = 0;
  std::array<std::uint64_t, kAllFilters.size()> dropped_by{};
  std::vector<DeploymentEvent> deployments;
  std::vector<TimelineRow> timeline;
};

/// Fills the summary fields of `report` from its timeline.
///
/// The measured window is [begin, end). Controlled load is the share of its
/// seconds whose passed load is at most AL; collateral damage is the share of
/// legit records in the window that were dropped; selection delay is the
/// first controlled second minus `begin`.
inline void compute_metrics(MetricsReport& report, std::int64_t begin, std::int64_t end, std::uint64_t seed) {
  report.window_begin = begin;
  report.window_end = end;
  report.attack_seconds = std::max<std::int64_t>(0, end - begin);
  report.records_total = report.dropped_total = 0;
  report.dropped_by = {};
  report.legit_total = report.legit_dropped = report.attack_total = report.attack_dropped = 0;
  report.selection_delay_s.reset();

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uint64_t controlled = 0;
  std::uint64_t ulq_dropped = 0;
  std::uint64_t attack_deployed = 0, attack_deployed_dropped = 0;
  const double al = report.acceptable_load;
  for (const auto& row : report.timeline) {
    report.records_total += row.incoming;
    report.dropped_total += row.blocked;
    for (std::size_t i = 0; i < row.dropped_by.size(); ++i) report.dropped_by[i] += row.dropped_by[i];
    if (row.ts < begin || row.ts >= end) continue;
    bool ok = static_cast<double>(row.passed) <= al;
    if (ok) {
      ++controlled;
      if (!report.selection_delay_s) report.selection_delay_s = row.ts - begin;
    }
    report.legit_total += row.legit_in;
    report.legit_dropped += row.legit_dropped;
    report.attack_total += row.attack_in;
    report.attack_dropped += row.attack_dropped;
    if (row.pipeline != "-") {
      attack_deployed += row.attack_in;
      attack_deployed_dropped += row.attack_dropped;
    }
    if (static_cast<double>(row.incoming) > al && row.legit_in > 0) {
      std::binomial_distribution<std::uint64_t> drop(row.legit_in, 1.0 - al / static_cast<double>(row.incoming));
      ulq_dropped += drop(rng);
    }
  }
  // Seconds inside the window with no timeline row carried no traffic.
  auto rows_in = static_cast<std::int64_t>(std::count_if(report.timeline.begin(), report.timeline.end(),
                                                         [&](const TimelineRow& r) { return r.ts >= begin && r.ts < end; }));
  controlled += static_cast<std::uint64_t>(std::max<std::int64_t>(0, report.attack_seconds - rows_in));

  auto pct = [](std::uint64_t a, std::uint64_t b, double empty) {
    return b == 0 ? empty : 100.0 * static_cast<double>(a) / static_cast<double>(b);
  };
  report.controlled_load_pct = pct(controlled, static_cast<std::uint64_t>(report.attack_seconds), 100.0);
  report.collateral_damage_pct = pct(report.legit_dropped, report.legit_total, 0.0);
  report.ulq_pct = pct(ulq_dropped, report.legit_total, 0.0);
  report.attack_dropped_pct = pct(report.attack_dropped, report.attack_total, 0.0);
  report.attack_dropped_while_deployed_pct = pct(attack_deployed_dropped, attack_deployed, 0.0);
}

/// Delay from each phase start to the first controlled second at or after it
/// (and before the next phase start or `end`); nullopt if never controlled.
inline std::vector<std::optional<std::int64_t>> phase_delays(const MetricsReport& report,
                                                             const std::vector<std::int64_t>& starts, std::int64_t end) {
  std::vector<std::optional<std::int64_t>> out;
  for (std::size_t p = 0; p < starts.size(); ++p) {
    std::int64_t stop = p + 1 < starts.size() ? starts[p + 1] : end;
    std::optional<std::int64_t> d;
    for (const auto& row : report.timeline) {
      if (row.ts < starts[p] || row.ts >= stop) continue;
      if (static_cast<double>(row.passed) <= report.acceptable_load) {
        d = row.ts - starts[p];
        break;
      }
    }
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------- output

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
}  // namespace detail

inline void write_timeline_csv(const std::vector<TimelineRow>& rows, std::ostream& out) {
  out << "ts,incoming_qps,passed_qps,blocked_qps,al,attack_flag,pipeline,events\n";
  for (const auto& r : rows) {
    out << r.ts << ',' << r.incoming << ',' << r.passed << ',' << r.blocked << ',' << detail::fmt_double(r.al) << ','
        << (r.attack_flag ? 1 : 0) << ',' << r.pipeline << ',' << r.events << '\n';
  }
}

inline std::string timeline_csv(const std::vector<TimelineRow>& rows) {
  std::ostringstream out;
  write_timeline_csv(rows, out);
  return out.str();
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["acceptable_load"] = r.acceptable_load;
  j["window"] = {r.window_begin, r.window_end};
  j["attack_seconds"] = r.attack_seconds;
  j["controlled_load_pct"] = r.controlled_load_pct;
  j["collateral_damage_pct"] = r.collateral_damage_pct;
  j["selection_delay_s"] = r.selection_delay_s ? nlohmann::ordered_json(*r.selection_delay_s) : nlohmann::ordered_json();
  j["ulq_pct"] = r.ulq_pct;
  j["attack_dropped_pct"] = r.attack_dropped_pct;
  j["attack_dropped_while_deployed_pct"] = r.attack_dropped_while_deployed_pct;
  j["legit_total"] = r.legit_total;
  j["legit_dropped"] = r.legit_dropped;
  j["attack_total"] = r.attack_total;
  j["attack_dropped"] = r.attack_dropped;
  j["records_total"] = r.records_total;
  j["dropped_total"] = r.dropped_total;
  auto& by = j["dropped_by"] = nlohmann::ordered_json::object();
  for (auto id : kAllFilters) by[std::string(to_string(id))] = r.dropped_by[static_cast<std::size_t>(id)];
  auto& deps = j["deployments"] = nlohmann::ordered_json::array();
  for (const auto& d : r.deployments) {
    deps.push_back({{"ts", d.ts},
                    {"action", d.action},
                    {"pipeline", pipeline_string(d.pipeline)},
                    {"drop_estimate", d.drop_estimate},
                    {"cd_estimate", d.cd_estimate}});
  }
  return j;
}

/// Pipelines chosen by the selector in order, consecutive repeats collapsed.
/// Retirements are not selections and are skipped.
inline std::vector<std::string> trajectory(const MetricsReport& r) {
  std::vector<std::string> out;
  for (const auto& d : r.deployments) {
    if (d.pipeline.empty() || (d.action != "deploy" && d.action != "reselect")) continue;
    auto s = pipeline_string(d.pipeline);
    if (out.empty() || out.back() != s) out.push_back(s);
  }
  return out;
}

}  // namespace ddidd
