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

// Versioned JSON files for learned tables:
// allowlist.json, ttltable.json, ratetable.json, fqbaseline.json.

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddidd/error.hpp"
#include "ddidd/fq_filter.hpp"
#include "ddidd/pipeline.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/wr_filter.hpp"

namespace ddidd {

inline constexpr int kTableVersion = 1;

namespace detail {

inline nlohmann::ordered_json table_header(const char* kind, const TableClock& clock) {
  nlohmann::ordered_json j;
  j["version"] = kTableVersion;
  j["kind"] = kind;
  j["built_at"] = clock.built_at;
  j["learn_span"] = clock.learn_span;
  j["use_period"] = clock.use_period;
  return j;
}

inline TableClock read_header(const nlohmann::json& j, const char* kind) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, std::string(kind) + ": not a JSON object");
  if (j.value("kind", std::string()) != kind) throw Error(ErrorCode::ConfigError, std::string("expected a ") + kind + " file");
  if (j.value("version", 0) != kTableVersion) {
    throw Error(ErrorCode::ConfigError, std::string(kind) + ": unsupported version");
  }
  try {
    return TableClock{j.at("built_at").get<double>(), j.at("learn_span").get<double>(),
                      j.at("use_period").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(kind) + ": " + e.what());
  }
}

inline Ipv4 read_addr(const nlohmann::json& v) {
  auto a = Ipv4::parse(v.get<std::string>());
  if (!a) throw Error(ErrorCode::BadAddress, "bad address in table file");
  return *a;
}

template <class Map>
std::vector<Ipv4> sorted_keys(const Map& m) {
  std::vector<Ipv4> out;
  out.reserve(m.size());
  for (const auto& kv : m) out.push_back(kv.first);
  std::sort(out.begin(), out.end());
  return out;
}

inline void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path);
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path);
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigError, path + ": invalid JSON");
  return j;
}

template <class Fn>
auto guarded(const char* kind, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(kind) + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------- to/from JSON

inline nlohmann::ordered_json to_json(const AllowList& list) {
  auto j = detail::table_header("allowlist", list.clock);
  std::vector<Ipv4> srcs(list.sources.begin(), list.sources.end());
  std::sort(srcs.begin(), srcs.end());
  auto& arr = j["sources"] = nlohmann::ordered_json::array();
  for (auto a : srcs) arr.push_back(a.str());
  return j;
}

inline AllowList allowlist_from_json(const nlohmann::json& j) {
  AllowList list;
  list.clock = detail::read_header(j, "allowlist");
  detail::guarded("allowlist", [&] {
    for (const auto& v : j.at("sources")) list.sources.insert(detail::read_addr(v));
    return 0;
  });
  return list;
}

inline nlohmann::ordered_json to_json(const TtlTable& table) {
  auto j = detail::table_header("ttltable", table.clock);
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (auto a : detail::sorted_keys(table.entries)) {
    const auto& set = table.entries.at(a);
    nlohmann::ordered_json ttls = nlohmann::ordered_json::array();
    for (int t = 0; t < 256; ++t) {
      if (set.test(t)) ttls.push_back(t);
    }
    entries.push_back({{"src", a.str()}, {"ttls", std::move(ttls)}});
  }
  return j;
}

inline TtlTable ttltable_from_json(const nlohmann::json& j) {
  TtlTable table;
  table.clock = detail::read_header(j, "ttltable");
  detail::guarded("ttltable", [&] {
    for (const auto& e : j.at("entries")) {
      TtlSet set;
      for (const auto& t : e.at("ttls")) {
        int v = t.get<int>();
        if (v < 0 || v > 255) throw Error(ErrorCode::OutOfRange, "ttl out of range in ttltable");
        set.set(static_cast<std::size_t>(v));
      }
      table.entries.emplace(detail::read_addr(e.at("src")), set);
    }
    return 0;
  });
  return table;
}

inline nlohmann::ordered_json to_json(const RateTable& table) {
  auto j = detail::table_header("ratetable", table.clock);
  j["windows"] = table.windows;
  auto& srcs = j["sources"] = nlohmann::ordered_json::array();
  for (std::uint32_t i = 0; i < table.size(); ++i) {
    auto m = table.mean_of(i);
    auto s = table.std_of(i);
    srcs.push_back({{"src", table.sources[i].str()},
                    {"mean", std::vector<double>(m.begin(), m.end())},
                    {"std", std::vector<double>(s.begin(), s.end())},
                    {"d", table.deviance[i]},
                    {"d_ts", table.deviance_ts[i]}});
  }
  return j;
}

inline RateTable ratetable_from_json(const nlohmann::json& j) {
  RateTable table;
  table.clock = detail::read_header(j, "ratetable");
  detail::guarded("ratetable", [&] {
    table.windows = j.at("windows").get<std::vector<int>>();
    struct Row {
      Ipv4 src;
      std::vector<double> mean, sd;
      double d, d_ts;
    };
    std::vector<Row> rows;
    for (const auto& e : j.at("sources")) {
      Row r{detail::read_addr(e.at("src")), e.at("mean").get<std::vector<double>>(),
            e.at("std").get<std::vector<double>>(), e.value("d", 0.0), e.value("d_ts", table.clock.built_at)};
      if (r.mean.size() != table.windows.size() || r.sd.size() != table.windows.size()) {
        throw Error(ErrorCode::ConfigError, "ratetable: model size does not match windows");
      }
      rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.src < b.src; });
    for (auto& r : rows) {
      table.index.emplace(r.src, static_cast<std::uint32_t>(table.sources.size()));
      table.sources.push_back(r.src);
      table.mean.insert(table.mean.end(), r.mean.begin(), r.mean.end());
      table.stddev.insert(table.stddev.end(), r.sd.begin(), r.sd.end());
      table.deviance.push_back(r.d);
      table.deviance_ts.push_back(r.d_ts);
    }
    return 0;
  });
  return table;
}

inline nlohmann::ordered_json to_json(const QnameFreqTable& table, const TableClock& clock) {
  auto j = detail::table_header("fqbaseline", clock);
  j["sample_size"] = table.sample_size;
  for (auto kind : {SegmentKind::tld, SegmentKind::subdomain, SegmentKind::full}) {
    auto& level = j[std::string(to_string(kind))] = nlohmann::ordered_json::object();
    for (const auto& [seg, f] : table.level(kind)) level[seg] = f;
  }
  return j;
}

inline QnameFreqTable fqbaseline_from_json(const nlohmann::json& j, TableClock* clock = nullptr) {
  auto c = detail::read_header(j, "fqbaseline");
  if (clock) *clock = c;
  return detail::guarded("fqbaseline", [&] {
    QnameFreqTable table;
    table.sample_size = j.at("sample_size").get<std::size_t>();
    for (auto kind : {SegmentKind::tld, SegmentKind::subdomain, SegmentKind::full}) {
      for (const auto& [seg, f] : j.at(std::string(to_string(kind))).items()) {
        table.level(kind).emplace(seg, f.template get<double>());
      }
    }
    return table;
  });
}

// ---------------------------------------------------------------- deployments

inline nlohmann::ordered_json to_json(const FqRule& r) {
  return {{"kind", to_string(r.kind)}, {"value", r.value}, {"freq_increase", r.freq_increase},
          {"cd_estimate", r.cd_estimate}};
}

inline nlohmann::ordered_json to_json(const DeploymentState& d) {
  nlohmann::ordered_json j;
  j["version"] = kTableVersion;
  j["kind"] = "deployment";
  auto& p = j["pipeline"] = nlohmann::ordered_json::array();
  for (auto id : d.pipeline) p.push_back(to_string(id));
  j["activated_at"] = d.activated_at;
  if (d.rules.ur) j["ur"] = to_json(*d.rules.ur);
  if (d.rules.hc) j["hc"] = to_json(*d.rules.hc);
  auto& fq = j["fq_rules"] = nlohmann::ordered_json::array();
  for (const auto& r : d.rules.fq_rules) fq.push_back(to_json(r));
  auto put_set = [&](const char* key, const std::shared_ptr<const SourceSet>& s) {
    if (!s) return;
    std::vector<Ipv4> v(s->begin(), s->end());
    std::sort(v.begin(), v.end());
    auto& arr = j[key] = nlohmann::ordered_json::array();
    for (auto a : v) arr.push_back(a.str());
  };
  put_set("fq_sources", d.rules.fq_sources);
  put_set("wr_wild", d.rules.wr_wild);
  put_set("ar_blocked", d.rules.ar_blocked);
  return j;
}

inline DeploymentState deployment_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("kind", std::string()) != "deployment") {
    throw Error(ErrorCode::ConfigError, "expected a deployment file");
  }
  if (j.value("version", 0) != kTableVersion) throw Error(ErrorCode::ConfigError, "deployment: unsupported version");
  return detail::guarded("deployment", [&] {
    DeploymentState d;
    for (const auto& v : j.at("pipeline")) {
      auto id = parse_filter_id(v.get<std::string>());
      if (!id) throw Error(ErrorCode::ConfigError, "deployment: unknown filter " + v.get<std::string>());
      d.pipeline.push_back(*id);
    }
    d.activated_at = j.value("activated_at", std::vector<double>(d.pipeline.size(), 0.0));
    if (j.contains("ur")) d.rules.ur = std::make_shared<const AllowList>(allowlist_from_json(j.at("ur")));
    if (j.contains("hc")) d.rules.hc = std::make_shared<const TtlTable>(ttltable_from_json(j.at("hc")));
    for (const auto& r : j.value("fq_rules", nlohmann::json::array())) {
      auto kind = parse_segment_kind(r.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ConfigError, "deployment: bad segment kind");
      d.rules.fq_rules.push_back(FqRule{*kind, r.at("value").get<std::string>(), r.value("freq_increase", 0.0),
                                        r.value("cd_estimate", 0.0)});
    }
    auto get_set = [&](const char* key) -> std::shared_ptr<const SourceSet> {
      if (!j.contains(key)) return nullptr;
      SourceSet s;
      for (const auto& v : j.at(key)) s.insert(detail::read_addr(v));
      return std::make_shared<const SourceSet>(std::move(s));
    };
    d.rules.fq_sources = get_set("fq_sources");
    d.rules.wr_wild = get_set("wr_wild");
    d.rules.ar_blocked = get_set("ar_blocked");
    return d;
  });
}

inline void save_deployment(const DeploymentState& d, const std::string& path) { detail::write_json(to_json(d), path); }
inline DeploymentState load_deployment(const std::string& path) { return deployment_from_json(detail::read_json(path)); }

// ---------------------------------------------------------------- files

inline void save_allowlist(const AllowList& t, const std::string& path) { detail::write_json(to_json(t), path); }
inline void save_ttltable(const TtlTable& t, const std::string& path) { detail::write_json(to_json(t), path); }
inline void save_ratetable(const RateTable& t, const std::string& path) { detail::write_json(to_json(t), path); }
inline void save_fqbaseline(const QnameFreqTable& t, const TableClock& clock, const std::string& path) {
  detail::write_json(to_json(t, clock), path);
}

inline AllowList load_allowlist(const std::string& path) { return allowlist_from_json(detail::read_json(path)); }
inline TtlTable load_ttltable(const std::string& path) { return ttltable_from_json(detail::read_json(path)); }
inline RateTable load_ratetable(const std::string& path) { return ratetable_from_json(detail::read_json(path)); }
inline QnameFreqTable load_fqbaseline(const std::string& path, TableClock* clock = nullptr) {
  return fqbaseline_from_json(detail::read_json(path), clock);
}

}  // namespace ddidd
