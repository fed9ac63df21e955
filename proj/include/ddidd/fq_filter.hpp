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

// Frequent query name filter.
//
// A frequency table summarizes a sample of queries at three granularities
// (TLD, last two labels, full name). Segments whose frequency rose by more
// than fq_threshold between a peace-time baseline and the current sample
// become rules. FQ_t matches the rules on query names; FQ_s blocks the
// sources that mostly send matching names.

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ddidd/error.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/params.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

enum class SegmentKind : std::uint8_t { tld, subdomain, full };

inline std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::tld: return "tld";
    case SegmentKind::subdomain: return "subdomain";
    case SegmentKind::full: return "full";
  }
  return "?";
}

inline std::optional<SegmentKind> parse_segment_kind(std::string_view s) {
  if (s == "tld") return SegmentKind::tld;
  if (s == "subdomain") return SegmentKind::subdomain;
  if (s == "full") return SegmentKind::full;
  return std::nullopt;
}

struct QnameFreqTable {
  std::size_t sample_size = 0;
  // Ordered maps keep serialization and rule order deterministic.
  std::map<std::string, double, std::less<>> tld;
  std::map<std::string, double, std::less<>> subdomain;
  std::map<std::string, double, std::less<>> full;

  const std::map<std::string, double, std::less<>>& level(SegmentKind k) const {
    return k == SegmentKind::tld ? tld : k == SegmentKind::subdomain ? subdomain : full;
  }
  std::map<std::string, double, std::less<>>& level(SegmentKind k) {
    return k == SegmentKind::tld ? tld : k == SegmentKind::subdomain ? subdomain : full;
  }

  double frequency(SegmentKind k, std::string_view seg) const {
    const auto& m = level(k);
    auto it = m.find(seg);
    return it == m.end() ? 0.0 : it->second;
  }
};

/// Root queries ("") count toward sample_size but contribute no segment.
inline QnameFreqTable fq_learn(std::span<const std::string_view> qnames) {
  if (qnames.empty()) throw Error(ErrorCode::EmptySample, "FQ sample is empty");
  std::unordered_map<std::string_view, std::size_t> counts[3];
  for (auto name : qnames) {
    if (name.empty()) continue;
    auto seg = segment_qname(name);
    ++counts[0][seg.tld];
    ++counts[1][seg.subdomain];
    ++counts[2][seg.full];
  }
  QnameFreqTable table;
  table.sample_size = qnames.size();
  const double n = static_cast<double>(qnames.size());
  for (int lvl = 0; lvl < 3; ++lvl) {
    auto& out = table.level(static_cast<SegmentKind>(lvl));
    for (const auto& [seg, c] : counts[lvl]) out.emplace(std::string(seg), static_cast<double>(c) / n);
  }
  return table;
}

inline QnameFreqTable fq_learn(std::span<const QueryRecord> sample) {
  std::vector<std::string_view> names;
  names.reserve(sample.size());
  for (const auto& r : sample) names.push_back(r.qname);
  return fq_learn(std::span<const std::string_view>(names));
}

struct FqRule {
  SegmentKind kind = SegmentKind::full;
  std::string value;
  double freq_increase = 0.0;
  double cd_estimate = 0.0;  // baseline frequency of the segment

  friend bool operator==(const FqRule&, const FqRule&) = default;

  bool matches(std::string_view qname) const {
    return kind == SegmentKind::full ? qname == value : has_label_suffix(qname, value);
  }
};

/// Rules for segments whose frequency grew by more than fq_threshold.
///
/// A flagged ancestor (tld, subdomain) is suppressed when the increase left
/// over after its kept descendants is at most fq_threshold; a kept ancestor
/// absorbs the descendant rules it covers.
inline std::vector<FqRule> fq_detect(const QnameFreqTable& baseline, const QnameFreqTable& current,
                                     const FilterParams& params) {
  const double f = params.fq_threshold;
  std::vector<FqRule> kept;

  for (auto kind : {SegmentKind::full, SegmentKind::subdomain, SegmentKind::tld}) {
    std::vector<FqRule> flagged;
    for (const auto& [seg, freq] : current.level(kind)) {
      double base = baseline.frequency(kind, seg);
      double inc = freq - base;
      if (inc > f) flagged.push_back(FqRule{kind, seg, inc, base});
    }
    if (kind == SegmentKind::full) {
      kept = std::move(flagged);
      continue;
    }
    for (auto& anc : flagged) {
      double covered = 0.0;
      for (const auto& d : kept) {
        if (has_label_suffix(d.value, anc.value)) covered += d.freq_increase;
      }
      if (anc.freq_increase - covered <= f) continue;
      std::erase_if(kept, [&](const FqRule& d) { return has_label_suffix(d.value, anc.value); });
      kept.push_back(std::move(anc));
    }
  }

  std::sort(kept.begin(), kept.end(), [](const FqRule& a, const FqRule& b) {
    if (a.freq_increase != b.freq_increase) return a.freq_increase > b.freq_increase;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.value < b.value;
  });
  return kept;
}

/// FQ_t: drop when the query name matches any rule.
inline Verdict fq_verdict_t(std::span<const FqRule> rules, const QueryView& q, const FilterParams& params) {
  if (rules.size() > params.fq_rule_cap) {
    throw Error(ErrorCode::RuleCapExceeded,
                std::to_string(rules.size()) + " FQ_t rules exceed cap " + std::to_string(params.fq_rule_cap));
  }
  for (const auto& r : rules) {
    if (r.matches(q.qname)) return Verdict::drop(FilterId::FQ_t);
  }
  return Verdict::pass();
}

inline bool fq_any_match(std::span<const FqRule> rules, std::string_view qname) {
  return std::any_of(rules.begin(), rules.end(), [&](const FqRule& r) { return r.matches(qname); });
}

/// FQ_s: sources whose share of rule-matching queries in the sample is at
/// least params.fq_source_fraction.
inline SourceSet fq_identify_sources(std::span<const FqRule> rules, std::span<const QueryRecord> attack_sample,
                                     const FilterParams& params) {
  SourceSet out;
  if (rules.empty()) return out;
  struct Tally {
    std::uint32_t total = 0;
    std::uint32_t matching = 0;
  };
  std::unordered_map<Ipv4, Tally, Ipv4Hash> tally;
  for (const auto& r : attack_sample) {
    auto& t = tally[r.src];
    ++t.total;
    if (fq_any_match(rules, r.qname)) ++t.matching;
  }
  for (const auto& [src, t] : tally) {
    if (static_cast<double>(t.matching) >= params.fq_source_fraction * t.total) out.insert(src);
  }
  return out;
}

inline Verdict fq_verdict_s(const SourceSet& blocked, const QueryView& q) {
  return blocked.contains(q.src) ? Verdict::drop(FilterId::FQ_s) : Verdict::pass();
}

}  // namespace ddidd
