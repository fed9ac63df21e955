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

// Deployed pipeline: an ordered list of filters with their rule snapshots.
// Records are checked in pipeline order and the first filter that drops wins.

#include <algorithm>
#include <array>
#include <memory>
#include <span>
#include <vector>

#include "ddidd/error.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/fq_filter.hpp"
#include "ddidd/params.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

/// Everything a filter needs to issue verdicts. Shared pointers keep
/// snapshots cheap to copy; pointees are never mutated after publication.
struct FilterRules {
  std::shared_ptr<const AllowList> ur;
  std::shared_ptr<const TtlTable> hc;
  std::vector<FqRule> fq_rules;
  std::shared_ptr<const SourceSet> fq_sources;
  std::shared_ptr<const SourceSet> wr_wild;
  std::shared_ptr<const SourceSet> ar_blocked;
};

struct DeploymentState {
  std::vector<FilterId> pipeline;
  std::vector<double> activated_at;  // parallel to pipeline
  FilterRules rules;

  bool empty() const { return pipeline.empty(); }
  bool contains(FilterId id) const { return std::find(pipeline.begin(), pipeline.end(), id) != pipeline.end(); }
};

namespace detail {
inline const SourceSet& empty_set() {
  static const SourceSet s;
  return s;
}
inline const SourceSet& deref(const std::shared_ptr<const SourceSet>& p) { return p ? *p : empty_set(); }
}  // namespace detail

/// Verdict of a single filter on `q`; `now` is checked against table use periods.
inline Verdict filter_verdict(FilterId id, const FilterRules& rules, const QueryView& q, double now,
                              const FilterParams& params) {
  switch (id) {
    case FilterId::FQ_t: return fq_verdict_t(rules.fq_rules, q, params);
    case FilterId::UR:
      if (!rules.ur) throw Error(ErrorCode::NotPrimed, "UR deployed without an allow-list");
      return ur_verdict(*rules.ur, q, now);
    case FilterId::HC:
      if (!rules.hc) throw Error(ErrorCode::NotPrimed, "HC deployed without a TTL table");
      return hc_verdict(*rules.hc, q, now);
    case FilterId::WR: return wr_verdict(detail::deref(rules.wr_wild), q);
    case FilterId::FQ_s: return fq_verdict_s(detail::deref(rules.fq_sources), q);
    case FilterId::AR: return ar_verdict(detail::deref(rules.ar_blocked), q);
  }
  return Verdict::pass();
}

inline Verdict evaluate(const DeploymentState& state, const QueryView& q, double now, const FilterParams& params) {
  for (FilterId id : state.pipeline) {
    Verdict v = filter_verdict(id, state.rules, q, now, params);
    if (v.dropped()) return v;
  }
  return Verdict::pass();
}

// ---------------------------------------------------------------- grammar

/// Multi-filter pipelines the selector may build, in enumeration order.
/// The FQ_s forms are only offered when FQ_t has more rules than its cap.
inline std::vector<std::vector<FilterId>> combo_grammar(bool fq_t_over_cap) {
  using F = FilterId;
  std::vector<std::vector<FilterId>> out = {
      {F::UR, F::HC},
      {F::UR, F::HC, F::WR},
      {F::FQ_t, F::UR},
      {F::FQ_t, F::UR, F::HC},
      {F::FQ_t, F::UR, F::HC, F::WR},
  };
  if (fq_t_over_cap) {
    out.push_back({F::UR, F::HC, F::FQ_s});
    out.push_back({F::UR, F::HC, F::FQ_s, F::WR});
  }
  return out;
}

/// Filters allowed to run alone outside comparison mode.
inline bool single_allowed(FilterId id, bool strict_ordering) {
  switch (id) {
    case FilterId::FQ_t:
    case FilterId::UR: return true;
    case FilterId::HC:
    case FilterId::WR: return !strict_ordering;
    default: return false;
  }
}

/// Checks the ordering rules: HC only after UR, FQ_s and WR only after UR and
/// HC, never both FQ_t and FQ_s. Comparison mode admits any lone filter.
inline bool is_valid_pipeline(std::span<const FilterId> p, bool strict_ordering = false, bool comparison = false) {
  if (p.empty()) return true;
  if (p.size() == 1) return comparison || single_allowed(p[0], strict_ordering);
  for (const auto& combo : combo_grammar(true)) {
    if (std::equal(p.begin(), p.end(), combo.begin(), combo.end())) return true;
  }
  return false;
}

inline bool is_valid_pipeline(const std::vector<FilterId>& p, bool strict_ordering = false, bool comparison = false) {
  return is_valid_pipeline(std::span<const FilterId>(p), strict_ordering, comparison);
}

}  // namespace ddidd
