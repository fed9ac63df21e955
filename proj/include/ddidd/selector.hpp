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

// Filter selection.
//
// Candidates are filters with a positive drop estimate. A lone filter is
// preferred when one brings the load under AL; among those the one with the
// least collateral damage wins. Otherwise ordered combinations from the
// pipeline grammar are tried in order of summed collateral damage. Inside a
// combination every member must remove at least `effective_fraction` of the
// excess load counting only what its upstream filters passed.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddidd/error.hpp"
#include "ddidd/estimate.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/pipeline.hpp"

namespace ddidd {

struct SelectorConfig {
  bool strict_ordering = false;
  bool comparison = false;  // single-filter comparison run: any lone filter is valid
  std::vector<FilterId> allowed = {FilterId::FQ_t, FilterId::UR, FilterId::HC, FilterId::WR, FilterId::FQ_s};
  double effective_fraction = 0.05;
  int reselect_ticks = 3;
  double retire_drop_fraction = 0.001;
  int retire_seconds = 30;

  bool allows(FilterId id) const { return std::find(allowed.begin(), allowed.end(), id) != allowed.end(); }

  void validate() const {
    if (allowed.empty()) throw Error(ErrorCode::ConfigError, "no filters enabled");
    if (reselect_ticks < 1 || retire_seconds < 1) throw Error(ErrorCode::ConfigError, "selector streaks must be >= 1");
    if (!(effective_fraction >= 0 && effective_fraction < 1)) {
      throw Error(ErrorCode::ConfigError, "effective_fraction must be in [0,1)");
    }
  }
};

struct Selection {
  std::vector<FilterId> pipeline;  // empty: nothing to deploy
  double drop_estimate = 0.0;
  double projected_load = 0.0;
  double cd_estimate = 0.0;  // summed over members
  bool feasible = false;     // projected_load <= AL
};

/// Marks `candidate` (positive drop) and `effective` (drop >= 5% of the excess)
/// and returns pointers to the candidates in filter-id order.
inline std::vector<const CandidateEvaluation*> candidates(std::span<CandidateEvaluation> evals, double current_load,
                                                          double acceptable, double effective_fraction = 0.05) {
  const double excess = std::max(0.0, current_load - acceptable);
  std::vector<const CandidateEvaluation*> out;
  for (auto& ev : evals) {
    ev.candidate = ev.drop_estimate > 0.0;
    ev.effective = ev.candidate && ev.drop_qps >= effective_fraction * excess;
    if (ev.candidate) out.push_back(&ev);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

namespace detail {

inline const CandidateEvaluation* find_eval(std::span<const CandidateEvaluation> evals, FilterId id) {
  for (const auto& e : evals) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

inline bool usable_alone(const CandidateEvaluation& e, const SelectorConfig& cfg) {
  if (!e.candidate || !e.deployable || !cfg.allows(e.id)) return false;
  return cfg.comparison || single_allowed(e.id, cfg.strict_ordering);
}

inline Selection single_selection(const CandidateEvaluation& e, double cl, double al) {
  Selection s;
  s.pipeline = {e.id};
  s.drop_estimate = e.drop_estimate;
  s.projected_load = cl * (1.0 - e.drop_estimate);
  s.cd_estimate = e.cd_estimate;
  s.feasible = s.projected_load <= al;
  return s;
}

}  // namespace detail

/// Lowest-cd lone filter whose projected load is at most AL; ties go to the
/// larger drop, then to filter-id order. nullopt when none suffices.
inline std::optional<Selection> deploy_single(std::span<const CandidateEvaluation> evals, double current_load,
                                              double acceptable, const SelectorConfig& cfg = {}) {
  const CandidateEvaluation* best = nullptr;
  for (const auto& e : evals) {
    if (!detail::usable_alone(e, cfg)) continue;
    if (current_load * (1.0 - e.drop_estimate) > acceptable) continue;
    if (!best || e.cd_estimate < best->cd_estimate ||
        (e.cd_estimate == best->cd_estimate &&
         (e.drop_estimate > best->drop_estimate || (e.drop_estimate == best->drop_estimate && e.id < best->id)))) {
      best = &e;
    }
  }
  if (!best) return std::nullopt;
  return detail::single_selection(*best, current_load, acceptable);
}

struct ComboEvaluation {
  Selection selection;
  bool admissible = false;  // every member effective under sequential emulation
};

/// Sequential emulation of one ordered combination.
inline ComboEvaluation evaluate_combo(std::span<const CandidateEvaluation> evals, std::span<const FilterId> combo,
                                      double current_load, double acceptable, const SelectorConfig& cfg = {}) {
  ComboEvaluation out;
  out.selection.pipeline.assign(combo.begin(), combo.end());
  const double excess = std::max(0.0, current_load - acceptable);
  out.admissible = true;
  DropMask upstream;
  std::size_t n = 0;
  std::size_t dropped = 0;
  for (std::size_t k = 0; k < combo.size(); ++k) {
    const auto* e = detail::find_eval(evals, combo[k]);
    if (!e || !e->candidate || !e->deployable || !cfg.allows(combo[k])) {
      out.admissible = false;
      return out;
    }
    if (k == 0) {
      n = e->mask.size();
      upstream = DropMask(n);
    }
    std::size_t marginal = e->mask.count_not_in(upstream);
    double marginal_qps = n ? current_load * static_cast<double>(marginal) / n : 0.0;
    if (marginal == 0 || marginal_qps < cfg.effective_fraction * excess) out.admissible = false;
    upstream |= e->mask;
    dropped += marginal;
    out.selection.cd_estimate += e->cd_estimate;
  }
  out.selection.drop_estimate = n ? static_cast<double>(dropped) / n : 0.0;
  out.selection.projected_load = current_load * (1.0 - out.selection.drop_estimate);
  out.selection.feasible = out.selection.projected_load <= acceptable;
  return out;
}

/// Called when no lone filter suffices. Returns the first admissible
/// combination (by ascending summed cd) that reaches AL, else the admissible
/// combination with the largest drop, else the lone candidate with the
/// largest drop, else an empty selection.
inline Selection deploy_combo(std::span<const CandidateEvaluation> evals, double current_load, double acceptable,
                              const SelectorConfig& cfg = {}) {
  const auto* fq_t = detail::find_eval(evals, FilterId::FQ_t);
  const bool over_cap = fq_t && fq_t->candidate && !fq_t->deployable;

  std::vector<ComboEvaluation> admissible;
  if (!cfg.comparison) {
    for (const auto& combo : combo_grammar(over_cap)) {
      auto ce = evaluate_combo(evals, combo, current_load, acceptable, cfg);
      if (ce.admissible) admissible.push_back(std::move(ce));
    }
  }
  std::stable_sort(admissible.begin(), admissible.end(), [](const ComboEvaluation& a, const ComboEvaluation& b) {
    return a.selection.cd_estimate < b.selection.cd_estimate;
  });
  for (const auto& ce : admissible) {
    if (ce.selection.feasible) return ce.selection;
  }
  const ComboEvaluation* best = nullptr;
  for (const auto& ce : admissible) {
    if (!best || ce.selection.drop_estimate > best->selection.drop_estimate) best = &ce;
  }
  if (best) return best->selection;

  const CandidateEvaluation* lone = nullptr;
  for (const auto& e : evals) {
    if (!detail::usable_alone(e, cfg)) continue;
    if (!lone || e.drop_estimate > lone->drop_estimate) lone = &e;
  }
  if (lone) return detail::single_selection(*lone, current_load, acceptable);
  Selection none;
  none.projected_load = current_load;
  none.feasible = current_load <= acceptable;
  return none;
}

/// Full selection step. Marks candidates in `evals` as a side effect.
inline Selection select_filters(std::span<CandidateEvaluation> evals, double current_load, double acceptable,
                                const SelectorConfig& cfg = {}) {
  candidates(evals, current_load, acceptable, cfg.effective_fraction);
  std::span<const CandidateEvaluation> view(evals.data(), evals.size());
  if (auto single = deploy_single(view, current_load, acceptable, cfg)) return *single;
  return deploy_combo(view, current_load, acceptable, cfg);
}

// ---------------------------------------------------------------- re-evaluation

enum class ReevalAction { keep, reselect, retire, retire_all };

struct ReevalDecision {
  ReevalAction action = ReevalAction::keep;
  std::optional<FilterId> filter;  // for retire
};

struct ReevalState {
  int over_streak = 0;
  std::array<int, kAllFilters.size()> low_streak{};

  void reset() { *this = ReevalState{}; }
};

struct TickMeasure {
  double incoming = 0.0;
  double passed = 0.0;
  std::array<double, kAllFilters.size()> dropped_by{};  // per FilterId
};

/// Decides what to do with the deployment after one tick.
inline ReevalDecision reevaluate(ReevalState& st, const DeploymentState& dep, const TickMeasure& m, double acceptable,
                                 bool attack_ended, const SelectorConfig& cfg = {}) {
  if (attack_ended) {
    st.reset();
    return {ReevalAction::retire_all, std::nullopt};
  }
  if (dep.empty()) {
    st.reset();
    return {};
  }
  st.over_streak = m.passed > acceptable ? st.over_streak + 1 : 0;
  if (st.over_streak >= cfg.reselect_ticks) {
    st.reset();
    return {ReevalAction::reselect, std::nullopt};
  }
  std::optional<FilterId> retire;
  for (FilterId id : dep.pipeline) {
    auto& streak = st.low_streak[static_cast<std::size_t>(id)];
    bool low = m.dropped_by[static_cast<std::size_t>(id)] < cfg.retire_drop_fraction * m.incoming;
    streak = low ? streak + 1 : 0;
    if (!retire && streak >= cfg.retire_seconds) {
      std::vector<FilterId> rest;
      for (FilterId other : dep.pipeline) {
        if (other != id) rest.push_back(other);
      }
      if (is_valid_pipeline(rest, cfg.strict_ordering, cfg.comparison)) retire = id;
    }
  }
  if (retire) {
    st.low_streak[static_cast<std::size_t>(*retire)] = 0;
    return {ReevalAction::retire, retire};
  }
  return {};
}

/// Filters a replay mode may use: "ddidd", "partial" (no FQ), or one filter
/// name ("FQ" covers both FQ modes).
inline SelectorConfig selector_for_mode(const std::string& mode, bool strict_ordering = false) {
  SelectorConfig cfg;
  cfg.strict_ordering = strict_ordering;
  if (mode == "ddidd") return cfg;
  if (mode == "partial") {
    cfg.allowed = {FilterId::UR, FilterId::HC, FilterId::WR};
    return cfg;
  }
  cfg.comparison = true;
  if (mode == "FQ") {
    cfg.allowed = {FilterId::FQ_t, FilterId::FQ_s};
    return cfg;
  }
  auto id = parse_filter_id(mode);
  if (!id) throw Error(ErrorCode::ConfigError, "unknown mode '" + mode + "'");
  cfg.allowed = {*id};
  return cfg;
}

}  // namespace ddidd
