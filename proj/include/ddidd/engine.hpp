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

// Time-stepped replay of a peace trace (learning only) followed by an attack
// trace through detector, selector and the deployed pipeline.
//
// Ticks are whole seconds. Every record of a tick is checked against the
// deployment in force at the start of that tick; detection, selection and
// table refreshes happen at tick boundaries only, so results do not depend
// on anything but the inputs and the seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddidd/detector.hpp"
#include "ddidd/error.hpp"
#include "ddidd/estimate.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/fq_filter.hpp"
#include "ddidd/learning_store.hpp"
#include "ddidd/metrics.hpp"
#include "ddidd/params.hpp"
#include "ddidd/pipeline.hpp"
#include "ddidd/selector.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/trace.hpp"
#include "ddidd/wr_filter.hpp"

namespace ddidd {

struct EngineConfig {
  FilterParams params;
  DetectorConfig detector;
  std::string mode = "ddidd";  // ddidd, partial, FQ, FQ_t, FQ_s, UR, HC, WR, AR
  bool strict_ordering = false;
  int selection_interval = 1;  // seconds between selection ticks
  std::uint64_t seed = 1;
  std::size_t attack_sample_size = 10'000;
  std::size_t peace_sample_per_tick = 64;
  std::optional<std::pair<std::int64_t, std::int64_t>> event_window;  // measured [begin, end), trace seconds
  std::optional<std::int64_t> max_attack_seconds;
  std::string peace_path;
  std::string attack_path;

  void validate() const {
    params.validate();
    detector.validate();
    selector_for_mode(mode, strict_ordering).validate();
    if (selection_interval < 1) throw Error(ErrorCode::ConfigError, "selection_interval must be >= 1");
    if (attack_sample_size < 1) throw Error(ErrorCode::ConfigError, "attack_sample_size must be >= 1");
    if (peace_sample_per_tick < 1) throw Error(ErrorCode::ConfigError, "peace_sample_per_tick must be >= 1");
    if (event_window && event_window->second <= event_window->first) {
      throw Error(ErrorCode::ConfigError, "event window must be non-empty");
    }
    if (max_attack_seconds && *max_attack_seconds < 1) throw Error(ErrorCode::ConfigError, "max_attack_seconds must be >= 1");
  }
};

using DispositionObserver = std::function<void(const QueryRecord&, const Verdict&)>;

class Engine {
 public:
  explicit Engine(EngineConfig config)
      : cfg_(std::move(config)), store_(cfg_.params, cfg_.peace_sample_per_tick) {
    cfg_.validate();
    selector_ = selector_for_mode(cfg_.mode, cfg_.strict_ordering);
  }

  const EngineConfig& config() const { return cfg_; }
  const LearningStore& store() const { return store_; }
  bool primed() const { return primed_; }
  double acceptable_load() const { return al_; }
  const DeploymentState& deployment() const { return deployment_; }
  /// Most recent non-empty deployment, kept after retirement for rule export.
  const std::optional<DeploymentState>& last_deployment() const { return last_deployed_; }
  const WrTracker& wr_tracker() const { return tracker_; }
  std::shared_ptr<const AllowList> allowlist() const { return ur_; }
  std::shared_ptr<const TtlTable> ttltable() const { return hc_; }

  /// Switches the replay mode; meant for copies of a primed engine.
  void set_mode(const std::string& mode) {
    cfg_.mode = mode;
    selector_ = selector_for_mode(mode, cfg_.strict_ordering);
  }

  void set_event_window(std::optional<std::pair<std::int64_t, std::int64_t>> w) { cfg_.event_window = w; }

  /// Learns every table from a trace assumed to be free of attacks and sets AL
  /// to its mean rate times the acceptable-load factor.
  void prime(RecordSource& peace) {
    std::vector<QueryRecord> buf;
    QueryRecord rec;
    std::optional<std::int64_t> cur, first;
    std::uint64_t total = 0;
    auto flush = [&](std::int64_t t) {
      store_.ingest_tick(t, buf);
      buf.clear();
      if ((t - *first) % 600 == 599) store_.evict_before(t + 1 - retention());
    };
    while (peace.next(rec)) {
      auto t = static_cast<std::int64_t>(std::floor(rec.ts));
      if (!cur) cur = first = t;
      if (t != *cur) {
        flush(*cur);
        cur = t;
      }
      ++total;
      buf.push_back(std::move(rec));
    }
    if (!cur) throw Error(ErrorCode::NoBaseline, "peace trace is empty");
    flush(*cur);
    al_ = ddidd::acceptable_load(static_cast<double>(total) / static_cast<double>(*cur - *first + 1),
                          cfg_.params.acceptable_factor);
    detector_ = make_detector(al_, cfg_.detector);
    const std::int64_t now = *cur + 1;
    rebuild_ur(now);
    rebuild_hc(now);
    rebuild_wr(now);
    primed_ = true;
  }

  /// Replays `attack`. Trace time is shifted so that the attack trace starts
  /// right after the last peace second; reported timestamps are unshifted.
  MetricsReport run(RecordSource& attack, const DispositionObserver& observer = {}) {
    if (!primed_) throw Error(ErrorCode::NotPrimed, "engine must be primed with a peace trace");
    MetricsReport report;
    report.mode = cfg_.mode;
    report.acceptable_load = al_;

    QueryRecord rec;
    bool have = attack.next(rec);
    if (!have) {
      compute_metrics(report, 0, 0, cfg_.seed);
      return report;
    }
    std::int64_t cur = static_cast<std::int64_t>(std::floor(rec.ts));
    offset_ = (store_.last_tick() + 1) - cur;
    std::optional<std::int64_t> attack_first, attack_last;
    std::optional<std::int64_t> detected_first, detected_last_end;
    std::int64_t last_done = cur - 1;
    double prev_ts = rec.ts;

    std::vector<QueryRecord> buf;
    TimelineRow row;
    pipeline_text_ = pipeline_string(deployment_.pipeline);
    auto begin_row = [&](std::int64_t t) {
      row = TimelineRow{};
      row.ts = t;
      row.al = al_;
      row.pipeline = pipeline_text_;
    };
    begin_row(cur);

    auto finish = [&](std::int64_t t) {
      end_tick(t, buf, row, report);
      if (row.events.find("attack_start") != std::string::npos && !detected_first) detected_first = detector_.attack_start;
      if (row.events.find("attack_end") != std::string::npos) detected_last_end = t + 1;
      report.timeline.push_back(std::move(row));
      buf.clear();
      last_done = t;
    };
    auto over_budget = [&](std::int64_t t) {
      return cfg_.max_attack_seconds && detected_first && t >= *detected_first + *cfg_.max_attack_seconds;
    };

    while (have) {
      auto t = static_cast<std::int64_t>(std::floor(rec.ts));
      if (rec.ts < prev_ts) throw Error(ErrorCode::TraceError, "attack trace is not time-ordered");
      prev_ts = rec.ts;
      while (t > cur) {
        finish(cur);
        ++cur;
        if (over_budget(cur)) break;
        begin_row(cur);
      }
      if (over_budget(cur)) break;

      const double now = rec.ts + static_cast<double>(offset_);
      Verdict v = evaluate(deployment_, rec.view(), now, cfg_.params);
      ++row.incoming;
      row.incoming_bytes += rec.size;
      if (v.dropped()) {
        ++row.blocked;
        ++row.dropped_by[static_cast<std::size_t>(*v.filter)];
      } else {
        ++row.passed;
      }
      if (rec.label) {
        if (*rec.label == Label::legit) {
          ++row.legit_in;
          if (v.dropped()) ++row.legit_dropped;
        } else {
          ++row.attack_in;
          if (v.dropped()) ++row.attack_dropped;
          if (!attack_first) attack_first = t;
          attack_last = t;
        }
      }
      if (observer) observer(rec, v);
      tracker_.observe(rec.src);
      buf.push_back(std::move(rec));
      have = attack.next(rec);
    }
    if (!over_budget(cur) && last_done < cur) finish(cur);

    std::int64_t b = 0, e = 0;
    if (cfg_.event_window) {
      b = cfg_.event_window->first;
      e = cfg_.event_window->second;
    } else if (attack_first) {
      b = *attack_first;
      e = *attack_last + 1;
    } else if (detected_first) {
      b = *detected_first;
      e = detected_last_end.value_or(last_done + 1);
    }
    e = std::min(e, last_done + 1);
    compute_metrics(report, b, std::max(b, e), cfg_.seed);
    return report;
  }

  /// Candidate evaluations for one traffic sample, as used by the selector.
  std::vector<CandidateEvaluation> evaluate_candidates(std::span<const QueryRecord> tick_records, double current_load,
                                                       std::int64_t now, FilterRules& proposed) {
    std::vector<QueryRecord> sample = systematic_sample(tick_records);
    std::vector<CandidateEvaluation> evals;
    const auto& p = cfg_.params;
    const double t = static_cast<double>(now);

    auto push = [&](FilterId id, double cd) {
      auto ev = estimate(id, proposed, sample, {}, current_load, t, p);
      ev.cd_estimate = cd;
      evals.push_back(std::move(ev));
    };

    const bool want_fq = selector_.allows(FilterId::FQ_t) || selector_.allows(FilterId::FQ_s);
    if (want_fq && !sample.empty()) {
      const auto& base = fq_baseline_now();
      proposed.fq_rules = fq_detect(base, fq_learn(std::span<const QueryRecord>(sample)), p);
      const auto& rules = proposed.fq_rules;
      const bool over_cap = rules.size() > p.fq_rule_cap;
      if (selector_.allows(FilterId::FQ_t) || over_cap) {
        double cd = store_.fq_ring_fraction([&](std::string_view q) { return fq_any_match(rules, q); });
        push(FilterId::FQ_t, cd);
      }
      if (selector_.allows(FilterId::FQ_s) && over_cap) {
        proposed.fq_sources = std::make_shared<const SourceSet>(fq_identify_sources(rules, sample, p));
        push(FilterId::FQ_s, weight_of(*proposed.fq_sources));
      }
    }
    if (selector_.allows(FilterId::UR)) {
      proposed.ur = ur_;
      push(FilterId::UR, ur_cd_);
    }
    if (selector_.allows(FilterId::HC)) {
      proposed.hc = hc_;
      push(FilterId::HC, hc_cd_);
    }
    if (selector_.allows(FilterId::WR)) {
      proposed.wr_wild = std::make_shared<const SourceSet>(tracker_.wild());
      push(FilterId::WR, weight_of(*proposed.wr_wild));
    }
    if (selector_.allows(FilterId::AR)) {
      std::unordered_map<Ipv4, double, Ipv4Hash> counts;
      for (const auto& r : tick_records) counts[r.src] += 1.0;
      std::vector<SourceRate> rates;
      rates.reserve(counts.size());
      for (const auto& [src, c] : counts) rates.push_back({src, c});
      auto blocked = ar_select(std::move(rates), current_load, al_);
      proposed.ar_blocked = std::make_shared<const SourceSet>(blocked.begin(), blocked.end());
      push(FilterId::AR, weight_of(*proposed.ar_blocked));
    }
    return evals;
  }

 private:
  std::int64_t retention() const {
    const auto& p = cfg_.params;
    double keep = std::max({p.ur_learn, p.hc_learn, p.wr_learn, static_cast<double>(p.max_window())});
    return static_cast<std::int64_t>(std::ceil(keep)) + 1;
  }

  std::vector<QueryRecord> systematic_sample(std::span<const QueryRecord> records) const {
    const std::size_t n = records.size();
    const std::size_t k = std::min(n, cfg_.attack_sample_size);
    std::vector<QueryRecord> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(records[i * n / k]);
    return out;
  }

  /// [begin, end) of the most recent `span` learned seconds.
  std::pair<std::int64_t, std::int64_t> learn_window(double span) const {
    std::int64_t end = store_.last_tick() + 1;
    std::int64_t begin = std::max(store_.first_tick(), end - static_cast<std::int64_t>(std::llround(span)));
    return {begin, end};
  }

  std::int64_t holdout_split(std::int64_t begin, std::int64_t end) const {
    auto h = static_cast<std::int64_t>(std::llround(static_cast<double>(end - begin) * cfg_.params.holdout_fraction));
    return end - std::max<std::int64_t>(1, h);
  }

  void rebuild_ur(std::int64_t now) {
    auto [b, e] = learn_window(cfg_.params.ur_learn);
    auto list = store_.build_allowlist(b, e, cfg_.params.ur_use);
    list.clock.built_at = static_cast<double>(now);
    ur_ = std::make_shared<const AllowList>(std::move(list));
    std::int64_t split = holdout_split(b, e);
    ur_cd_ = split > b ? store_.holdout_ur_cd(b, split, e) : 0.0;
    auto counts = store_.source_counts(b, e);
    double total = 0;
    for (const auto& kv : counts) total += kv.second;
    weights_ = std::make_shared<const std::unordered_map<Ipv4, double, Ipv4Hash>>(std::move(counts));
    weight_total_ = total;
    next_ur_ = now + static_cast<std::int64_t>(std::llround(cfg_.params.ur_use));
    if (deployment_.rules.ur) deployment_.rules.ur = ur_;
  }

  void rebuild_hc(std::int64_t now) {
    auto [b, e] = learn_window(cfg_.params.hc_learn);
    auto table = store_.build_ttl_table(b, e, cfg_.params.hc_use);
    table.clock.built_at = static_cast<double>(now);
    hc_ = std::make_shared<const TtlTable>(std::move(table));
    std::int64_t split = holdout_split(b, e);
    hc_cd_ = split > b ? store_.holdout_hc_cd(b, split, e) : 0.0;
    next_hc_ = now + static_cast<std::int64_t>(std::llround(cfg_.params.hc_use));
    if (deployment_.rules.hc) deployment_.rules.hc = hc_;
  }

  void rebuild_wr(std::int64_t now) {
    auto [b, e] = learn_window(cfg_.params.wr_learn);
    auto table = store_.build_rate_table(b, e);
    table.clock.built_at = static_cast<double>(now);
    tracker_ = WrTracker(std::move(table), cfg_.params);
    const std::int64_t from = now - cfg_.params.max_window();
    tracker_.seed(now, [&](auto&& emit) { store_.for_each_series(from, now, emit); });
    next_wr_ = now + static_cast<std::int64_t>(std::llround(cfg_.params.wr_refresh));
  }

  const QnameFreqTable& fq_baseline_now() {
    if (!fq_base_ || fq_base_version_ != store_.version()) {
      fq_base_ = store_.fq_baseline();
      fq_base_version_ = store_.version();
    }
    return *fq_base_;
  }

  double weight_of(const SourceSet& set) const {
    if (!weights_ || weight_total_ <= 0) return 0.0;
    double w = 0;
    for (auto a : set) {
      auto it = weights_->find(a);
      if (it != weights_->end()) w += it->second;
    }
    return w / weight_total_;
  }

  void add_event(TimelineRow& row, const std::string& e) {
    if (!row.events.empty()) row.events += ';';
    row.events += e;
  }

  void set_pipeline(std::vector<FilterId> pipeline, FilterRules rules, std::int64_t now) {
    std::vector<double> at;
    for (FilterId id : pipeline) {
      auto it = std::find(deployment_.pipeline.begin(), deployment_.pipeline.end(), id);
      at.push_back(it == deployment_.pipeline.end() ? static_cast<double>(now)
                                                    : deployment_.activated_at[it - deployment_.pipeline.begin()]);
    }
    deployment_.pipeline = std::move(pipeline);
    deployment_.activated_at = std::move(at);
    deployment_.rules = std::move(rules);
    pipeline_text_ = pipeline_string(deployment_.pipeline);
    if (!deployment_.empty()) last_deployed_ = deployment_;
  }

  void run_selection(std::int64_t t_trace, std::int64_t now, std::span<const QueryRecord> records, double cl,
                     TimelineRow& row, MetricsReport& report) {
    FilterRules proposed;
    auto evals = evaluate_candidates(records, cl, now, proposed);
    Selection sel = select_filters(evals, cl, al_, selector_);
    reeval_.reset();
    if (sel.pipeline.empty()) return;
    const char* action = deployment_.empty() ? "deploy" : "reselect";
    FilterRules keep;
    for (FilterId id : sel.pipeline) {
      switch (id) {
        case FilterId::FQ_t: keep.fq_rules = proposed.fq_rules; break;
        case FilterId::FQ_s:
          keep.fq_rules = proposed.fq_rules;
          keep.fq_sources = proposed.fq_sources;
          break;
        case FilterId::UR: keep.ur = proposed.ur; break;
        case FilterId::HC: keep.hc = proposed.hc; break;
        case FilterId::WR: keep.wr_wild = proposed.wr_wild; break;
        case FilterId::AR: keep.ar_blocked = proposed.ar_blocked; break;
      }
    }
    report.deployments.push_back(DeploymentEvent{t_trace, action, sel.pipeline, sel.drop_estimate, sel.cd_estimate});
    set_pipeline(sel.pipeline, std::move(keep), now + 1);
    add_event(row, std::string(action) + ":" + pipeline_text_);
  }

  void end_tick(std::int64_t t_trace, std::span<const QueryRecord> records, TimelineRow& row, MetricsReport& report) {
    const std::int64_t t = t_trace + offset_;
    tracker_.end_tick(t);

    LoadSample ls{t_trace, static_cast<double>(row.incoming), static_cast<double>(row.passed),
                  static_cast<double>(row.blocked), static_cast<double>(row.incoming_bytes) * 8.0};
    DetectorEvent ev = step(detector_, ls);
    row.attack_flag = detector_.attack || ev == DetectorEvent::attack_end;
    if (ev == DetectorEvent::attack_start) add_event(row, "attack_start");
    if (ev == DetectorEvent::attack_end) add_event(row, "attack_end");

    const bool overloaded = ls.incoming_qps > al_;
    if (!detector_.attack && !overloaded) {
      store_.ingest_tick(t, records);
      if ((t % 600) == 0) store_.evict_before(t + 1 - retention());
    }

    if (ev == DetectorEvent::attack_end) {
      reevaluate(reeval_, deployment_, {}, al_, true, selector_);
      if (!deployment_.empty()) {
        report.deployments.push_back(DeploymentEvent{t_trace, "retire_all", {}, 0.0, 0.0});
        add_event(row, "retire_all");
      }
      set_pipeline({}, {}, t + 1);
    } else if (detector_.attack) {
      // Nothing is deployed while the load is acceptable.
      bool select = deployment_.empty() && ls.incoming_qps > al_;
      if (!select) {
        TickMeasure m;
        m.incoming = ls.incoming_qps;
        m.passed = ls.passed_qps;
        for (std::size_t i = 0; i < m.dropped_by.size(); ++i) m.dropped_by[i] = static_cast<double>(row.dropped_by[i]);
        auto d = reevaluate(reeval_, deployment_, m, al_, false, selector_);
        if (d.action == ReevalAction::reselect) {
          select = true;
        } else if (d.action == ReevalAction::retire) {
          std::vector<FilterId> rest;
          for (FilterId id : deployment_.pipeline) {
            if (id != *d.filter) rest.push_back(id);
          }
          report.deployments.push_back(DeploymentEvent{t_trace, "retire", rest, 0.0, 0.0});
          add_event(row, "retire:" + std::string(to_string(*d.filter)));
          set_pipeline(std::move(rest), deployment_.rules, t + 1);
        }
      }
      if (select && (ev == DetectorEvent::attack_start || t % cfg_.selection_interval == 0)) {
        run_selection(t_trace, t, records, ls.incoming_qps, row, report);
      }
    }

    // WR rules follow the tracker's latest scores.
    if (deployment_.contains(FilterId::WR)) {
      deployment_.rules.wr_wild = std::make_shared<const SourceSet>(tracker_.wild());
      last_deployed_ = deployment_;
    }

    const std::int64_t next = t + 1;
    if (next >= next_ur_) rebuild_ur(next);
    if (next >= next_hc_) rebuild_hc(next);
    // Rebuilding WR resets every smoothed score, so it waits for peace.
    if (next >= next_wr_ && !detector_.attack) rebuild_wr(next);
  }

  EngineConfig cfg_;
  SelectorConfig selector_;
  LearningStore store_;
  bool primed_ = false;
  double al_ = 0.0;
  DetectorState detector_;
  ReevalState reeval_;
  DeploymentState deployment_;
  std::optional<DeploymentState> last_deployed_;
  std::string pipeline_text_ = "-";

  std::shared_ptr<const AllowList> ur_;
  std::shared_ptr<const TtlTable> hc_;
  double ur_cd_ = 0.0;
  double hc_cd_ = 0.0;
  std::shared_ptr<const std::unordered_map<Ipv4, double, Ipv4Hash>> weights_;
  double weight_total_ = 0.0;
  WrTracker tracker_;
  std::optional<QnameFreqTable> fq_base_;
  std::uint64_t fq_base_version_ = 0;

  std::int64_t next_ur_ = 0;
  std::int64_t next_hc_ = 0;
  std::int64_t next_wr_ = 0;
  std::int64_t offset_ = 0;
};

/// Opens the configured traces, primes on the peace trace and replays the
/// attack trace.
inline MetricsReport replay(const EngineConfig& config, const DispositionObserver& observer = {}) {
  config.validate();
  for (const auto* path : {&config.peace_path, &config.attack_path}) {
    if (path->empty()) throw Error(ErrorCode::ConfigError, "peace and attack trace paths are required");
    if (!std::filesystem::exists(*path)) throw Error(ErrorCode::ConfigError, "trace not found: " + *path);
  }
  Engine engine(config);
  TraceReader peace(config.peace_path);
  engine.prime(peace);
  TraceReader attack(config.attack_path);
  try {
    return engine.run(attack, observer);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MonotonicityViolation || e.code() == ErrorCode::MalformedLine) {
      throw Error(ErrorCode::TraceError, e.what(), e.line());
    }
    throw;
  }
}

}  // namespace ddidd
