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

// Attack detection from the per-second load signal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>

#include "ddidd/error.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

struct LoadSample {
  std::int64_t ts = 0;  // second index
  double incoming_qps = 0.0;
  double passed_qps = 0.0;
  double blocked_qps = 0.0;
  double incoming_bps = 0.0;
};

struct DetectorConfig {
  int start_streak = 2;   // consecutive seconds above AL that start an attack
  int end_streak = 60;    // consecutive calm seconds that end it
  double end_blocked_fraction = 0.05;  // calm means blocked < this * AL and passed <= AL

  void validate() const {
    if (start_streak < 1 || end_streak < 1) throw Error(ErrorCode::ConfigError, "detector streaks must be >= 1");
    if (!(end_blocked_fraction > 0)) throw Error(ErrorCode::ConfigError, "end_blocked_fraction must be > 0");
  }
};

enum class DetectorEvent { none, attack_start, attack_end };

inline std::string_view to_string(DetectorEvent e) {
  switch (e) {
    case DetectorEvent::none: return "none";
    case DetectorEvent::attack_start: return "attack_start";
    case DetectorEvent::attack_end: return "attack_end";
  }
  return "?";
}

struct DetectorState {
  DetectorConfig config;
  double al = 0.0;
  bool primed = false;
  int critical_streak = 0;
  int calm_streak = 0;
  bool attack = false;
  std::optional<std::int64_t> attack_start;  // first second of the triggering streak
  std::optional<std::int64_t> attack_end;    // second on which the end was declared
};

inline double acceptable_load(double mean_qps, double factor) {
  if (!(mean_qps > 0)) throw Error(ErrorCode::NoBaseline, "peace-time load is zero");
  return mean_qps * factor;
}

/// AL = mean qps over [floor(first ts), floor(last ts) + 1) times `factor`.
inline double prime_al(RecordSource& peace, double factor) {
  QueryRecord rec;
  if (!peace.next(rec)) throw Error(ErrorCode::NoBaseline, "peace trace is empty");
  double first = std::floor(rec.ts);
  double last = first;
  double n = 1;
  while (peace.next(rec)) {
    last = std::floor(rec.ts);
    ++n;
  }
  return acceptable_load(n / (last - first + 1.0), factor);
}

inline double prime_al(std::span<const QueryRecord> peace, double factor) {
  if (peace.empty()) throw Error(ErrorCode::NoBaseline, "peace trace is empty");
  // min/max rather than front/back: AL must not depend on record order.
  auto [lo, hi] = std::minmax_element(peace.begin(), peace.end(),
                                      [](const QueryRecord& a, const QueryRecord& b) { return a.ts < b.ts; });
  double span = std::floor(hi->ts) - std::floor(lo->ts) + 1.0;
  return acceptable_load(static_cast<double>(peace.size()) / span, factor);
}

inline DetectorState make_detector(double al, DetectorConfig config = {}) {
  config.validate();
  if (!(al > 0)) throw Error(ErrorCode::NoBaseline, "acceptable load must be positive");
  DetectorState s;
  s.config = config;
  s.al = al;
  s.primed = true;
  return s;
}

inline DetectorEvent step(DetectorState& s, const LoadSample& sample) {
  if (!s.primed) throw Error(ErrorCode::NotPrimed, "detector has no acceptable load");
  if (!s.attack) {
    if (sample.incoming_qps > s.al) {
      if (++s.critical_streak >= s.config.start_streak) {
        s.attack = true;
        s.attack_start = sample.ts - (s.config.start_streak - 1);
        s.attack_end.reset();
        s.critical_streak = 0;
        s.calm_streak = 0;
        return DetectorEvent::attack_start;
      }
    } else {
      s.critical_streak = 0;
    }
    return DetectorEvent::none;
  }
  bool calm = sample.blocked_qps < s.config.end_blocked_fraction * s.al && sample.passed_qps <= s.al;
  if (!calm) {
    s.calm_streak = 0;
    return DetectorEvent::none;
  }
  if (++s.calm_streak >= s.config.end_streak) {
    s.attack = false;
    s.attack_end = sample.ts;
    s.calm_streak = 0;
    return DetectorEvent::attack_end;
  }
  return DetectorEvent::none;
}

}  // namespace ddidd
