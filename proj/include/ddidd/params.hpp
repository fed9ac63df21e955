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

#include <cstddef>
#include <string>
#include <vector>

#include "ddidd/error.hpp"

namespace ddidd {

/// Tunables for the filter library. Defaults are the recommended values.
struct FilterParams {
  std::size_t fq_sample = 10'000;  // queries per FQ learning sample
  double fq_threshold = 0.3;       // absolute frequency increase that flags a segment
  std::size_t fq_rule_cap = 5;     // max FQ_t string-match rules
  double fq_source_fraction = 0.5; // FQ_s: share of a source's queries that must match

  double ur_learn = 7200.0;
  double ur_use = 7200.0;
  double hc_learn = 7200.0;
  double hc_use = 7200.0;
  double wr_learn = 7200.0;
  double wr_refresh = 1200.0;  // use period equals wr_learn

  std::vector<int> windows = {1, 2, 4, 8, 16, 32, 64, 128, 256};
  double wr_threshold = 0.5;
  double wr_std_floor = 1.0;
  double wr_clamp_low = -10.0;
  double wr_clamp_high = 1e6;

  double acceptable_factor = 2.5;  // AL = peace mean qps * acceptable_factor

  /// Fraction of each learning period held out to estimate collateral damage.
  double holdout_fraction = 0.1;

  double wr_use() const { return wr_learn; }

  int max_window() const { return windows.empty() ? 0 : windows.back(); }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
    if (fq_sample == 0) fail("fq_sample must be > 0");
    if (!(fq_threshold > 0 && fq_threshold < 1)) fail("fq_threshold must be in (0,1)");
    if (fq_rule_cap < 1) fail("fq_rule_cap must be >= 1");
    if (!(fq_source_fraction > 0 && fq_source_fraction <= 1)) fail("fq_source_fraction must be in (0,1]");
    for (double p : {ur_learn, ur_use, hc_learn, hc_use, wr_learn, wr_refresh}) {
      if (!(p > 0)) fail("all periods must be > 0");
    }
    if (windows.empty()) fail("windows must not be empty");
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i] <= 0) fail("windows must be positive");
      if (i > 0 && windows[i] <= windows[i - 1]) fail("windows must be strictly increasing");
    }
    if (wr_learn < max_window()) fail("wr_learn must cover the largest window");
    if (!(wr_threshold > 0)) fail("wr_threshold must be > 0");
    if (!(wr_std_floor > 0)) fail("wr_std_floor must be > 0");
    if (!(acceptable_factor > 1)) fail("acceptable_factor must be > 1");
    if (!(holdout_fraction > 0 && holdout_fraction < 1)) fail("holdout_fraction must be in (0,1)");
  }
};

}  // namespace ddidd
