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

// Emulation of filters on a traffic sample.

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "ddidd/filter_id.hpp"
#include "ddidd/params.hpp"
#include "ddidd/pipeline.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

/// One bit per sample record: set when the filter would drop it.
class DropMask {
 public:
  DropMask() = default;
  explicit DropMask(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  std::size_t size() const { return n_; }
  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  /// Bits set here but not in `upstream`.
  std::size_t count_not_in(const DropMask& upstream) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) c += static_cast<std::size_t>(std::popcount(words_[i] & ~upstream.words_[i]));
    return c;
  }

  DropMask& operator|=(const DropMask& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

struct CandidateEvaluation {
  FilterId id = FilterId::UR;
  double drop_estimate = 0.0;  // fraction of the attack sample dropped
  double drop_qps = 0.0;       // drop_estimate * current load
  double cd_estimate = 0.0;    // fraction of peace traffic dropped
  bool deployable = true;      // e.g. FQ_t within its rule cap
  bool candidate = false;      // set by candidates()
  bool effective = false;      // set by candidates()
  DropMask mask;
};

inline DropMask drop_mask(FilterId id, const FilterRules& rules, std::span<const QueryRecord> sample, double now,
                          const FilterParams& params) {
  DropMask mask(sample.size());
  // FQ_t over its cap is still emulated: the selector needs its drop to
  // decide on FQ_s, even though it will never be deployed.
  if (id == FilterId::FQ_t) {
    for (std::size_t i = 0; i < sample.size(); ++i) {
      if (fq_any_match(rules.fq_rules, sample[i].qname)) mask.set(i);
    }
    return mask;
  }
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (filter_verdict(id, rules, sample[i].view(), now, params).dropped()) mask.set(i);
  }
  return mask;
}

/// Drop estimate on the attack sample and collateral damage on the peace sample.
inline CandidateEvaluation estimate(FilterId id, const FilterRules& rules, std::span<const QueryRecord> attack_sample,
                                    std::span<const QueryRecord> peace_sample, double current_load, double now,
                                    const FilterParams& params) {
  CandidateEvaluation ev;
  ev.id = id;
  ev.mask = drop_mask(id, rules, attack_sample, now, params);
  ev.drop_estimate = attack_sample.empty() ? 0.0 : static_cast<double>(ev.mask.count()) / attack_sample.size();
  ev.drop_qps = ev.drop_estimate * current_load;
  if (!peace_sample.empty()) {
    ev.cd_estimate = static_cast<double>(drop_mask(id, rules, peace_sample, now, params).count()) / peace_sample.size();
  }
  ev.deployable = id != FilterId::FQ_t || rules.fq_rules.size() <= params.fq_rule_cap;
  return ev;
}

}  // namespace ddidd
