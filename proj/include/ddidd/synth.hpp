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

// Seeded synthetic traffic: a legit recursive population, the five attack
// strategies p1..p5, flash crowds, and their time-sorted mix.
//
// Every (component, second) pair draws from its own RNG seeded from the
// component seed and the second, so any time range can be regenerated
// independently and the output depends only on the specs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddidd/error.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

namespace synth_detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)); }

using Rng = std::mt19937_64;

inline Rng rng_for(std::uint64_t seed, std::uint64_t salt, std::int64_t sec) {
  return Rng(mix(mix(seed, salt), static_cast<std::uint64_t>(sec)));
}

inline void random_label(Rng& rng, int min_len, int max_len, std::string& out) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> letter(0, 25);
  int n = len(rng);
  for (int i = 0; i < n; ++i) out += static_cast<char>('a' + letter(rng));
}

inline constexpr std::string_view kTlds[] = {"com", "net", "org", "de", "uk", "jp", "fr", "br", "it", "ru",
                                             "nl",  "au",  "info", "cn", "edu", "gov", "io", "us", "ca", "es"};

inline constexpr std::string_view kQtypes[] = {"A", "A", "A", "A", "A", "A", "AAAA", "AAAA", "NS", "MX", "TXT", "DS"};

/// Vose alias table for O(1) weighted choice.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / sum;
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      auto s = small.back();
      small.pop_back();
      auto l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = scaled[l] + scaled[s] - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) prob_[i] = 1.0;
    for (auto i : small) prob_[i] = 1.0;
  }

  std::uint32_t sample(Rng& rng) const {
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(prob_.size() - 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto i = pick(rng);
    return u(rng) < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

inline std::uint32_t query_size(std::string_view qname) { return static_cast<std::uint32_t>(29 + qname.size() + 4); }

}  // namespace synth_detail

// ---------------------------------------------------------------- specs

struct LegitProfile {
  std::size_t n_sources = 1000;
  double rate_min = 1e-3;  // qps
  double rate_max = 1e2;
  int ttl_min = 32;
  int ttl_max = 250;
  double valid_fraction = 0.4;  // rest are single-label junk names
  std::int64_t start = 0;
  std::int64_t duration = 600;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, "legit profile: " + m); };
    if (n_sources < 1) fail("n_sources must be >= 1");
    if (!(rate_min > 0 && rate_max >= rate_min)) fail("need 0 < rate_min <= rate_max");
    if (ttl_min < 0 || ttl_max > 255 || ttl_min > ttl_max) fail("ttl range must lie in [0,255]");
    if (!(valid_fraction >= 0 && valid_fraction <= 1)) fail("valid_fraction must be in [0,1]");
    if (start < 0 || duration < 0) fail("start and duration must be >= 0");
  }
};

enum class AttackKind { p1, p2, p3, p4, p5 };

inline std::string_view to_string(AttackKind k) {
  static constexpr std::string_view names[] = {"p1", "p2", "p3", "p4", "p5"};
  return names[static_cast<int>(k)];
}

inline AttackKind parse_attack_kind(std::string_view s) {
  for (auto k : {AttackKind::p1, AttackKind::p2, AttackKind::p3, AttackKind::p4, AttackKind::p5}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ConfigError, "unknown attack kind '" + std::string(s) + "'");
}

struct AttackSpec {
  AttackKind kind = AttackKind::p1;
  double multiplier = 10.0;  // attack qps over the legit aggregate rate
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::string fixed_qname = "a.attack";
  std::size_t known_k = 20;     // p3/p4: how many population sources are spoofed
  double fixed_fraction = 0.1;  // p5: share of queries using fixed_qname
  std::uint64_t seed = 1;

  bool uses_known_set() const { return kind == AttackKind::p3 || kind == AttackKind::p4; }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, "attack spec: " + m); };
    if (!(multiplier > 0)) fail("multiplier must be > 0");
    if (start < 0 || end <= start) fail("need 0 <= start < end");
    if (uses_known_set() && known_k < 1) fail("p3/p4 need a known source set");
    if ((kind == AttackKind::p1 || kind == AttackKind::p5) && fixed_qname.empty()) fail("fixed_qname is empty");
    if (!(fixed_fraction >= 0 && fixed_fraction <= 1)) fail("fixed_fraction must be in [0,1]");
  }
};

/// Legit overload: `n_sources` extra recursives with low base rates that all
/// jump to `surge_rate` between start and end.
struct FlashCrowdSpec {
  std::size_t n_sources = 50'000;
  double rate_min = 0.01;
  double rate_max = 0.1;
  double surge_rate = 2.0;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, "flash crowd: " + m); };
    if (n_sources < 1) fail("n_sources must be >= 1");
    if (!(rate_min > 0 && rate_max >= rate_min)) fail("need 0 < rate_min <= rate_max");
    if (!(surge_rate > 0)) fail("surge_rate must be > 0");
    if (start < 0 || end <= start) fail("need 0 <= start < end");
  }
};

// ---------------------------------------------------------------- population

struct Population {
  std::vector<Ipv4> addrs;
  std::vector<double> rates;
  std::vector<std::uint8_t> ttls;
  std::unordered_set<Ipv4, Ipv4Hash> members;

  std::size_t size() const { return addrs.size(); }
  double total_rate() const { return std::accumulate(rates.begin(), rates.end(), 0.0); }
  bool contains(Ipv4 a) const { return members.contains(a); }
};

namespace synth_detail {

/// Unicast-looking address: first octet in [1, 223] and not 127.
inline Ipv4 random_unicast(Rng& rng) {
  std::uniform_int_distribution<std::uint32_t> any;
  for (;;) {
    Ipv4 a(any(rng));
    auto first = a.value >> 24;
    if (first >= 1 && first <= 223 && first != 127) return a;
  }
}

inline void fill_population(Population& pop, std::size_t n, double rmin, double rmax, int ttl_min, int ttl_max,
                            std::uint64_t seed, std::uint64_t salt, const Population* exclude) {
  Rng rng(mix(seed, salt));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> ttl(ttl_min, ttl_max);
  const double lo = std::log(rmin), hi = std::log(rmax);
  std::vector<double> rates(n);
  // One rate per log-spaced stratum; the two end strata sit exactly on the bounds.
  for (std::size_t i = 0; i < n; ++i) {
    double q;
    if (n == 1) q = u(rng);
    else if (i == 0) q = 0.0;
    else if (i + 1 == n) q = 1.0;
    else q = (static_cast<double>(i) + u(rng) - 0.5) / static_cast<double>(n - 1);
    rates[i] = std::exp(lo + (hi - lo) * std::clamp(q, 0.0, 1.0));
  }
  std::shuffle(rates.begin(), rates.end(), rng);
  pop.addrs.reserve(pop.addrs.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    Ipv4 a;
    do {
      a = random_unicast(rng);
    } while (pop.members.contains(a) || (exclude && exclude->contains(a)));
    pop.members.insert(a);
    pop.addrs.push_back(a);
    pop.rates.push_back(rates[i]);
    pop.ttls.push_back(static_cast<std::uint8_t>(ttl(rng)));
  }
}

}  // namespace synth_detail

/// Rates are log-uniform over [rate_min, rate_max]; each source keeps one TTL.
inline Population make_population(const LegitProfile& profile) {
  profile.validate();
  Population pop;
  synth_detail::fill_population(pop, profile.n_sources, profile.rate_min, profile.rate_max, profile.ttl_min,
                                profile.ttl_max, profile.seed, 0x706f70, nullptr);
  return pop;
}

inline Population make_crowd(const FlashCrowdSpec& spec, const Population& background, int ttl_min = 32,
                             int ttl_max = 250) {
  spec.validate();
  Population pop;
  synth_detail::fill_population(pop, spec.n_sources, spec.rate_min, spec.rate_max, ttl_min, ttl_max, spec.seed,
                                0x63726f77, &background);
  return pop;
}

/// Seeded subset of `k` population indices (p3/p4 spoof targets), drawn
/// from the busier half of the population (at least `k` sources). Quiet
/// sources may never show up in a learning window, and spoofing an address
/// the server has never seen is a p1-style attack, not a p3/p4 one.
inline std::vector<std::uint32_t> known_set(const Population& pop, std::size_t k, std::uint64_t seed) {
  std::vector<std::uint32_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return pop.rates[a] > pop.rates[b]; });
  k = std::min(k, idx.size());
  idx.resize(std::max(k, idx.size() / 2));
  synth_detail::Rng rng(synth_detail::mix(seed, 0x6b6e6f776e));
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------- generators

/// Emits the records of one component for one second, sorted by ts.
class TrafficComponent {
 public:
  virtual ~TrafficComponent() = default;
  virtual std::int64_t begin() const = 0;
  virtual std::int64_t end() const = 0;
  virtual void emit(std::int64_t sec, std::vector<QueryRecord>& out) const = 0;
};

namespace synth_detail {

/// ts values for k arrivals in one second: one per equal slot, jittered.
inline double slot_ts(std::int64_t sec, std::size_t j, std::size_t k, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double ts = static_cast<double>(sec) + (static_cast<double>(j) + u(rng)) / static_cast<double>(k);
  // Round to microseconds so text round-trips are exact and order is kept.
  ts = std::floor(ts * 1e6) / 1e6;
  return std::max(ts, static_cast<double>(sec));
}

inline void legit_qname(Rng& rng, double valid_fraction, std::string& out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.clear();
  if (u(rng) < valid_fraction) {
    random_label(rng, 3, 8, out);
    out += '.';
    std::uniform_int_distribution<std::size_t> tld(0, std::size(kTlds) - 1);
    out += kTlds[tld(rng)];
  } else {
    random_label(rng, 7, 15, out);
  }
}

inline void random_qname(Rng& rng, std::string& out) {
  out.clear();
  random_label(rng, 5, 10, out);
  out += '.';
  random_label(rng, 2, 6, out);
}

inline std::string_view random_qtype(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kQtypes) - 1);
  return kQtypes[pick(rng)];
}

}  // namespace synth_detail

/// Poisson arrivals from a population; the source of each query is chosen in
/// proportion to its rate.
class LegitComponent final : public TrafficComponent {
 public:
  LegitComponent(std::shared_ptr<const Population> pop, std::int64_t begin, std::int64_t end, double valid_fraction,
                 std::uint64_t seed, std::optional<double> uniform_rate = std::nullopt)
      : pop_(std::move(pop)), begin_(begin), end_(end), valid_(valid_fraction), seed_(seed) {
    if (uniform_rate) {
      alias_ = synth_detail::AliasTable(std::vector<double>(pop_->size(), 1.0));
      total_ = *uniform_rate * static_cast<double>(pop_->size());
    } else {
      alias_ = synth_detail::AliasTable(pop_->rates);
      total_ = pop_->total_rate();
    }
  }

  std::int64_t begin() const override { return begin_; }
  std::int64_t end() const override { return end_; }
  double rate() const { return total_; }

  void emit(std::int64_t sec, std::vector<QueryRecord>& out) const override {
    auto rng = synth_detail::rng_for(seed_, 0x6c6567, sec);
    std::poisson_distribution<std::size_t> count(total_);
    const std::size_t k = count(rng);
    for (std::size_t j = 0; j < k; ++j) {
      auto& r = out.emplace_back();
      r.ts = synth_detail::slot_ts(sec, j, k, rng);
      auto i = alias_.sample(rng);
      r.src = pop_->addrs[i];
      r.ttl = pop_->ttls[i];
      r.proto = Proto::udp;
      synth_detail::legit_qname(rng, valid_, r.qname);
      r.qtype = synth_detail::random_qtype(rng);
      r.size = synth_detail::query_size(r.qname);
      r.label = Label::legit;
    }
  }

 private:
  std::shared_ptr<const Population> pop_;
  std::int64_t begin_, end_;
  double valid_;
  std::uint64_t seed_;
  synth_detail::AliasTable alias_;
  double total_ = 0.0;
};

/// A fixed number of attack queries per second.
class AttackComponent final : public TrafficComponent {
 public:
  AttackComponent(const AttackSpec& spec, std::shared_ptr<const Population> pop, double legit_rate)
      : spec_(spec), pop_(std::move(pop)) {
    spec_.validate();
    per_second_ = static_cast<std::size_t>(std::llround(spec_.multiplier * legit_rate));
    if (spec_.uses_known_set()) {
      known_ = known_set(*pop_, spec_.known_k, spec_.seed);
      if (known_.empty()) throw Error(ErrorCode::ConfigError, "p3/p4 need a non-empty population");
    }
  }

  std::int64_t begin() const override { return spec_.start; }
  std::int64_t end() const override { return spec_.end; }
  std::size_t per_second() const { return per_second_; }
  const std::vector<std::uint32_t>& known() const { return known_; }

  void emit(std::int64_t sec, std::vector<QueryRecord>& out) const override {
    auto rng = synth_detail::rng_for(spec_.seed, 0x61747400 + static_cast<std::uint64_t>(spec_.kind), sec);
    std::uniform_int_distribution<int> any_ttl(0, 255);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t k = per_second_;
    for (std::size_t j = 0; j < k; ++j) {
      auto& r = out.emplace_back();
      r.ts = synth_detail::slot_ts(sec, j, k, rng);
      r.proto = Proto::udp;
      r.label = Label::attack;
      switch (spec_.kind) {
        case AttackKind::p1:
        case AttackKind::p2:
        case AttackKind::p5: {
          do {
            r.src = synth_detail::random_unicast(rng);
          } while (pop_ && pop_->contains(r.src));
          r.ttl = static_cast<std::uint8_t>(any_ttl(rng));
          bool fixed = spec_.kind == AttackKind::p1 || (spec_.kind == AttackKind::p5 && u(rng) < spec_.fixed_fraction);
          if (fixed) r.qname = spec_.fixed_qname;
          else synth_detail::random_qname(rng, r.qname);
          break;
        }
        case AttackKind::p3:
        case AttackKind::p4: {
          std::uniform_int_distribution<std::size_t> pick(0, known_.size() - 1);
          auto i = known_[pick(rng)];
          r.src = pop_->addrs[i];
          r.ttl = spec_.kind == AttackKind::p4 ? pop_->ttls[i] : static_cast<std::uint8_t>(any_ttl(rng));
          synth_detail::legit_qname(rng, 0.4, r.qname);
          break;
        }
      }
      r.qtype = "A";
      r.size = synth_detail::query_size(r.qname);
    }
  }

 private:
  AttackSpec spec_;
  std::shared_ptr<const Population> pop_;
  std::size_t per_second_ = 0;
  std::vector<std::uint32_t> known_;
};

/// Merges components second by second in ts order (ties keep component order).
class TrafficMix final : public RecordSource {
 public:
  TrafficMix() = default;

  void add(std::shared_ptr<const TrafficComponent> c) {
    if (c->end() <= c->begin()) return;
    begin_ = components_.empty() ? c->begin() : std::min(begin_, c->begin());
    end_ = components_.empty() ? c->end() : std::max(end_, c->end());
    components_.push_back(std::move(c));
    sec_ = begin_;
  }

  /// Restricts output to [begin, end).
  void clip(std::int64_t begin, std::int64_t end) {
    begin_ = std::max(begin_, begin);
    end_ = std::min(end_, end);
    sec_ = begin_;
  }

  std::int64_t begin() const { return begin_; }
  std::int64_t end() const { return end_; }

  bool next(QueryRecord& out) override {
    while (pos_ >= merged_.size()) {
      if (sec_ >= end_) return false;
      fill(sec_++);
    }
    out = std::move(merged_[pos_++]);
    return true;
  }

 private:
  void fill(std::int64_t sec) {
    merged_.clear();
    pos_ = 0;
    parts_.resize(components_.size());
    std::size_t total = 0;
    for (std::size_t c = 0; c < components_.size(); ++c) {
      parts_[c].clear();
      if (sec >= components_[c]->begin() && sec < components_[c]->end()) components_[c]->emit(sec, parts_[c]);
      total += parts_[c].size();
    }
    merged_.reserve(total);
    std::vector<std::size_t> at(parts_.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
      std::size_t best = parts_.size();
      for (std::size_t c = 0; c < parts_.size(); ++c) {
        if (at[c] < parts_[c].size() && (best == parts_.size() || parts_[c][at[c]].ts < parts_[best][at[best]].ts)) best = c;
      }
      merged_.push_back(std::move(parts_[best][at[best]++]));
    }
  }

  std::vector<std::shared_ptr<const TrafficComponent>> components_;
  std::vector<std::vector<QueryRecord>> parts_;
  std::vector<QueryRecord> merged_;
  std::size_t pos_ = 0;
  std::int64_t begin_ = 0, end_ = 0, sec_ = 0;
};

inline std::vector<QueryRecord> drain(RecordSource& src) {
  std::vector<QueryRecord> out;
  QueryRecord r;
  while (src.next(r)) out.push_back(std::move(r));
  return out;
}

// ---------------------------------------------------------------- scenarios

/// Background legit traffic plus any number of attacks and flash crowds.
struct Scenario {
  LegitProfile legit;
  std::vector<AttackSpec> attacks;
  std::optional<FlashCrowdSpec> flash_crowd;

  std::int64_t begin() const { return legit.start; }
  std::int64_t end() const { return legit.start + legit.duration; }
};

/// Built generators for a scenario; `mix(begin, end)` streams any window.
class ScenarioGenerator {
 public:
  explicit ScenarioGenerator(Scenario s) : s_(std::move(s)) {
    s_.legit.validate();
    for (const auto& a : s_.attacks) a.validate();
    pop_ = std::make_shared<const Population>(make_population(s_.legit));
    legit_ = std::make_shared<const LegitComponent>(pop_, s_.begin(), s_.end(), s_.legit.valid_fraction,
                                                    synth_detail::mix(s_.legit.seed, 1));
    for (const auto& a : s_.attacks) attacks_.push_back(std::make_shared<const AttackComponent>(a, pop_, legit_->rate()));
    if (s_.flash_crowd) {
      const auto& fc = *s_.flash_crowd;
      crowd_ = std::make_shared<const Population>(make_crowd(fc, *pop_, s_.legit.ttl_min, s_.legit.ttl_max));
      auto seed = synth_detail::mix(fc.seed, 2);
      crowd_parts_.push_back(std::make_shared<const LegitComponent>(crowd_, s_.begin(), std::max(s_.begin(), fc.start),
                                                                    s_.legit.valid_fraction, seed));
      crowd_parts_.push_back(std::make_shared<const LegitComponent>(crowd_, fc.start, fc.end, s_.legit.valid_fraction,
                                                                    synth_detail::mix(seed, 3), fc.surge_rate));
      crowd_parts_.push_back(std::make_shared<const LegitComponent>(crowd_, std::min(fc.end, s_.end()), s_.end(),
                                                                    s_.legit.valid_fraction, synth_detail::mix(seed, 4)));
    }
  }

  const Scenario& scenario() const { return s_; }
  const Population& population() const { return *pop_; }
  const Population* crowd() const { return crowd_.get(); }
  double legit_rate() const { return legit_->rate(); }
  const std::vector<std::shared_ptr<const AttackComponent>>& attacks() const { return attacks_; }

  TrafficMix mix(std::int64_t begin, std::int64_t end) const {
    TrafficMix m;
    m.add(legit_);
    for (const auto& c : crowd_parts_) m.add(c);
    for (const auto& a : attacks_) m.add(a);
    m.clip(begin, end);
    return m;
  }

  TrafficMix mix() const { return mix(s_.begin(), s_.end()); }

 private:
  Scenario s_;
  std::shared_ptr<const Population> pop_;
  std::shared_ptr<const Population> crowd_;
  std::shared_ptr<const LegitComponent> legit_;
  std::vector<std::shared_ptr<const AttackComponent>> attacks_;
  std::vector<std::shared_ptr<const TrafficComponent>> crowd_parts_;
};

inline std::vector<QueryRecord> gen_legit(const LegitProfile& profile) {
  ScenarioGenerator g(Scenario{profile, {}, std::nullopt});
  auto m = g.mix();
  return drain(m);
}

/// Attack records only, for `spec` against the population of `legit_context`.
inline std::vector<QueryRecord> gen_attack(const AttackSpec& spec, const LegitProfile& legit_context) {
  auto pop = std::make_shared<const Population>(make_population(legit_context));
  auto legit = LegitComponent(pop, 0, 1, legit_context.valid_fraction, 0);
  TrafficMix m;
  m.add(std::make_shared<const AttackComponent>(spec, pop, legit.rate()));
  return drain(m);
}

/// Phases laid out back to back from `first_start`, each `phase_seconds` long.
inline std::vector<AttackSpec> polymorphic_phases(const std::vector<AttackKind>& kinds, std::int64_t first_start,
                                                  std::int64_t phase_seconds, double multiplier, std::uint64_t seed) {
  std::vector<AttackSpec> out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    AttackSpec s;
    s.kind = kinds[i];
    s.multiplier = multiplier;
    s.start = first_start + static_cast<std::int64_t>(i) * phase_seconds;
    s.end = s.start + phase_seconds;
    s.seed = synth_detail::mix(seed, i);
    out.push_back(s);
  }
  return out;
}

inline std::vector<QueryRecord> gen_polymorphic(const std::vector<AttackSpec>& phases, const LegitProfile& profile) {
  ScenarioGenerator g(Scenario{profile, phases, std::nullopt});
  auto m = g.mix();
  return drain(m);
}

// ---------------------------------------------------------------- JSON specs

namespace synth_detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, std::string(what) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw Error(ErrorCode::ConfigError, std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
void get_opt(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(key) + ": " + e.what());
  }
}

}  // namespace synth_detail

inline LegitProfile legit_profile_from_json(const nlohmann::json& j) {
  synth_detail::check_keys(j, {"n_sources", "rate_min", "rate_max", "ttl_min", "ttl_max", "valid_fraction", "start",
                               "duration", "seed"},
                           "legit profile");
  LegitProfile p;
  synth_detail::get_opt(j, "n_sources", p.n_sources);
  synth_detail::get_opt(j, "rate_min", p.rate_min);
  synth_detail::get_opt(j, "rate_max", p.rate_max);
  synth_detail::get_opt(j, "ttl_min", p.ttl_min);
  synth_detail::get_opt(j, "ttl_max", p.ttl_max);
  synth_detail::get_opt(j, "valid_fraction", p.valid_fraction);
  synth_detail::get_opt(j, "start", p.start);
  synth_detail::get_opt(j, "duration", p.duration);
  synth_detail::get_opt(j, "seed", p.seed);
  p.validate();
  return p;
}

inline AttackSpec attack_spec_from_json(const nlohmann::json& j, std::uint64_t default_seed) {
  synth_detail::check_keys(j, {"kind", "multiplier", "start", "end", "fixed_qname", "known_k", "fixed_fraction", "seed"},
                           "attack spec");
  AttackSpec a;
  std::string kind;
  synth_detail::get_opt(j, "kind", kind);
  if (kind.empty()) throw Error(ErrorCode::ConfigError, "attack spec: kind is required");
  a.kind = parse_attack_kind(kind);
  a.seed = default_seed;
  synth_detail::get_opt(j, "multiplier", a.multiplier);
  synth_detail::get_opt(j, "start", a.start);
  synth_detail::get_opt(j, "end", a.end);
  synth_detail::get_opt(j, "fixed_qname", a.fixed_qname);
  a.fixed_qname = normalize_qname(a.fixed_qname);
  synth_detail::get_opt(j, "known_k", a.known_k);
  synth_detail::get_opt(j, "fixed_fraction", a.fixed_fraction);
  synth_detail::get_opt(j, "seed", a.seed);
  a.validate();
  return a;
}

inline FlashCrowdSpec flash_crowd_from_json(const nlohmann::json& j, std::uint64_t default_seed) {
  synth_detail::check_keys(j, {"n_sources", "rate_min", "rate_max", "surge_rate", "start", "end", "seed"},
                           "flash crowd");
  FlashCrowdSpec f;
  f.seed = default_seed;
  synth_detail::get_opt(j, "n_sources", f.n_sources);
  synth_detail::get_opt(j, "rate_min", f.rate_min);
  synth_detail::get_opt(j, "rate_max", f.rate_max);
  synth_detail::get_opt(j, "surge_rate", f.surge_rate);
  synth_detail::get_opt(j, "start", f.start);
  synth_detail::get_opt(j, "end", f.end);
  synth_detail::get_opt(j, "seed", f.seed);
  f.validate();
  return f;
}

/// {"seed": N, "attacks": [...], "flash_crowd": {...}}; phases without their
/// own seed derive one from the file seed and their position.
inline void attacks_from_json(const nlohmann::json& j, Scenario& s) {
  synth_detail::check_keys(j, {"seed", "attacks", "flash_crowd"}, "attacks file");
  std::uint64_t seed = s.legit.seed;
  synth_detail::get_opt(j, "seed", seed);
  if (auto it = j.find("attacks"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorCode::ConfigError, "attacks must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      s.attacks.push_back(attack_spec_from_json((*it)[i], synth_detail::mix(seed, i)));
    }
  }
  if (auto it = j.find("flash_crowd"); it != j.end()) {
    s.flash_crowd = flash_crowd_from_json(*it, synth_detail::mix(seed, 0xfc));
  }
}

inline nlohmann::ordered_json to_json(const LegitProfile& p) {
  return {{"n_sources", p.n_sources}, {"rate_min", p.rate_min}, {"rate_max", p.rate_max},
          {"ttl_min", p.ttl_min},     {"ttl_max", p.ttl_max},   {"valid_fraction", p.valid_fraction},
          {"start", p.start},         {"duration", p.duration}, {"seed", p.seed}};
}

inline nlohmann::ordered_json to_json(const AttackSpec& a) {
  return {{"kind", to_string(a.kind)}, {"multiplier", a.multiplier}, {"start", a.start},
          {"end", a.end},              {"fixed_qname", a.fixed_qname}, {"known_k", a.known_k},
          {"fixed_fraction", a.fixed_fraction}, {"seed", a.seed}};
}

inline nlohmann::ordered_json to_json(const FlashCrowdSpec& f) {
  return {{"n_sources", f.n_sources}, {"rate_min", f.rate_min}, {"rate_max", f.rate_max}, {"surge_rate", f.surge_rate},
          {"start", f.start},         {"end", f.end},           {"seed", f.seed}};
}

}  // namespace ddidd
