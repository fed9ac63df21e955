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

// Firewall rule text for a deployment.
//
// Neutral format, one rule per line, blocks in pipeline order:
//   ALLOW_SET ur / ADD ur <addr> ... / DEFAULT_DROP ur     allow-list filter
//   BLOCK_SRC_TTL_MISMATCH <addr> <ttl>,<ttl>,...           hop-count filter
//   BLOCK_QNAME_SUFFIX <segment> / BLOCK_QNAME_EXACT <name> query-name filter
//   BLOCK_SET <set> / ADD <set> <addr> ...                  per-source block-lists
// Addresses are sorted numerically and names lexicographically. RuleOracle
// parses the text back and answers verdicts with indexed lookups.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddidd/error.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/fq_filter.hpp"
#include "ddidd/params.hpp"
#include "ddidd/pipeline.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/trace.hpp"

namespace ddidd {

enum class RuleBlockKind { allow_set, ttl_mismatch, qname, block_set };

struct RuleBlock {
  FilterId filter = FilterId::UR;
  RuleBlockKind kind = RuleBlockKind::block_set;
  std::vector<Ipv4> addrs;                          // allow_set, block_set
  std::vector<std::pair<Ipv4, TtlSet>> ttl_entries;  // ttl_mismatch
  std::vector<std::string> suffixes;                 // qname
  std::vector<std::string> exact;                    // qname
};

struct RuleSet {
  std::vector<RuleBlock> blocks;
  bool empty() const { return blocks.empty(); }
};

inline std::string set_name(FilterId id) {
  switch (id) {
    case FilterId::UR: return "ur";
    case FilterId::HC: return "hc";
    case FilterId::WR: return "wr";
    case FilterId::FQ_s: return "fq_s";
    case FilterId::AR: return "ar";
    case FilterId::FQ_t: return "fq_t";
  }
  return "?";
}

namespace detail {
inline std::vector<Ipv4> sorted_addrs(const SourceSet& s) {
  std::vector<Ipv4> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}
}  // namespace detail

/// Snapshot of `state` as rules. Throws RuleCapExceeded for an FQ_t block
/// with more names than the cap.
inline RuleSet build_ruleset(const DeploymentState& state, const FilterParams& params = {}) {
  RuleSet rs;
  for (FilterId id : state.pipeline) {
    RuleBlock b;
    b.filter = id;
    switch (id) {
      case FilterId::UR:
        if (!state.rules.ur) throw Error(ErrorCode::NotPrimed, "UR deployed without an allow-list");
        b.kind = RuleBlockKind::allow_set;
        b.addrs = detail::sorted_addrs(state.rules.ur->sources);
        break;
      case FilterId::HC:
        if (!state.rules.hc) throw Error(ErrorCode::NotPrimed, "HC deployed without a TTL table");
        b.kind = RuleBlockKind::ttl_mismatch;
        for (const auto& kv : state.rules.hc->entries) b.ttl_entries.push_back(kv);
        std::sort(b.ttl_entries.begin(), b.ttl_entries.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        break;
      case FilterId::FQ_t:
        if (state.rules.fq_rules.size() > params.fq_rule_cap) {
          throw Error(ErrorCode::RuleCapExceeded, std::to_string(state.rules.fq_rules.size()) +
                                                      " query-name rules exceed cap " +
                                                      std::to_string(params.fq_rule_cap));
        }
        b.kind = RuleBlockKind::qname;
        for (const auto& r : state.rules.fq_rules) (r.kind == SegmentKind::full ? b.exact : b.suffixes).push_back(r.value);
        std::sort(b.suffixes.begin(), b.suffixes.end());
        std::sort(b.exact.begin(), b.exact.end());
        break;
      case FilterId::WR:
      case FilterId::FQ_s:
      case FilterId::AR: {
        const auto& p = id == FilterId::WR ? state.rules.wr_wild
                        : id == FilterId::FQ_s ? state.rules.fq_sources
                                               : state.rules.ar_blocked;
        b.kind = RuleBlockKind::block_set;
        if (p) b.addrs = detail::sorted_addrs(*p);
        break;
      }
    }
    rs.blocks.push_back(std::move(b));
  }
  return rs;
}

namespace detail {
inline std::string ttl_list(const TtlSet& s) {
  std::string out;
  for (int t = 0; t < 256; ++t) {
    if (!s.test(t)) continue;
    if (!out.empty()) out += ',';
    out += std::to_string(t);
  }
  return out;
}
}  // namespace detail

inline std::string render_neutral(const RuleSet& rs) {
  std::string out;
  for (const auto& b : rs.blocks) {
    const std::string name = set_name(b.filter);
    switch (b.kind) {
      case RuleBlockKind::allow_set:
        out += "ALLOW_SET " + name + '\n';
        for (auto a : b.addrs) out += "ADD " + name + ' ' + a.str() + '\n';
        out += "DEFAULT_DROP " + name + '\n';
        break;
      case RuleBlockKind::ttl_mismatch:
        for (const auto& [a, ttls] : b.ttl_entries) out += "BLOCK_SRC_TTL_MISMATCH " + a.str() + ' ' + detail::ttl_list(ttls) + '\n';
        break;
      case RuleBlockKind::qname:
        for (const auto& s : b.suffixes) out += "BLOCK_QNAME_SUFFIX " + s + '\n';
        for (const auto& s : b.exact) out += "BLOCK_QNAME_EXACT " + s + '\n';
        break;
      case RuleBlockKind::block_set:
        out += "BLOCK_SET " + name + '\n';
        for (auto a : b.addrs) out += "ADD " + name + ' ' + a.str() + '\n';
        break;
    }
  }
  return out;
}

inline std::string render_neutral(const DeploymentState& state, const FilterParams& params = {}) {
  return render_neutral(build_ruleset(state, params));
}

namespace detail {

/// Wire-format labels for the iptables string match, e.g. "|06|attack|00|".
inline std::string wire_labels(std::string_view name, bool terminate) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= name.size()) {
    auto dot = name.find('.', pos);
    auto label = name.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
    char hex[8];
    std::snprintf(hex, sizeof hex, "|%02x|", static_cast<unsigned>(label.size()));
    out += hex;
    out += label;
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  if (terminate) out += "|00|";
  return out;
}

inline std::string ipset_name(FilterId id) { return "ddidd-" + set_name(id); }

}  // namespace detail

/// ipset restore-style commands creating one hash:ip set per per-source block.
inline std::string render_ipset(const RuleSet& rs) {
  std::string out;
  auto create = [&](const std::string& name, std::size_t n) {
    out += "create " + name + " hash:ip family inet hashsize 1024 maxelem " +
           std::to_string(std::max<std::size_t>(65536, n)) + " -exist\n";
    out += "flush " + name + '\n';
  };
  for (const auto& b : rs.blocks) {
    const std::string name = detail::ipset_name(b.filter);
    switch (b.kind) {
      case RuleBlockKind::allow_set:
      case RuleBlockKind::block_set:
        create(name, b.addrs.size());
        for (auto a : b.addrs) out += "add " + name + ' ' + a.str() + " -exist\n";
        break;
      case RuleBlockKind::ttl_mismatch:
        create(name + "-src", b.ttl_entries.size());
        for (const auto& e : b.ttl_entries) out += "add " + name + "-src " + e.first.str() + " -exist\n";
        out += "# stock ipset has no address+TTL type; entries for a custom hash:ip,ttl module\n";
        out += "# create " + name + " hash:ip,ttl family inet\n";
        for (const auto& [a, ttls] : b.ttl_entries) {
          for (int t = 0; t < 256; ++t) {
            if (ttls.test(t)) out += "# add " + name + ' ' + a.str() + ',' + std::to_string(t) + '\n';
          }
        }
        break;
      case RuleBlockKind::qname: break;  // iptables string matches, no set
    }
  }
  return out;
}

/// iptables commands for a DDIDD chain hooked into INPUT for DNS traffic.
/// Name rules approximate DNS matching with a Boyer-Moore search for the
/// wire-format labels anywhere in the packet.
inline std::string render_iptables(const RuleSet& rs) {
  if (rs.empty()) return {};
  std::string out = "iptables -N DDIDD\n";
  for (const auto& b : rs.blocks) {
    const std::string name = detail::ipset_name(b.filter);
    switch (b.kind) {
      case RuleBlockKind::allow_set:
        out += "iptables -A DDIDD -m set ! --match-set " + name + " src -j DROP\n";
        break;
      case RuleBlockKind::block_set:
        out += "iptables -A DDIDD -m set --match-set " + name + " src -j DROP\n";
        break;
      case RuleBlockKind::ttl_mismatch:
        out += "# needs the custom hash:ip,ttl set type\n";
        out += "# iptables -A DDIDD -m set --match-set " + name + "-src src -m set ! --match-set " + name +
               " src,ttl -j DROP\n";
        break;
      case RuleBlockKind::qname:
        for (const auto& s : b.suffixes) {
          out += "iptables -A DDIDD -p udp -m string --algo bm --hex-string \"" + detail::wire_labels(s, true) +
                 "\" -j DROP\n";
        }
        for (const auto& s : b.exact) {
          out += "iptables -A DDIDD -p udp -m string --algo bm --hex-string \"" + detail::wire_labels(s, true) +
                 "\" -j DROP\n";
        }
        break;
    }
  }
  out += "iptables -I INPUT -p udp --dport 53 -j DDIDD\n";
  return out;
}

inline std::string render_ipset(const DeploymentState& s, const FilterParams& p = {}) { return render_ipset(build_ruleset(s, p)); }
inline std::string render_iptables(const DeploymentState& s, const FilterParams& p = {}) {
  return render_iptables(build_ruleset(s, p));
}

// ---------------------------------------------------------------- oracle

/// Verdicts straight from neutral rule text.
class RuleOracle {
 public:
  explicit RuleOracle(std::string_view text) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() : nl + 1;
      ++line_no;
      if (!line.empty()) parse_line(line, line_no);
    }
  }

  Verdict verdict(const QueryView& q) const {
    for (const auto& b : blocks_) {
      bool drop = false;
      switch (b.kind) {
        case RuleBlockKind::allow_set: drop = !b.set.contains(q.src); break;
        case RuleBlockKind::block_set: drop = b.set.contains(q.src); break;
        case RuleBlockKind::ttl_mismatch: {
          auto it = b.ttls.find(q.src);
          drop = it != b.ttls.end() && !it->second.test(q.ttl);
          break;
        }
        case RuleBlockKind::qname:
          for (const auto& s : b.suffixes) drop = drop || has_label_suffix(q.qname, s);
          for (const auto& s : b.exact) drop = drop || q.qname == s;
          break;
      }
      if (drop) return Verdict::drop(b.filter);
    }
    return Verdict::pass();
  }

  bool contains(FilterId id, Ipv4 a) const {
    for (const auto& b : blocks_) {
      if (b.filter == id) return b.set.contains(a);
    }
    return false;
  }

 private:
  struct Block {
    FilterId filter;
    RuleBlockKind kind;
    SourceSet set;
    std::unordered_map<Ipv4, TtlSet, Ipv4Hash> ttls;
    std::vector<std::string> suffixes, exact;
  };

  static FilterId filter_for_set(std::string_view name, std::size_t line) {
    for (auto id : kAllFilters) {
      if (set_name(id) == name) return id;
    }
    throw Error(ErrorCode::MalformedLine, "unknown set '" + std::string(name) + "'", line);
  }

  Block& open(FilterId id, RuleBlockKind kind) {
    if (blocks_.empty() || blocks_.back().filter != id || blocks_.back().kind != kind) {
      blocks_.push_back(Block{id, kind, {}, {}, {}, {}});
    }
    return blocks_.back();
  }

  static Ipv4 addr(std::string_view s, std::size_t line) {
    auto a = Ipv4::parse(s);
    if (!a) throw Error(ErrorCode::BadAddress, "bad address '" + std::string(s) + "'", line);
    return *a;
  }

  void parse_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string_view> tok;
    std::size_t p = 0;
    while (p < line.size()) {
      auto sp = line.find(' ', p);
      auto t = line.substr(p, sp == std::string_view::npos ? std::string_view::npos : sp - p);
      if (!t.empty()) tok.push_back(t);
      if (sp == std::string_view::npos) break;
      p = sp + 1;
    }
    auto bad = [&] { throw Error(ErrorCode::MalformedLine, "bad rule line '" + std::string(line) + "'", line_no); };
    if (tok.empty()) return;
    const auto cmd = tok[0];
    if (cmd == "ALLOW_SET" && tok.size() == 2) {
      blocks_.push_back(Block{filter_for_set(tok[1], line_no), RuleBlockKind::allow_set, {}, {}, {}, {}});
    } else if (cmd == "BLOCK_SET" && tok.size() == 2) {
      blocks_.push_back(Block{filter_for_set(tok[1], line_no), RuleBlockKind::block_set, {}, {}, {}, {}});
    } else if (cmd == "ADD" && tok.size() == 3) {
      if (blocks_.empty() || set_name(blocks_.back().filter) != tok[1]) bad();
      blocks_.back().set.insert(addr(tok[2], line_no));
    } else if (cmd == "DEFAULT_DROP" && tok.size() == 2) {
      if (blocks_.empty() || blocks_.back().kind != RuleBlockKind::allow_set) bad();
    } else if (cmd == "BLOCK_SRC_TTL_MISMATCH" && tok.size() == 3) {
      TtlSet set;
      std::string_view list = tok[2];
      std::size_t q = 0;
      while (q <= list.size()) {
        auto c = list.find(',', q);
        auto item = list.substr(q, c == std::string_view::npos ? std::string_view::npos : c - q);
        int v = -1;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v < 0 || v > 255) bad();
        set.set(static_cast<std::size_t>(v));
        if (c == std::string_view::npos) break;
        q = c + 1;
      }
      open(FilterId::HC, RuleBlockKind::ttl_mismatch).ttls[addr(tok[1], line_no)] = set;
    } else if (cmd == "BLOCK_QNAME_SUFFIX" && tok.size() == 2) {
      open(FilterId::FQ_t, RuleBlockKind::qname).suffixes.emplace_back(tok[1]);
    } else if (cmd == "BLOCK_QNAME_EXACT" && tok.size() == 2) {
      open(FilterId::FQ_t, RuleBlockKind::qname).exact.emplace_back(tok[1]);
    } else {
      bad();
    }
  }

  std::vector<Block> blocks_;
};

}  // namespace ddidd
