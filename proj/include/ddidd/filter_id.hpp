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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ddidd/trace.hpp"

namespace ddidd {

/// Declaration order is the fixed tie-break order used by the selector.
enum class FilterId : std::uint8_t { FQ_t, UR, HC, WR, FQ_s, AR };

inline constexpr std::array<FilterId, 6> kAllFilters = {FilterId::FQ_t, FilterId::UR, FilterId::HC,
                                                        FilterId::WR,   FilterId::FQ_s, FilterId::AR};

inline std::string_view to_string(FilterId id) {
  switch (id) {
    case FilterId::FQ_t: return "FQ_t";
    case FilterId::UR: return "UR";
    case FilterId::HC: return "HC";
    case FilterId::WR: return "WR";
    case FilterId::FQ_s: return "FQ_s";
    case FilterId::AR: return "AR";
  }
  return "?";
}

inline std::optional<FilterId> parse_filter_id(std::string_view s) {
  for (auto id : kAllFilters) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

/// "UR+HC"; "-" for an empty pipeline.
inline std::string pipeline_string(const std::vector<FilterId>& pipeline) {
  if (pipeline.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    if (i) out += '+';
    out += to_string(pipeline[i]);
  }
  return out;
}

enum class Disposition : std::uint8_t { pass, drop };

struct Verdict {
  Disposition disposition = Disposition::pass;
  std::optional<FilterId> filter;  // set when dropped

  static Verdict pass() { return {}; }
  static Verdict drop(FilterId id) { return {Disposition::drop, id}; }
  bool dropped() const { return disposition == Disposition::drop; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

using SourceSet = std::unordered_set<Ipv4, Ipv4Hash>;

}  // namespace ddidd
