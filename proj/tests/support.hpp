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

// Small builders shared by the unit tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ddidd/ddidd.hpp"

namespace ddidd::testing {

inline Ipv4 ip(const char* text) { return *Ipv4::parse(text); }

inline QueryRecord rec(double ts, const char* src, int ttl = 64, std::string qname = "example.com",
                       std::optional<Label> label = std::nullopt) {
  QueryRecord r;
  r.ts = ts;
  r.src = ip(src);
  r.ttl = static_cast<std::uint8_t>(ttl);
  r.qname = std::move(qname);
  r.qtype = "A";
  r.size = 64;
  r.label = label;
  return r;
}

inline QueryRecord rec(double ts, Ipv4 src, int ttl = 64, std::string qname = "example.com",
                       std::optional<Label> label = std::nullopt) {
  QueryRecord r;
  r.ts = ts;
  r.src = src;
  r.ttl = static_cast<std::uint8_t>(ttl);
  r.qname = std::move(qname);
  r.qtype = "A";
  r.size = 64;
  r.label = label;
  return r;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ddidd-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// A quiet desk-scale profile: 1000 sources, rates over five decades, about
/// 87 qps in aggregate.
inline LegitProfile small_profile(std::int64_t duration, std::uint64_t seed = 5) {
  LegitProfile p;
  p.n_sources = 1000;
  p.rate_min = 1e-5;
  p.rate_max = 1.0;
  p.duration = duration;
  p.seed = seed;
  return p;
}

inline Ipv4 random_addr(std::mt19937_64& rng) {
  return Ipv4{static_cast<std::uint32_t>(rng())};
}

}  // namespace ddidd::testing
