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

// Query record model and the JSON-lines trace format.
//
// One line per query:
//   {"ts":100.0,"src":"192.0.2.1","ttl":57,"proto":"udp","qname":"example.com",
//    "qtype":"A","size":64,"label":"legit"}
// "label" is optional. Any other key is rejected.

#include <arpa/inet.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddidd/error.hpp"

namespace ddidd {

/// IPv4 address in host byte order.
struct Ipv4 {
  std::uint32_t value = 0;

  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) |
              std::uint32_t{d}) {}

  friend constexpr bool operator==(Ipv4, Ipv4) = default;
  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;

  /// Strict dotted-quad parse; nullopt on anything else.
  static std::optional<Ipv4> parse(std::string_view text) {
    if (text.empty() || text.size() > 15) return std::nullopt;
    char buf[16] = {};
    text.copy(buf, text.size());
    in_addr addr{};
    if (inet_pton(AF_INET, buf, &addr) != 1) return std::nullopt;
    return Ipv4(ntohl(addr.s_addr));
  }

  std::string str() const {
    std::string out;
    out.reserve(15);
    for (int shift = 24; shift >= 0; shift -= 8) {
      out += std::to_string((value >> shift) & 0xffu);
      if (shift != 0) out += '.';
    }
    return out;
  }
};

struct Ipv4Hash {
  std::size_t operator()(Ipv4 a) const noexcept {
    // splitmix-style finalizer; std::hash<uint32_t> is the identity on libstdc++.
    std::uint64_t x = a.value;
    x ^= x >> 16;
    x *= 0x7feb352dULL;
    x ^= x >> 15;
    x *= 0x846ca68bULL;
    x ^= x >> 16;
    return static_cast<std::size_t>(x);
  }
};

enum class Proto : std::uint8_t { udp, tcp };
enum class Label : std::uint8_t { legit, attack };

inline std::string_view to_string(Proto p) { return p == Proto::udp ? "udp" : "tcp"; }
inline std::string_view to_string(Label l) { return l == Label::legit ? "legit" : "attack"; }

/// The part of a query record that filters, detectors and the selector may see.
/// It deliberately has no ground-truth label.
struct QueryView {
  double ts = 0.0;
  Ipv4 src;
  std::uint8_t ttl = 0;
  Proto proto = Proto::udp;
  std::string_view qname;
  std::string_view qtype;
  std::uint32_t size = 0;
};

struct QueryRecord {
  double ts = 0.0;
  Ipv4 src;
  std::uint8_t ttl = 0;
  Proto proto = Proto::udp;
  std::string qname;
  std::string qtype;
  std::uint32_t size = 0;
  std::optional<Label> label;

  QueryView view() const { return QueryView{ts, src, ttl, proto, qname, qtype, size}; }

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

/// Lowercases ASCII and strips a single trailing dot.
inline std::string normalize_qname(std::string_view name) {
  std::string out(name);
  if (!out.empty() && out.back() == '.') out.pop_back();
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

struct QnameSegments {
  std::string_view tld;
  std::string_view subdomain;
  std::string_view full;
};

/// Segments view into `qname`, which must outlive the result.
inline QnameSegments segment_qname(std::string_view qname) {
  if (qname.empty()) throw Error(ErrorCode::EmptyName, "root query has no segments");
  auto last_dot = qname.rfind('.');
  if (last_dot == std::string_view::npos) return {qname, qname, qname};
  std::string_view tld = qname.substr(last_dot + 1);
  auto prev_dot = last_dot == 0 ? std::string_view::npos : qname.rfind('.', last_dot - 1);
  std::string_view sub = prev_dot == std::string_view::npos ? qname : qname.substr(prev_dot + 1);
  return {tld, sub, qname};
}

/// True when `name` equals `suffix` or ends with "." + suffix.
inline bool has_label_suffix(std::string_view name, std::string_view suffix) {
  if (suffix.empty()) return true;
  if (!name.ends_with(suffix)) return false;
  return name.size() == suffix.size() || name[name.size() - suffix.size() - 1] == '.';
}

namespace detail {

inline std::uint64_t get_uint(const nlohmann::json& v, const char* key) {
  if (!v.is_number_integer()) throw Error(ErrorCode::MalformedLine, std::string(key) + " must be an integer");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  auto s = v.get<std::int64_t>();
  if (s < 0) throw Error(ErrorCode::OutOfRange, std::string(key) + " is negative");
  return static_cast<std::uint64_t>(s);
}

inline const std::string& get_string(const nlohmann::json& v, const char* key) {
  if (!v.is_string()) throw Error(ErrorCode::MalformedLine, std::string(key) + " must be a string");
  return v.get_ref<const std::string&>();
}

}  // namespace detail

inline QueryRecord parse_trace_line(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedLine, "not a JSON object");

  QueryRecord rec;
  bool seen[7] = {};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "ts") {
      if (!v.is_number()) throw Error(ErrorCode::MalformedLine, "ts must be a number");
      rec.ts = v.get<double>();
      if (!std::isfinite(rec.ts) || rec.ts < 0) throw Error(ErrorCode::OutOfRange, "ts must be >= 0");
      seen[0] = true;
    } else if (key == "src") {
      auto addr = Ipv4::parse(detail::get_string(v, "src"));
      if (!addr) throw Error(ErrorCode::BadAddress, "src is not an IPv4 dotted quad");
      rec.src = *addr;
      seen[1] = true;
    } else if (key == "ttl") {
      auto ttl = detail::get_uint(v, "ttl");
      if (ttl > 255) throw Error(ErrorCode::OutOfRange, "ttl must be in [0,255]");
      rec.ttl = static_cast<std::uint8_t>(ttl);
      seen[2] = true;
    } else if (key == "proto") {
      const auto& p = detail::get_string(v, "proto");
      if (p == "udp") rec.proto = Proto::udp;
      else if (p == "tcp") rec.proto = Proto::tcp;
      else throw Error(ErrorCode::MalformedLine, "proto must be udp or tcp");
      seen[3] = true;
    } else if (key == "qname") {
      rec.qname = normalize_qname(detail::get_string(v, "qname"));
      seen[4] = true;
    } else if (key == "qtype") {
      rec.qtype = detail::get_string(v, "qtype");
      if (rec.qtype.empty()) throw Error(ErrorCode::MalformedLine, "qtype is empty");
      seen[5] = true;
    } else if (key == "size") {
      auto size = detail::get_uint(v, "size");
      if (size < 1 || size > 0xffffffffu) throw Error(ErrorCode::OutOfRange, "size must be >= 1");
      rec.size = static_cast<std::uint32_t>(size);
      seen[6] = true;
    } else if (key == "label") {
      const auto& l = detail::get_string(v, "label");
      if (l == "legit") rec.label = Label::legit;
      else if (l == "attack") rec.label = Label::attack;
      else throw Error(ErrorCode::MalformedLine, "label must be legit or attack");
    } else {
      throw Error(ErrorCode::MalformedLine, "unknown key '" + key + "'");
    }
  }
  static constexpr const char* kRequired[] = {"ts", "src", "ttl", "proto", "qname", "qtype", "size"};
  for (int i = 0; i < 7; ++i) {
    if (!seen[i]) throw Error(ErrorCode::MalformedLine, std::string("missing key ") + kRequired[i]);
  }
  return rec;
}

inline std::string format_trace_line(const QueryRecord& rec) {
  nlohmann::ordered_json j;
  j["ts"] = rec.ts;
  j["src"] = rec.src.str();
  j["ttl"] = rec.ttl;
  j["proto"] = to_string(rec.proto);
  j["qname"] = rec.qname;
  j["qtype"] = rec.qtype;
  j["size"] = rec.size;
  if (rec.label) j["label"] = to_string(*rec.label);
  return j.dump();
}

/// Pull interface shared by trace files, generators and in-memory vectors.
/// Implementations yield records with non-decreasing ts.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual bool next(QueryRecord& out) = 0;
};

class VectorSource final : public RecordSource {
 public:
  explicit VectorSource(const std::vector<QueryRecord>& records) : records_(&records) {}
  bool next(QueryRecord& out) override {
    if (pos_ >= records_->size()) return false;
    out = (*records_)[pos_++];
    return true;
  }

 private:
  const std::vector<QueryRecord>* records_;
  std::size_t pos_ = 0;
};

/// Streams a trace file line by line; memory use is independent of file size.
class TraceReader final : public RecordSource {
 public:
  explicit TraceReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw Error(ErrorCode::IoError, "cannot open " + path);
  }

  bool next(QueryRecord& out) override {
    std::string line;
    if (!std::getline(in_, line)) {
      if (in_.bad()) throw Error(ErrorCode::IoError, "read failed on " + path_, line_no_);
      return false;
    }
    ++line_no_;
    try {
      out = parse_trace_line(line);
    } catch (const Error& e) {
      throw Error(e.code(), path_ + ":" + std::to_string(line_no_) + ": " + e.what(), line_no_);
    }
    if (have_prev_ && out.ts < prev_ts_) {
      throw Error(ErrorCode::MonotonicityViolation,
                  path_ + ":" + std::to_string(line_no_) + ": ts decreases", line_no_);
    }
    prev_ts_ = out.ts;
    have_prev_ = true;
    return true;
  }

  std::size_t line_number() const { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  double prev_ts_ = 0.0;
  bool have_prev_ = false;
};

class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot create " + path);
  }

  void write(const QueryRecord& rec) {
    if (have_prev_ && rec.ts < prev_ts_) {
      throw Error(ErrorCode::MonotonicityViolation, "records must be written in ts order", count_ + 1);
    }
    out_ << format_trace_line(rec) << '\n';
    if (!out_) throw Error(ErrorCode::IoError, "write failed on " + path_);
    prev_ts_ = rec.ts;
    have_prev_ = true;
    ++count_;
  }

  std::size_t count() const { return count_; }

  void close() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::IoError, "flush failed on " + path_);
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
  double prev_ts_ = 0.0;
  bool have_prev_ = false;
  std::size_t count_ = 0;
};

/// Loads a whole trace into memory. Use TraceReader for large files.
inline std::vector<QueryRecord> read_trace(const std::string& path) {
  TraceReader reader(path);
  std::vector<QueryRecord> out;
  QueryRecord rec;
  while (reader.next(rec)) out.push_back(std::move(rec));
  return out;
}

inline void write_trace(const std::vector<QueryRecord>& records, const std::string& path) {
  TraceWriter writer(path);
  for (const auto& r : records) writer.write(r);
  writer.close();
}

}  // namespace ddidd

template <>
struct std::hash<ddidd::Ipv4> : ddidd::Ipv4Hash {};
