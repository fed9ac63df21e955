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

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support.hpp"

namespace ddidd {
namespace {

using testing::TempDir;

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::ConfigError;
}

TEST(ParseTraceLine, MapsFieldsDirectly) {
  auto r = parse_trace_line(
      R"({"ts":100.0,"src":"192.0.2.1","ttl":57,"proto":"udp","qname":"example.com","qtype":"A","size":64})");
  EXPECT_DOUBLE_EQ(r.ts, 100.0);
  EXPECT_EQ(r.src, Ipv4(192, 0, 2, 1));
  EXPECT_EQ(r.ttl, 57);
  EXPECT_EQ(r.proto, Proto::udp);
  EXPECT_EQ(r.qtype, "A");
  EXPECT_EQ(r.size, 64u);
  EXPECT_FALSE(r.label.has_value());
  EXPECT_EQ(segment_qname(r.qname).tld, "com");
}

TEST(ParseTraceLine, NormalizesQname) {
  auto r = parse_trace_line(
      R"({"ts":1,"src":"192.0.2.1","ttl":57,"proto":"udp","qname":"WWW.Example.COM.","qtype":"A","size":64})");
  EXPECT_EQ(r.qname, "www.example.com");
}

TEST(ParseTraceLine, RejectsOutOfRangeAndBadInput) {
  const std::string ok_tail = R"(,"proto":"udp","qname":"a.com","qtype":"A","size":64})";
  EXPECT_EQ(code_of([&] { parse_trace_line(R"({"ts":1,"src":"192.0.2.1","ttl":300)" + ok_tail); }),
            ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([&] { parse_trace_line(R"({"ts":-1,"src":"192.0.2.1","ttl":3)" + ok_tail); }),
            ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([&] { parse_trace_line(R"({"ts":1,"src":"192.0.2.300","ttl":3)" + ok_tail); }),
            ErrorCode::BadAddress);
  EXPECT_EQ(code_of([&] { parse_trace_line(R"({"ts":1,"src":"::1","ttl":3)" + ok_tail); }), ErrorCode::BadAddress);
  EXPECT_EQ(code_of([&] { parse_trace_line("not json"); }), ErrorCode::MalformedLine);
  EXPECT_EQ(code_of([&] {
              parse_trace_line(
                  R"({"ts":1,"src":"192.0.2.1","ttl":3,"proto":"udp","qname":"a.com","qtype":"A","size":0})");
            }),
            ErrorCode::OutOfRange);
}

TEST(ParseTraceLine, RejectsUnknownAndMissingKeys) {
  EXPECT_EQ(code_of([] {
              parse_trace_line(
                  R"({"ts":1,"src":"192.0.2.1","ttl":3,"proto":"udp","qname":"a.com","qtype":"A","size":9,"x":1})");
            }),
            ErrorCode::MalformedLine);
  EXPECT_EQ(code_of([] { parse_trace_line(R"({"ts":1,"src":"192.0.2.1","ttl":3,"proto":"udp","qname":"a.com"})"); }),
            ErrorCode::MalformedLine);
}

TEST(ParseTraceLine, AcceptsSynFloodAndMalformedEncodings) {
  auto syn = parse_trace_line(
      R"({"ts":2,"src":"198.51.100.7","ttl":50,"proto":"tcp","qname":"","qtype":"NONE","size":40,"label":"attack"})");
  EXPECT_EQ(syn.proto, Proto::tcp);
  EXPECT_EQ(syn.qtype, "NONE");
  EXPECT_EQ(syn.label, Label::attack);
  auto bad = parse_trace_line(
      R"({"ts":2,"src":"198.51.100.7","ttl":50,"proto":"udp","qname":"_malformed","qtype":"NONE","size":12})");
  EXPECT_EQ(bad.qname, "_malformed");
}

TEST(SegmentQname, Examples) {
  auto s = segment_qname("www.example.com");
  EXPECT_EQ(s.tld, "com");
  EXPECT_EQ(s.subdomain, "example.com");
  EXPECT_EQ(s.full, "www.example.com");
  s = segment_qname("com");
  EXPECT_EQ(s.tld, "com");
  EXPECT_EQ(s.subdomain, "com");
  EXPECT_EQ(s.full, "com");
  s = segment_qname("a.b.c.d.example.xyz");
  EXPECT_EQ(s.tld, "xyz");
  EXPECT_EQ(s.subdomain, "example.xyz");
  EXPECT_EQ(s.full, "a.b.c.d.example.xyz");
  EXPECT_EQ(code_of([] { segment_qname(""); }), ErrorCode::EmptyName);
}

TEST(SegmentQname, SuffixChainHoldsForRandomNames) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> labels(1, 6), len(1, 8), letter(0, 25);
  for (int i = 0; i < 2000; ++i) {
    std::string name;
    int n = labels(rng);
    for (int l = 0; l < n; ++l) {
      if (l) name += '.';
      int k = len(rng);
      for (int c = 0; c < k; ++c) name += static_cast<char>('a' + letter(rng));
    }
    auto s = segment_qname(name);
    EXPECT_EQ(s.full, name);
    EXPECT_TRUE(has_label_suffix(s.full, s.subdomain)) << name;
    EXPECT_TRUE(has_label_suffix(s.subdomain, s.tld)) << name;
    if (n == 1) {
      EXPECT_EQ(s.tld, s.full);
    }
  }
}

TEST(TraceFile, RoundTripsThreeRecords) {
  TempDir dir("trace");
  std::vector<QueryRecord> in = {testing::rec(5.0, "192.0.2.1", 57, "a.com", Label::legit),
                                 testing::rec(5.25, "192.0.2.2", 58, "b.net", Label::attack),
                                 testing::rec(6.000001, "10.0.0.1", 255, "c", std::nullopt)};
  in[2].proto = Proto::tcp;
  in[2].qtype = "NONE";
  write_trace(in, dir.file("t.jsonl"));
  EXPECT_EQ(read_trace(dir.file("t.jsonl")), in);
}

TEST(TraceFile, RoundTripIsIdentityOnRandomStreams) {
  TempDir dir("trace");
  std::mt19937_64 rng(11);
  std::vector<QueryRecord> in;
  double ts = 0;
  for (int i = 0; i < 500; ++i) {
    ts += std::uniform_real_distribution<double>(0, 0.01)(rng);
    auto r = testing::rec(ts, testing::random_addr(rng), static_cast<int>(rng() % 256), "x" + std::to_string(rng() % 97) + ".org",
                          rng() % 3 == 0 ? std::nullopt : std::optional<Label>(rng() % 2 ? Label::legit : Label::attack));
    r.size = static_cast<std::uint32_t>(1 + rng() % 1500);
    in.push_back(r);
  }
  write_trace(in, dir.file("a.jsonl"));
  auto out = read_trace(dir.file("a.jsonl"));
  ASSERT_EQ(out, in);
  write_trace(out, dir.file("b.jsonl"));
  std::ifstream a(dir.file("a.jsonl")), b(dir.file("b.jsonl"));
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST(TraceFile, RejectsDecreasingTimestampWithLineNumber) {
  TempDir dir("trace");
  {
    std::ofstream f(dir.file("bad.jsonl"));
    f << format_trace_line(testing::rec(5.0, "192.0.2.1")) << '\n'
      << format_trace_line(testing::rec(4.9, "192.0.2.1")) << '\n';
  }
  try {
    read_trace(dir.file("bad.jsonl"));
    FAIL() << "expected MonotonicityViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MonotonicityViolation);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(TraceFile, EmptyFileIsEmptyStream) {
  TempDir dir("trace");
  { std::ofstream f(dir.file("empty.jsonl")); }
  EXPECT_TRUE(read_trace(dir.file("empty.jsonl")).empty());
  EXPECT_EQ(code_of([&] { read_trace(dir.file("missing.jsonl")); }), ErrorCode::IoError);
}

TEST(TraceFile, WriterRejectsOutOfOrderRecords) {
  TempDir dir("trace");
  TraceWriter w(dir.file("w.jsonl"));
  w.write(testing::rec(2.0, "192.0.2.1"));
  EXPECT_EQ(code_of([&] { w.write(testing::rec(1.0, "192.0.2.1")); }), ErrorCode::MonotonicityViolation);
}

}  // namespace
}  // namespace ddidd
