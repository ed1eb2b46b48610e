// Copyright 2026 The asrkit Authors.
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

#include "asrkit/manifest.hpp"

#include <random>

#include "asrkit/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace asrkit;

TEST_CASE("manifest: minimal line maps fields directly") {
  auto recs = ParseManifest(
      R"({"id":"u1","audio_path":"a.wav","duration_s":10.0,"transcript":"hello world"})");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].id == "u1");
  CHECK(recs[0].audio_path == "a.wav");
  CHECK(recs[0].duration_s == 10.0);
  CHECK(WordCount(recs[0].transcript) == 2);
  CHECK_FALSE(recs[0].confidence.has_value());
  CHECK_FALSE(recs[0].country.has_value());
  CHECK_FALSE(recs[0].word_alignments.has_value());
}

TEST_CASE("manifest: empty input gives an empty list") {
  CHECK(ParseManifest(std::string_view("")).empty());
  CHECK(ParseManifest(std::string_view("\n  \n")).empty());
}

TEST_CASE("manifest: null optional fields are treated as absent") {
  auto recs = ParseManifest(
      R"({"id":"u1","audio_path":"a","duration_s":1,"transcript":"","confidence":null,"country":null})");
  CHECK_FALSE(recs[0].confidence.has_value());
  CHECK(WriteManifest(recs) ==
        "{\"id\":\"u1\",\"audio_path\":\"a\",\"duration_s\":1.0,\"transcript\":\"\"}\n");
}

TEST_CASE("manifest: invariant violations are rejected with the field name") {
  const auto message = [](std::string_view text) -> std::string {
    try {
      ParseManifest(text);
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message(R"({"id":"u1","audio_path":"a","duration_s":1,"transcript":"x","confidence":1.5})")
            .find("confidence out of range") != std::string::npos);
  CHECK(message(R"({"id":"u1","audio_path":"a","duration_s":0,"transcript":"x"})")
            .find("duration_s") != std::string::npos);
  CHECK(message(R"({"id":"u1","audio_path":"a","duration_s":1,"transcript":"x","country":"usa"})")
            .find("country") != std::string::npos);
  CHECK(message(R"({"id":"u9","audio_path":"a","duration_s":1,"transcript":"a b",)"
                R"("word_alignments":[{"word":"a","start_s":0,"end_s":0.5},{"word":"c","start_s":0.5,"end_s":0.9}]})")
            .find("u9") != std::string::npos);
  // Overlapping spans.
  CHECK(message(R"({"id":"u1","audio_path":"a","duration_s":1,"transcript":"a b",)"
                R"("word_alignments":[{"word":"a","start_s":0,"end_s":0.5},{"word":"b","start_s":0.4,"end_s":0.9}]})")
            .find("overlap") != std::string::npos);
  // Span past the end of the audio.
  CHECK(message(R"({"id":"u1","audio_path":"a","duration_s":1,"transcript":"a",)"
                R"("word_alignments":[{"word":"a","start_s":0.5,"end_s":1.5}]})")
            .find("after duration") != std::string::npos);
  CHECK(message("{\"id\":\"u1\",\"audio_path\":\"a\",\"duration_s\":1,\"transcript\":\"x\"}\n"
                "{\"id\":\"u1\",\"audio_path\":\"b\",\"duration_s\":1,\"transcript\":\"y\"}")
            .find("duplicate") != std::string::npos);
}

TEST_CASE("manifest: malformed JSON reports the line number") {
  try {
    ParseManifest(std::string_view(
        "{\"id\":\"u1\",\"audio_path\":\"a\",\"duration_s\":1,\"transcript\":\"x\"}\n{oops"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("manifest: write preserves order and omits absent optionals") {
  UtteranceRecord a{"r1", "x.wav", 2.5, {}, "a b", 0.25, "US", "video", {}};
  UtteranceRecord b{"r2", "y.wav", 1.0, {}, "", {}, {}, "", {}};
  const std::vector<UtteranceRecord> recs{a, b};
  const std::string text = WriteManifest(recs);
  CHECK(text ==
        "{\"id\":\"r1\",\"audio_path\":\"x.wav\",\"duration_s\":2.5,\"transcript\":\"a b\","
        "\"confidence\":0.25,\"country\":\"US\",\"source\":\"video\"}\n"
        "{\"id\":\"r2\",\"audio_path\":\"y.wav\",\"duration_s\":1.0,\"transcript\":\"\"}\n");
}

TEST_CASE("manifest: parse(write(x)) == x and write is deterministic") {
  std::mt19937_64 rng(11);
  std::vector<UtteranceRecord> recs;
  for (int i = 0; i < 300; ++i)
    recs.push_back(testing::RandomRecord(rng, "id" + std::to_string(i)));
  for (const auto& r : recs) ValidateRecord(r);
  const std::string text = WriteManifest(recs);
  CHECK(ParseManifest(text) == recs);
  CHECK(WriteManifest(recs) == text);
}

TEST_CASE("manifest: hypothesis pairs") {
  auto pairs = ParseHypothesisPairs(std::string_view(
      R"({"id":"u1","primary_hyp":"a b","secondary_hyp":"a c"})"));
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].secondary_hyp == "a c");
  CHECK(ParseHypothesisPairs(WriteHypothesisPairs(pairs)) == pairs);
  CHECK_THROWS_AS(ParseHypothesisPairs(std::string_view(
                      R"({"id":"","primary_hyp":"a","secondary_hyp":"a"})")),
                  ValidationError);
}
