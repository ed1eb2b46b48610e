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

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asrkit {

struct WordSpan {
  std::string word;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const WordSpan&) const = default;
};

// One corpus row. `offset_s` is set only on records produced by segmentation
// and gives the segment start inside `audio_path`; word alignments are always
// relative to the record itself, i.e. contained in [0, duration_s].
struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  double duration_s = 0.0;
  std::optional<double> offset_s;
  std::string transcript;
  std::optional<double> confidence;
  std::optional<std::string> country;
  std::string source;
  std::optional<std::vector<WordSpan>> word_alignments;

  bool operator==(const UtteranceRecord&) const = default;
};

struct HypothesisPair {
  std::string id;
  std::string primary_hyp;
  std::string secondary_hyp;

  bool operator==(const HypothesisPair&) const = default;
};

// Words are maximal runs of non-whitespace.
std::vector<std::string_view> SplitWords(std::string_view text);
std::size_t WordCount(std::string_view text);

// Throws ValidationError naming the field and the id.
void ValidateRecord(const UtteranceRecord& record);

// JSONL manifests. Blank lines are skipped; line numbers in errors are
// 1-based physical line numbers. Duplicate ids are rejected.
std::vector<UtteranceRecord> ParseManifest(std::istream& in);
std::vector<UtteranceRecord> ParseManifest(std::string_view text);

// Keys are written in the order: id, audio_path, duration_s, offset_s,
// transcript, confidence, country, source, word_alignments. Optional fields
// that are absent (and an empty source) are omitted. Doubles use the shortest
// representation that round-trips.
void WriteManifest(std::ostream& out, std::span<const UtteranceRecord> records);
std::string WriteManifest(std::span<const UtteranceRecord> records);
std::string RecordToJsonLine(const UtteranceRecord& record);

std::vector<HypothesisPair> ParseHypothesisPairs(std::istream& in);
std::vector<HypothesisPair> ParseHypothesisPairs(std::string_view text);
std::string WriteHypothesisPairs(std::span<const HypothesisPair> pairs);

}  // namespace asrkit
