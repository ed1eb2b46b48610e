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

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "asrkit/error.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

[[noreturn]] void Invalid(const std::string& id, const std::string& field,
                          const std::string& what) {
  throw ValidationError("record '" + id + "': field '" + field + "': " + what);
}

bool IsPresent(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && !it->is_null();
}

std::string GetString(const json& obj, const char* key, const std::string& id,
                      bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) Invalid(id, key, "missing");
    return {};
  }
  if (!it->is_string()) Invalid(id, key, "expected a string");
  return it->get<std::string>();
}

double GetNumber(const json& value, const std::string& id, const char* key) {
  if (!value.is_number()) Invalid(id, key, "expected a number");
  return value.get<double>();
}

UtteranceRecord RecordFromJson(const json& obj) {
  if (!obj.is_object()) throw ValidationError("expected a JSON object");
  UtteranceRecord rec;
  // The id is needed for every other message, so it is read first.
  {
    auto it = obj.find("id");
    if (it == obj.end() || it->is_null()) Invalid("?", "id", "missing");
    if (!it->is_string()) Invalid("?", "id", "expected a string");
    rec.id = it->get<std::string>();
  }
  rec.audio_path = GetString(obj, "audio_path", rec.id, true);
  if (!IsPresent(obj, "duration_s")) Invalid(rec.id, "duration_s", "missing");
  rec.duration_s = GetNumber(obj.at("duration_s"), rec.id, "duration_s");
  if (IsPresent(obj, "offset_s"))
    rec.offset_s = GetNumber(obj.at("offset_s"), rec.id, "offset_s");
  rec.transcript = GetString(obj, "transcript", rec.id, true);
  if (IsPresent(obj, "confidence"))
    rec.confidence = GetNumber(obj.at("confidence"), rec.id, "confidence");
  if (IsPresent(obj, "country"))
    rec.country = GetString(obj, "country", rec.id, true);
  rec.source = GetString(obj, "source", rec.id, false);
  if (IsPresent(obj, "word_alignments")) {
    const json& spans = obj.at("word_alignments");
    if (!spans.is_array())
      Invalid(rec.id, "word_alignments", "expected an array");
    std::vector<WordSpan> out;
    out.reserve(spans.size());
    for (const json& s : spans) {
      if (!s.is_object())
        Invalid(rec.id, "word_alignments", "expected objects");
      WordSpan span;
      span.word = GetString(s, "word", rec.id, true);
      if (!IsPresent(s, "start_s") || !IsPresent(s, "end_s"))
        Invalid(rec.id, "word_alignments", "span missing start_s/end_s");
      span.start_s = GetNumber(s.at("start_s"), rec.id, "start_s");
      span.end_s = GetNumber(s.at("end_s"), rec.id, "end_s");
      out.push_back(std::move(span));
    }
    rec.word_alignments = std::move(out);
  }
  return rec;
}

ordered_json RecordToJson(const UtteranceRecord& rec) {
  ordered_json obj;
  obj["id"] = rec.id;
  obj["audio_path"] = rec.audio_path;
  obj["duration_s"] = rec.duration_s;
  if (rec.offset_s) obj["offset_s"] = *rec.offset_s;
  obj["transcript"] = rec.transcript;
  if (rec.confidence) obj["confidence"] = *rec.confidence;
  if (rec.country) obj["country"] = *rec.country;
  if (!rec.source.empty()) obj["source"] = rec.source;
  if (rec.word_alignments) {
    ordered_json spans = ordered_json::array();
    for (const WordSpan& s : *rec.word_alignments) {
      ordered_json span;
      span["word"] = s.word;
      span["start_s"] = s.start_s;
      span["end_s"] = s.end_s;
      spans.push_back(std::move(span));
    }
    obj["word_alignments"] = std::move(spans);
  }
  return obj;
}

template <typename Fn>
void ForEachJsonLine(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (char c : line) {
      if (!IsSpace(c)) {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      fn(value);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
}

}  // namespace

std::vector<std::string_view> SplitWords(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !IsSpace(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::size_t WordCount(std::string_view text) { return SplitWords(text).size(); }

void ValidateRecord(const UtteranceRecord& rec) {
  if (rec.id.empty()) Invalid(rec.id, "id", "empty id");
  if (!std::isfinite(rec.duration_s) || rec.duration_s <= 0.0)
    Invalid(rec.id, "duration_s", "duration must be > 0");
  if (rec.offset_s && (!std::isfinite(*rec.offset_s) || *rec.offset_s < 0.0))
    Invalid(rec.id, "offset_s", "offset must be >= 0");
  if (rec.confidence &&
      !(*rec.confidence >= 0.0 && *rec.confidence <= 1.0))
    Invalid(rec.id, "confidence", "confidence out of range");
  if (rec.country) {
    const std::string& c = *rec.country;
    if (c.size() != 2 || c[0] < 'A' || c[0] > 'Z' || c[1] < 'A' || c[1] > 'Z')
      Invalid(rec.id, "country", "expected an ISO 3166-1 alpha-2 code");
  }
  if (rec.word_alignments) {
    const auto& spans = *rec.word_alignments;
    const auto words = SplitWords(rec.transcript);
    if (spans.size() != words.size())
      Invalid(rec.id, "word_alignments", "word count differs from transcript");
    double prev_end = 0.0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const WordSpan& s = spans[i];
      if (s.word.empty()) Invalid(rec.id, "word_alignments", "empty word");
      if (s.word != words[i])
        Invalid(rec.id, "word_alignments",
                "word '" + s.word + "' does not match transcript");
      if (!(s.start_s >= 0.0 && s.start_s < s.end_s))
        Invalid(rec.id, "word_alignments", "span needs 0 <= start_s < end_s");
      if (s.start_s < prev_end)
        Invalid(rec.id, "word_alignments", "spans overlap or are unordered");
      if (s.end_s > rec.duration_s)
        Invalid(rec.id, "word_alignments", "span ends after duration_s");
      prev_end = s.end_s;
    }
  }
}

std::vector<UtteranceRecord> ParseManifest(std::istream& in) {
  std::vector<UtteranceRecord> records;
  std::unordered_set<std::string> seen;
  ForEachJsonLine(in, [&](const json& value) {
    UtteranceRecord rec = RecordFromJson(value);
    ValidateRecord(rec);
    if (!seen.insert(rec.id).second) Invalid(rec.id, "id", "duplicate id");
    records.push_back(std::move(rec));
  });
  return records;
}

std::vector<UtteranceRecord> ParseManifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ParseManifest(in);
}

std::string RecordToJsonLine(const UtteranceRecord& record) {
  return RecordToJson(record).dump();
}

void WriteManifest(std::ostream& out, std::span<const UtteranceRecord> records) {
  for (const UtteranceRecord& rec : records) out << RecordToJsonLine(rec) << '\n';
}

std::string WriteManifest(std::span<const UtteranceRecord> records) {
  std::ostringstream out;
  WriteManifest(out, records);
  return out.str();
}

std::vector<HypothesisPair> ParseHypothesisPairs(std::istream& in) {
  std::vector<HypothesisPair> pairs;
  std::unordered_set<std::string> seen;
  ForEachJsonLine(in, [&](const json& value) {
    if (!value.is_object()) throw ValidationError("expected a JSON object");
    HypothesisPair pair;
    pair.id = GetString(value, "id", "?", true);
    if (pair.id.empty()) Invalid(pair.id, "id", "empty id");
    pair.primary_hyp = GetString(value, "primary_hyp", pair.id, true);
    pair.secondary_hyp = GetString(value, "secondary_hyp", pair.id, true);
    if (!seen.insert(pair.id).second) Invalid(pair.id, "id", "duplicate id");
    pairs.push_back(std::move(pair));
  });
  return pairs;
}

std::vector<HypothesisPair> ParseHypothesisPairs(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ParseHypothesisPairs(in);
}

std::string WriteHypothesisPairs(std::span<const HypothesisPair> pairs) {
  std::string out;
  for (const HypothesisPair& p : pairs) {
    ordered_json obj;
    obj["id"] = p.id;
    obj["primary_hyp"] = p.primary_hyp;
    obj["secondary_hyp"] = p.secondary_hyp;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace asrkit
