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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "asrkit/manifest.hpp"

namespace asrkit {

// Characters stripped from both ends of a token when strip_punctuation is on.
inline constexpr std::string_view kPunctuation =
    "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

struct NormalizerConfig {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool remove_fillers = false;
  std::vector<std::string> filler_set{"uh", "um"};

  // Throws ConfigError when a filler entry is not lowercase and
  // punctuation-free.
  void Validate() const;
};

// Whitespace split, then lowercase (ASCII), then strip leading/trailing
// punctuation (dropping tokens that become empty), then filler removal.
std::vector<std::string> Normalize(std::string_view text,
                                   const NormalizerConfig& config = {});

enum class EditOp : std::uint8_t { kMatch, kSubstitute, kDelete, kInsert };

struct AlignedPair {
  EditOp op;
  std::optional<std::size_t> ref_index;
  std::optional<std::size_t> hyp_index;
};

struct EditAlignment {
  std::vector<AlignedPair> ops;
  std::size_t matches = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t Cost() const { return substitutions + deletions + insertions; }
};

// Minimal unit-cost alignment. The backtrace prefers
// match > substitute > delete > insert whenever several moves are optimal.
EditAlignment EditAlign(std::span<const std::string> ref,
                        std::span<const std::string> hyp);

// Word-level Levenshtein distance without backtrace (two-row DP).
std::size_t EditDistance(std::span<const std::string> a,
                         std::span<const std::string> b);

struct WerCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_words = 0;

  WerCounts& operator+=(const WerCounts& other);
  // Throws DataError("empty reference corpus") when ref_words == 0.
  double Wer() const;
};

// Corpus-level aggregation: counts are summed over utterances before the
// single division in Wer().
WerCounts AggregateWer(std::span<const EditAlignment> alignments);

class WordFrequencyTable {
 public:
  // `counts` may be in any order and must not repeat a word.
  static WordFrequencyTable FromCounts(
      std::vector<std::pair<std::string, std::uint64_t>> counts,
      double coverage);

  double coverage() const { return coverage_; }
  std::uint64_t total() const { return total_; }
  // Sorted by (count descending, word ascending).
  const std::vector<std::pair<std::string, std::uint64_t>>& words() const {
    return words_;
  }
  std::size_t common_set_size() const { return common_size_; }
  std::uint64_t count(std::string_view word) const;
  bool IsCommon(std::string_view normalized_token) const;
  // Out-of-vocabulary tokens are rare.
  bool IsRare(std::string_view normalized_token) const {
    return !IsCommon(normalized_token);
  }

  // {coverage, total, words:[{w,count}], common_set_size}
  std::string ToJson() const;
  // Rebuilds the common set at `coverage`, or at the file's coverage when
  // unset. Throws DataError on schema or consistency violations.
  static WordFrequencyTable FromJson(std::string_view text,
                                     std::optional<double> coverage = {});

 private:
  double coverage_ = 0.9;
  std::uint64_t total_ = 0;
  std::vector<std::pair<std::string, std::uint64_t>> words_;
  std::size_t common_size_ = 0;
  std::unordered_set<std::string> common_;
};

// Counts normalized tokens over every transcript. Throws DataError on an
// empty corpus (no tokens), ConfigError when coverage is outside (0, 1].
WordFrequencyTable BuildFreqTable(std::span<const UtteranceRecord> manifest,
                                  const NormalizerConfig& normalizer,
                                  double coverage = 0.9);

// Normalizes `word` first; a word that normalizes to nothing is not rare.
bool IsRareWord(std::string_view word, const WordFrequencyTable& table,
                const NormalizerConfig& normalizer = {});

struct RareCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t rare_ref_words = 0;

  RareCounts& operator+=(const RareCounts& other);
  // Throws DataError when rare_ref_words == 0.
  double RareWer() const;
};

// Substitutions and deletions whose reference token is rare. Insertions have
// no reference token and are never counted.
RareCounts CountRareErrors(const EditAlignment& alignment,
                           std::span<const std::string> ref,
                           const WordFrequencyTable& table);

struct ScoreReport {
  WerCounts wer;
  std::optional<RareCounts> rare;
};

// Joins hypotheses to references by id (every id must appear on both sides)
// and scores in reference order. Rare counts are produced when `table` is
// given. Per-utterance alignment runs on up to `threads` workers.
ScoreReport Score(std::span<const UtteranceRecord> ref,
                  std::span<const UtteranceRecord> hyp,
                  const NormalizerConfig& normalizer,
                  const WordFrequencyTable* table, unsigned threads = 1);

// {S,D,I,N,wer[,S_r,D_r,N_r,rare_wer]}; throws like Wer()/RareWer().
std::string ScoreReportToJson(const ScoreReport& report);

}  // namespace asrkit
