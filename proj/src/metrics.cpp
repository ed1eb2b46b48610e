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

#include "asrkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "asrkit/error.hpp"
#include "asrkit/parallel.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

bool IsPunct(char c) {
  return kPunctuation.find(c) != std::string_view::npos;
}

char AsciiLower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

void NormalizerConfig::Validate() const {
  for (const std::string& f : filler_set) {
    if (f.empty()) throw ConfigError("filler_set contains an empty entry");
    for (char c : f) {
      if (AsciiLower(c) != c || IsPunct(c))
        throw ConfigError("filler '" + f +
                          "' must be lowercase and punctuation-free");
    }
  }
}

std::vector<std::string> Normalize(std::string_view text,
                                   const NormalizerConfig& config) {
  std::vector<std::string> tokens;
  for (std::string_view word : SplitWords(text)) {
    if (config.strip_punctuation) {
      while (!word.empty() && IsPunct(word.front())) word.remove_prefix(1);
      while (!word.empty() && IsPunct(word.back())) word.remove_suffix(1);
      if (word.empty()) continue;
    }
    std::string token(word);
    if (config.lowercase)
      std::transform(token.begin(), token.end(), token.begin(), AsciiLower);
    if (config.remove_fillers &&
        std::find(config.filler_set.begin(), config.filler_set.end(), token) !=
            config.filler_set.end())
      continue;
    tokens.push_back(std::move(token));
  }
  return tokens;
}

EditAlignment EditAlign(std::span<const std::string> ref,
                        std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t width = m + 1;
  std::vector<std::size_t> d((n + 1) * width);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return d[i * width + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  EditAlignment result;
  result.ref_length = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::size_t cur = at(i, j);
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && cur == at(i - 1, j - 1)) {
      result.ops.push_back({EditOp::kMatch, i - 1, j - 1});
      ++result.matches;
      --i;
      --j;
    } else if (i > 0 && j > 0 && cur == at(i - 1, j - 1) + 1) {
      result.ops.push_back({EditOp::kSubstitute, i - 1, j - 1});
      ++result.substitutions;
      --i;
      --j;
    } else if (i > 0 && cur == at(i - 1, j) + 1) {
      result.ops.push_back({EditOp::kDelete, i - 1, std::nullopt});
      ++result.deletions;
      --i;
    } else {
      result.ops.push_back({EditOp::kInsert, std::nullopt, j - 1});
      ++result.insertions;
      --j;
    }
  }
  std::reverse(result.ops.begin(), result.ops.end());
  return result;
}

std::size_t EditDistance(std::span<const std::string> a,
                         std::span<const std::string> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t previous = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t old_row = row[j];
      row[j] = std::min({previous + (a[i - 1] == b[j - 1] ? 0 : 1), row[j] + 1,
                         row[j - 1] + 1});
      previous = old_row;
    }
  }
  return row[b.size()];
}

WerCounts& WerCounts::operator+=(const WerCounts& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  ref_words += other.ref_words;
  return *this;
}

double WerCounts::Wer() const {
  if (ref_words == 0) throw DataError("empty reference corpus (N=0)");
  return static_cast<double>(substitutions + deletions + insertions) /
         static_cast<double>(ref_words);
}

WerCounts AggregateWer(std::span<const EditAlignment> alignments) {
  WerCounts total;
  for (const EditAlignment& a : alignments) {
    total += WerCounts{a.substitutions, a.deletions, a.insertions, a.ref_length};
  }
  return total;
}

// ---------------------------------------------------------------------------
// Frequency table

WordFrequencyTable WordFrequencyTable::FromCounts(
    std::vector<std::pair<std::string, std::uint64_t>> counts,
    double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0))
    throw ConfigError("coverage must be in (0, 1]");
  WordFrequencyTable table;
  table.coverage_ = coverage;
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i].first == counts[i - 1].first)
      throw DataError("frequency table repeats word '" + counts[i].first + "'");
  }
  for (const auto& [word, count] : counts) table.total_ += count;
  table.words_ = std::move(counts);

  // Minimal prefix whose cumulative count reaches coverage * total. The
  // relative slack keeps products such as 0.29 * 100 from landing just above
  // the integer they denote.
  const long double target = static_cast<long double>(coverage) *
                             static_cast<long double>(table.total_) *
                             (1.0L - 1e-12L);
  std::uint64_t cumulative = 0;
  std::size_t size = 0;
  while (size < table.words_.size() &&
         static_cast<long double>(cumulative) < target) {
    cumulative += table.words_[size].second;
    ++size;
  }
  table.common_size_ = size;
  table.common_.reserve(size);
  for (std::size_t i = 0; i < size; ++i) table.common_.insert(table.words_[i].first);
  return table;
}

std::uint64_t WordFrequencyTable::count(std::string_view word) const {
  for (const auto& [w, c] : words_) {
    if (w == word) return c;
  }
  return 0;
}

bool WordFrequencyTable::IsCommon(std::string_view token) const {
  return common_.find(std::string(token)) != common_.end();
}

std::string WordFrequencyTable::ToJson() const {
  nlohmann::ordered_json obj;
  obj["coverage"] = coverage_;
  obj["total"] = total_;
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& [w, c] : words_) {
    nlohmann::ordered_json entry;
    entry["w"] = w;
    entry["count"] = c;
    words.push_back(std::move(entry));
  }
  obj["words"] = std::move(words);
  obj["common_set_size"] = common_size_;
  return obj.dump(1) + "\n";
}

WordFrequencyTable WordFrequencyTable::FromJson(std::string_view text,
                                                std::optional<double> coverage) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("frequency table: malformed JSON: ") + e.what());
  }
  try {
    const double file_coverage = obj.at("coverage").get<double>();
    const auto total = obj.at("total").get<std::uint64_t>();
    const auto common_size = obj.at("common_set_size").get<std::size_t>();
    std::vector<std::pair<std::string, std::uint64_t>> counts;
    for (const auto& entry : obj.at("words")) {
      counts.emplace_back(entry.at("w").get<std::string>(),
                          entry.at("count").get<std::uint64_t>());
    }
    WordFrequencyTable table =
        FromCounts(std::move(counts), file_coverage);
    if (table.total() != total)
      throw DataError("frequency table: total does not match word counts");
    if (table.common_set_size() != common_size)
      throw DataError("frequency table: common_set_size is inconsistent");
    if (coverage && *coverage != file_coverage) {
      std::vector<std::pair<std::string, std::uint64_t>> words = table.words_;
      return FromCounts(std::move(words), *coverage);
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("frequency table: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("frequency table: ") + e.what());
  }
}

WordFrequencyTable BuildFreqTable(std::span<const UtteranceRecord> manifest,
                                  const NormalizerConfig& normalizer,
                                  double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0))
    throw ConfigError("coverage must be in (0, 1]");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const UtteranceRecord& rec : manifest) {
    for (std::string& token : Normalize(rec.transcript, normalizer))
      ++counts[std::move(token)];
  }
  if (counts.empty()) throw DataError("empty corpus: no words to count");
  return WordFrequencyTable::FromCounts({counts.begin(), counts.end()},
                                        coverage);
}

bool IsRareWord(std::string_view word, const WordFrequencyTable& table,
                const NormalizerConfig& normalizer) {
  const auto tokens = Normalize(word, normalizer);
  if (tokens.empty()) return false;
  for (const std::string& t : tokens) {
    if (table.IsRare(t)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Rare WER

RareCounts& RareCounts::operator+=(const RareCounts& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  rare_ref_words += other.rare_ref_words;
  return *this;
}

double RareCounts::RareWer() const {
  if (rare_ref_words == 0)
    throw DataError("no rare reference words (N_r=0)");
  return static_cast<double>(substitutions + deletions) /
         static_cast<double>(rare_ref_words);
}

RareCounts CountRareErrors(const EditAlignment& alignment,
                           std::span<const std::string> ref,
                           const WordFrequencyTable& table) {
  RareCounts counts;
  for (const AlignedPair& p : alignment.ops) {
    if (!p.ref_index) continue;
    if (!table.IsRare(ref[*p.ref_index])) continue;
    ++counts.rare_ref_words;
    if (p.op == EditOp::kSubstitute) ++counts.substitutions;
    if (p.op == EditOp::kDelete) ++counts.deletions;
  }
  return counts;
}

ScoreReport Score(std::span<const UtteranceRecord> ref,
                  std::span<const UtteranceRecord> hyp,
                  const NormalizerConfig& normalizer,
                  const WordFrequencyTable* table, unsigned threads) {
  std::unordered_map<std::string_view, const UtteranceRecord*> by_id;
  by_id.reserve(hyp.size());
  for (const UtteranceRecord& h : hyp) by_id.emplace(h.id, &h);
  std::vector<const UtteranceRecord*> matched(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    auto it = by_id.find(ref[i].id);
    if (it == by_id.end())
      throw DataError("reference id '" + ref[i].id + "' has no hypothesis");
    matched[i] = it->second;
  }
  if (hyp.size() != ref.size()) {
    std::unordered_set<std::string_view> ref_ids;
    for (const UtteranceRecord& r : ref) ref_ids.insert(r.id);
    for (const UtteranceRecord& h : hyp) {
      if (!ref_ids.count(h.id))
        throw DataError("hypothesis id '" + h.id + "' has no reference");
    }
  }

  std::vector<WerCounts> wer_parts(ref.size());
  std::vector<RareCounts> rare_parts(ref.size());
  ParallelFor(ref.size(), threads, [&](std::size_t i) {
    const auto ref_tokens = Normalize(ref[i].transcript, normalizer);
    const auto hyp_tokens = Normalize(matched[i]->transcript, normalizer);
    const EditAlignment a = EditAlign(ref_tokens, hyp_tokens);
    wer_parts[i] = {a.substitutions, a.deletions, a.insertions, a.ref_length};
    if (table) rare_parts[i] = CountRareErrors(a, ref_tokens, *table);
  });

  ScoreReport report;
  for (const WerCounts& w : wer_parts) report.wer += w;
  if (table) {
    report.rare.emplace();
    for (const RareCounts& r : rare_parts) *report.rare += r;
  }
  return report;
}

std::string ScoreReportToJson(const ScoreReport& report) {
  nlohmann::ordered_json obj;
  obj["S"] = report.wer.substitutions;
  obj["D"] = report.wer.deletions;
  obj["I"] = report.wer.insertions;
  obj["N"] = report.wer.ref_words;
  obj["wer"] = report.wer.Wer();
  if (report.rare) {
    obj["S_r"] = report.rare->substitutions;
    obj["D_r"] = report.rare->deletions;
    obj["N_r"] = report.rare->rare_ref_words;
    obj["rare_wer"] = report.rare->RareWer();
  }
  return obj.dump(1) + "\n";
}

}  // namespace asrkit
