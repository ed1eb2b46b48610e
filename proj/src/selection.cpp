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

#include "asrkit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "asrkit/error.hpp"
#include "asrkit/parallel.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

// floor(fraction * n); the slack absorbs products like 0.29 * 100 that land a
// hair below the integer they denote.
std::size_t FloorCount(double fraction, std::size_t n) {
  const long double product =
      static_cast<long double>(fraction) * static_cast<long double>(n);
  return static_cast<std::size_t>(std::floor(product + 1e-9L));
}

void CheckFraction(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0))
    throw ConfigError(std::string(name) + " must be in [0, 1]");
}

}  // namespace

std::string_view ToString(DropReason reason) {
  switch (reason) {
    case DropReason::kPass: return "pass";
    case DropReason::kWpsLow: return "wps_low";
    case DropReason::kConfidenceLow: return "confidence_low";
    case DropReason::kDisagreementLow: return "disagreement_low";
    case DropReason::kDisagreementHigh: return "disagreement_high";
    case DropReason::kAlignMissing: return "align_missing";
    case DropReason::kSegmentEmpty: return "segment_empty";
    case DropReason::kRareData: return "rare_data";
  }
  return "unknown";
}

std::string_view ToString(Stage stage) {
  switch (stage) {
    case Stage::kWordsPerSecond: return "wps";
    case Stage::kConfidence: return "confidence";
    case Stage::kDisagreement: return "disagreement";
    case Stage::kSegmentation: return "segmentation";
    case Stage::kRareData: return "rare_data";
  }
  return "unknown";
}

std::optional<Stage> StageFromString(std::string_view name) {
  for (Stage s : {Stage::kWordsPerSecond, Stage::kConfidence,
                  Stage::kDisagreement, Stage::kSegmentation,
                  Stage::kRareData}) {
    if (ToString(s) == name) return s;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::Validate() const {
  std::set<Stage> seen;
  for (Stage s : stages) {
    if (!seen.insert(s).second)
      throw ConfigError("stage '" + std::string(ToString(s)) +
                        "' listed twice");
  }
  if (!(wps_threshold > 0.0)) throw ConfigError("wps_threshold must be > 0");
  CheckFraction(confidence_fraction, "confidence_fraction");
  CheckFraction(disagreement_low_fraction, "disagreement_low_fraction");
  CheckFraction(disagreement_high_fraction, "disagreement_high_fraction");
  if (disagreement_low_fraction + disagreement_high_fraction > 1.0)
    throw ConfigError("disagreement fractions must sum to <= 1");
  if (!(max_segment_s > 0.0)) throw ConfigError("max_segment_s must be > 0");
  if (!(rare_min_count > 0.0)) throw ConfigError("rare_min_count must be > 0");
  CheckFraction(rare_word_fraction, "rare_word_fraction");
  if (!(frequency_coverage > 0.0 && frequency_coverage <= 1.0))
    throw ConfigError("frequency_coverage must be in (0, 1]");
  normalizer.Validate();
}

bool PipelineConfig::Enabled(Stage stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

PipelineConfig PipelineConfig::FromJson(std::string_view text) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("filter config: malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ConfigError("filter config must be an object");
  PipelineConfig cfg;
  try {
    for (const auto& [key, value] : obj.items()) {
      if (key == "stages") {
        cfg.stages.clear();
        for (const auto& name : value) {
          auto stage = StageFromString(name.get<std::string>());
          if (!stage)
            throw ConfigError("unknown stage '" + name.get<std::string>() + "'");
          cfg.stages.push_back(*stage);
        }
      } else if (key == "wps_threshold") {
        cfg.wps_threshold = value.get<double>();
      } else if (key == "confidence_fraction") {
        cfg.confidence_fraction = value.get<double>();
      } else if (key == "disagreement_low_fraction") {
        cfg.disagreement_low_fraction = value.get<double>();
      } else if (key == "disagreement_high_fraction") {
        cfg.disagreement_high_fraction = value.get<double>();
      } else if (key == "max_segment_s") {
        cfg.max_segment_s = value.get<double>();
      } else if (key == "rare_min_count") {
        cfg.rare_min_count = value.get<double>();
      } else if (key == "rare_word_fraction") {
        cfg.rare_word_fraction = value.get<double>();
      } else if (key == "rule_countries") {
        cfg.rule_countries = value.get<std::vector<std::string>>();
      } else if (key == "frequency_coverage") {
        cfg.frequency_coverage = value.get<double>();
      } else if (key == "strict_pairs") {
        cfg.strict_pairs = value.get<bool>();
      } else if (key == "normalizer") {
        for (const auto& [nkey, nvalue] : value.items()) {
          if (nkey == "lowercase") {
            cfg.normalizer.lowercase = nvalue.get<bool>();
          } else if (nkey == "strip_punctuation") {
            cfg.normalizer.strip_punctuation = nvalue.get<bool>();
          } else if (nkey == "remove_fillers") {
            cfg.normalizer.remove_fillers = nvalue.get<bool>();
          } else if (nkey == "filler_set") {
            cfg.normalizer.filler_set = nvalue.get<std::vector<std::string>>();
          } else {
            throw ConfigError("unknown normalizer key '" + nkey + "'");
          }
        }
      } else {
        throw ConfigError("unknown filter config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("filter config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Strategies

double WordsPerSecond(const UtteranceRecord& record) {
  return static_cast<double>(WordCount(record.transcript)) / record.duration_s;
}

ConfidenceCut CutByConfidence(std::span<const UtteranceRecord> records,
                              double fraction) {
  CheckFraction(fraction, "confidence fraction");
  ConfidenceCut cut;
  std::vector<std::size_t> scored;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].confidence) scored.push_back(i);
  }
  cut.scored = scored.size();
  cut.unscored = records.size() - scored.size();
  std::sort(scored.begin(), scored.end(), [&](std::size_t a, std::size_t b) {
    const double ca = *records[a].confidence;
    const double cb = *records[b].confidence;
    if (ca != cb) return ca < cb;
    return records[a].id < records[b].id;
  });
  const std::size_t k = FloorCount(fraction, scored.size());
  std::vector<bool> drop(records.size(), false);
  for (std::size_t r = 0; r < k; ++r) drop[scored[r]] = true;
  if (k > 0) cut.threshold = *records[scored[k - 1]].confidence;

  cut.decisions.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    cut.decisions.push_back(
        drop[i] ? FilterDecision::Drop(rec.id, DropReason::kConfidenceLow,
                                       rec.confidence)
                : FilterDecision::Keep(rec.id, rec.confidence));
  }
  return cut;
}

double DisagreementScore(const HypothesisPair& pair) {
  const auto split = [](std::string_view text) {
    std::vector<std::string> out;
    for (std::string_view w : SplitWords(text)) out.emplace_back(w);
    return out;
  };
  const auto a = split(pair.primary_hyp);
  const auto b = split(pair.secondary_hyp);
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(EditDistance(a, b)) / static_cast<double>(longest);
}

DisagreementCut CutByDisagreement(std::span<const HypothesisPair> pairs,
                                  double low_fraction, double high_fraction,
                                  unsigned threads) {
  CheckFraction(low_fraction, "disagreement low fraction");
  CheckFraction(high_fraction, "disagreement high fraction");
  if (low_fraction + high_fraction > 1.0)
    throw ConfigError("disagreement fractions must sum to <= 1");

  const std::size_t n = pairs.size();
  std::vector<double> scores(n);
  ParallelFor(n, threads,
              [&](std::size_t i) { scores[i] = DisagreementScore(pairs[i]); });

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return pairs[a].id < pairs[b].id;
  });
  const std::size_t k_low = FloorCount(low_fraction, n);
  const std::size_t k_high = std::min(FloorCount(high_fraction, n), n - k_low);

  DisagreementCut cut;
  std::vector<DropReason> reason(n, DropReason::kPass);
  for (std::size_t r = 0; r < k_low; ++r) reason[order[r]] = DropReason::kDisagreementLow;
  for (std::size_t r = n - k_high; r < n; ++r)
    reason[order[r]] = DropReason::kDisagreementHigh;
  if (k_low > 0) cut.low_threshold = scores[order[k_low - 1]];
  if (k_high > 0) cut.high_threshold = scores[order[n - k_high]];

  cut.decisions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cut.decisions.push_back(
        reason[i] == DropReason::kPass
            ? FilterDecision::Keep(pairs[i].id, scores[i])
            : FilterDecision::Drop(pairs[i].id, reason[i], scores[i]));
  }
  return cut;
}

SegmentationResult SegmentUtterance(const UtteranceRecord& record,
                                    double max_segment_s) {
  if (!(max_segment_s > 0.0)) throw ConfigError("max_segment_s must be > 0");
  SegmentationResult result;
  if (!record.word_alignments) {
    result.dropped = FilterDecision::Drop(record.id, DropReason::kAlignMissing);
    return result;
  }
  const auto& words = *record.word_alignments;
  if (words.empty()) {
    result.dropped = FilterDecision::Drop(record.id, DropReason::kSegmentEmpty);
    return result;
  }

  const double base_offset = record.offset_s.value_or(0.0);
  std::size_t i = 0;
  std::size_t k = 0;
  while (i < words.size()) {
    const double seg_start = words[i].start_s;
    std::size_t j = i + 1;
    const bool oversize = words[i].end_s - seg_start > max_segment_s;
    if (!oversize) {
      while (j < words.size() && words[j].end_s - seg_start <= max_segment_s) ++j;
    }
    const double seg_end = words[j - 1].end_s;

    Segment seg;
    seg.oversize = oversize;
    UtteranceRecord& child = seg.record;
    child.id = record.id + "#" + std::to_string(k++);
    child.audio_path = record.audio_path;
    child.duration_s = seg_end - seg_start;
    child.offset_s = base_offset + seg_start;
    child.confidence = record.confidence;
    child.country = record.country;
    child.source = record.source;
    std::vector<WordSpan> spans;
    spans.reserve(j - i);
    for (std::size_t w = i; w < j; ++w) {
      if (w > i) child.transcript += ' ';
      child.transcript += words[w].word;
      spans.push_back({words[w].word, words[w].start_s - seg_start,
                       words[w].end_s - seg_start});
    }
    child.word_alignments = std::move(spans);
    result.segments.push_back(std::move(seg));
    i = j;
  }
  return result;
}

FilterDecision RareDataKeep(const UtteranceRecord& record,
                            const WordFrequencyTable& table,
                            const NormalizerConfig& normalizer,
                            const RareRuleConfig& rule) {
  const bool ruled =
      record.country &&
      std::find(rule.rule_countries.begin(), rule.rule_countries.end(),
                *record.country) != rule.rule_countries.end();
  if (!ruled) return FilterDecision::Keep(record.id);

  const auto tokens = Normalize(record.transcript, normalizer);
  std::size_t rare = 0;
  for (const std::string& t : tokens) rare += table.IsRare(t) ? 1 : 0;
  const double words = static_cast<double>(tokens.size());
  const double needed = std::min(rule.min_count, rule.word_fraction * words);
  const double r = static_cast<double>(rare);
  return r >= needed ? FilterDecision::Keep(record.id, r)
                     : FilterDecision::Drop(record.id, DropReason::kRareData, r);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct Unit {
  UtteranceRecord record;
  std::string parent_id;
  std::optional<FilterDecision> drop;
};

std::vector<std::size_t> Survivors(const std::vector<Unit>& units) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (!units[i].drop) out.push_back(i);
  }
  return out;
}

}  // namespace

PipelineResult RunPipeline(const PipelineConfig& config,
                           std::span<const UtteranceRecord> manifest,
                           const std::vector<HypothesisPair>* pairs,
                           const WordFrequencyTable* table, unsigned threads) {
  config.Validate();
  if (config.Enabled(Stage::kDisagreement) && pairs == nullptr)
    throw ConfigError("disagreement stage needs hypothesis pairs");
  if (config.Enabled(Stage::kRareData) && table == nullptr)
    throw ConfigError("rare_data stage needs a frequency table");

  PipelineResult result;
  PipelineReport& report = result.report;
  report.input_records = manifest.size();

  std::vector<Unit> units;
  units.reserve(manifest.size());
  for (const UtteranceRecord& rec : manifest) {
    report.input_hours += rec.duration_s / 3600.0;
    units.push_back({rec, rec.id, std::nullopt});
  }

  std::unordered_map<std::string_view, const HypothesisPair*> pair_by_id;
  if (pairs) {
    for (const HypothesisPair& p : *pairs) pair_by_id.emplace(p.id, &p);
  }
  const RareRuleConfig rare_rule{config.rare_min_count, config.rare_word_fraction,
                                 config.rule_countries};

  for (Stage stage : config.stages) {
    StageReport sr;
    sr.stage = stage;
    const std::vector<std::size_t> alive = Survivors(units);
    sr.input = alive.size();

    switch (stage) {
      case Stage::kWordsPerSecond: {
        sr.threshold = config.wps_threshold;
        std::vector<double> rate(alive.size());
        ParallelFor(alive.size(), threads, [&](std::size_t i) {
          rate[i] = WordsPerSecond(units[alive[i]].record);
        });
        for (std::size_t i = 0; i < alive.size(); ++i) {
          if (rate[i] < config.wps_threshold) {
            Unit& u = units[alive[i]];
            u.drop = FilterDecision::Drop(u.record.id, DropReason::kWpsLow, rate[i]);
            ++sr.dropped;
          }
        }
        break;
      }
      case Stage::kConfidence: {
        std::vector<UtteranceRecord> population;
        population.reserve(alive.size());
        for (std::size_t idx : alive) population.push_back(units[idx].record);
        ConfidenceCut cut = CutByConfidence(population, config.confidence_fraction);
        if (cut.decisions.size() != alive.size()) throw Error("confidence cut size");
        for (std::size_t i = 0; i < alive.size(); ++i) {
          if (!cut.decisions[i].kept) {
            units[alive[i]].drop = std::move(cut.decisions[i]);
            ++sr.dropped;
          }
        }
        if (sr.dropped > 0) sr.threshold = cut.threshold;
        sr.unscored = cut.unscored;
        break;
      }
      case Stage::kDisagreement: {
        std::vector<HypothesisPair> population;
        std::vector<std::size_t> population_unit;
        for (std::size_t idx : alive) {
          const Unit& u = units[idx];
          auto it = pair_by_id.find(u.record.id);
          if (it == pair_by_id.end()) it = pair_by_id.find(u.parent_id);
          if (it == pair_by_id.end()) {
            if (config.strict_pairs)
              throw DataError("record '" + u.record.id +
                              "' has no hypothesis pair");
            ++sr.unscored;
            continue;
          }
          // Ranked under the unit id so that segments of one parent are
          // ordered deterministically.
          population.push_back(
              {u.record.id, it->second->primary_hyp, it->second->secondary_hyp});
          population_unit.push_back(idx);
        }
        DisagreementCut cut =
            CutByDisagreement(population, config.disagreement_low_fraction,
                              config.disagreement_high_fraction, threads);
        for (std::size_t i = 0; i < population.size(); ++i) {
          if (!cut.decisions[i].kept) {
            units[population_unit[i]].drop = std::move(cut.decisions[i]);
            ++sr.dropped;
          }
        }
        sr.threshold = cut.low_threshold;
        sr.threshold_high = cut.high_threshold;
        break;
      }
      case Stage::kSegmentation: {
        sr.threshold = config.max_segment_s;
        std::vector<SegmentationResult> segs(alive.size());
        ParallelFor(alive.size(), threads, [&](std::size_t i) {
          segs[i] = SegmentUtterance(units[alive[i]].record, config.max_segment_s);
        });
        std::vector<Unit> next;
        next.reserve(units.size());
        std::size_t cursor = 0;
        for (std::size_t idx = 0; idx < units.size(); ++idx) {
          if (cursor < alive.size() && alive[cursor] == idx) {
            SegmentationResult& s = segs[cursor++];
            if (s.dropped) {
              Unit u = std::move(units[idx]);
              u.drop = std::move(s.dropped);
              next.push_back(std::move(u));
              ++sr.dropped;
            } else {
              for (Segment& seg : s.segments) {
                ++sr.segments_emitted;
                if (seg.oversize) ++sr.oversize_segments;
                next.push_back(
                    {std::move(seg.record), units[idx].parent_id, std::nullopt});
              }
            }
          } else {
            next.push_back(std::move(units[idx]));
          }
        }
        units = std::move(next);
        break;
      }
      case Stage::kRareData: {
        std::vector<FilterDecision> decisions(alive.size());
        ParallelFor(alive.size(), threads, [&](std::size_t i) {
          decisions[i] = RareDataKeep(units[alive[i]].record, *table,
                                      config.normalizer, rare_rule);
        });
        for (std::size_t i = 0; i < alive.size(); ++i) {
          if (!decisions[i].kept) {
            units[alive[i]].drop = std::move(decisions[i]);
            ++sr.dropped;
          }
        }
        break;
      }
    }
    report.stages.push_back(sr);
  }

  for (Unit& u : units) {
    if (u.drop) {
      report.dropped_hours += u.record.duration_s / 3600.0;
      result.dropped.push_back({std::move(u.record), std::move(*u.drop)});
    } else {
      report.kept_hours += u.record.duration_s / 3600.0;
      result.kept.push_back(std::move(u.record));
    }
  }
  report.kept_records = result.kept.size();
  report.dropped_records = result.dropped.size();
  return result;
}

std::string PipelineReport::ToJson() const {
  using nlohmann::ordered_json;
  const auto nullable = [](const std::optional<double>& v) -> ordered_json {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
  };
  ordered_json obj;
  obj["input_records"] = input_records;
  obj["input_hours"] = input_hours;
  ordered_json per_stage = ordered_json::object();
  for (const StageReport& s : stages) {
    ordered_json entry;
    entry["input"] = s.input;
    entry["dropped"] = s.dropped;
    entry["threshold"] = nullable(s.threshold);
    if (s.stage == Stage::kDisagreement)
      entry["threshold_high"] = nullable(s.threshold_high);
    if (s.stage == Stage::kConfidence || s.stage == Stage::kDisagreement)
      entry["unscored"] = s.unscored;
    if (s.stage == Stage::kSegmentation) {
      entry["segments_emitted"] = s.segments_emitted;
      entry["oversize_segments"] = s.oversize_segments;
    }
    per_stage[std::string(ToString(s.stage))] = std::move(entry);
  }
  obj["stages"] = std::move(per_stage);
  obj["kept_records"] = kept_records;
  obj["kept_hours"] = kept_hours;
  obj["dropped_records"] = dropped_records;
  obj["dropped_hours"] = dropped_hours;
  return obj.dump(1) + "\n";
}

std::string WriteDroppedManifest(std::span<const DroppedRecord> dropped) {
  std::string out;
  for (const DroppedRecord& d : dropped) {
    auto obj = nlohmann::ordered_json::parse(RecordToJsonLine(d.record));
    obj["drop_reason"] = std::string(ToString(d.decision.reason));
    if (d.decision.statistic) obj["drop_statistic"] = *d.decision.statistic;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace asrkit
