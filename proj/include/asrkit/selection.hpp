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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrkit/manifest.hpp"
#include "asrkit/metrics.hpp"

namespace asrkit {

enum class DropReason : std::uint8_t {
  kPass,
  kWpsLow,
  kConfidenceLow,
  kDisagreementLow,
  kDisagreementHigh,
  kAlignMissing,
  kSegmentEmpty,
  kRareData,
};

std::string_view ToString(DropReason reason);

struct FilterDecision {
  std::string id;
  bool kept = true;
  DropReason reason = DropReason::kPass;
  std::optional<double> statistic;

  static FilterDecision Keep(std::string id,
                             std::optional<double> statistic = {}) {
    return {std::move(id), true, DropReason::kPass, statistic};
  }
  static FilterDecision Drop(std::string id, DropReason reason,
                             std::optional<double> statistic = {}) {
    return {std::move(id), false, reason, statistic};
  }
};

enum class Stage : std::uint8_t {
  kWordsPerSecond,
  kConfidence,
  kDisagreement,
  kSegmentation,
  kRareData,
};

std::string_view ToString(Stage stage);
std::optional<Stage> StageFromString(std::string_view name);

struct PipelineConfig {
  std::vector<Stage> stages{Stage::kWordsPerSecond, Stage::kConfidence,
                            Stage::kDisagreement, Stage::kSegmentation,
                            Stage::kRareData};
  double wps_threshold = 0.5;
  double confidence_fraction = 0.20;
  double disagreement_low_fraction = 0.20;
  double disagreement_high_fraction = 0.20;
  double max_segment_s = 10.0;
  double rare_min_count = 2.0;
  double rare_word_fraction = 0.25;
  // Countries whose uploads go through the rare-word rule; everything else
  // (including records without a country) is kept.
  std::vector<std::string> rule_countries{"US", "GB", "CA", "AU"};
  double frequency_coverage = 0.90;
  // A record without a hypothesis pair is an error when true, kept and
  // tallied as unscored when false.
  bool strict_pairs = true;
  NormalizerConfig normalizer;

  // Throws ConfigError.
  void Validate() const;
  bool Enabled(Stage stage) const;

  // Unknown keys are rejected so that typos do not silently fall back to
  // defaults.
  static PipelineConfig FromJson(std::string_view text);
};

// ---------------------------------------------------------------------------
// Individual strategies

double WordsPerSecond(const UtteranceRecord& record);

struct ConfidenceCut {
  // Confidence of the last dropped record; -inf when nothing was dropped.
  double threshold = -std::numeric_limits<double>::infinity();
  std::vector<FilterDecision> decisions;  // one per input record, input order
  std::size_t scored = 0;
  std::size_t unscored = 0;
};

// Drops exactly floor(fraction * n) of the n records that carry a
// confidence: the smallest under (confidence asc, id asc).
ConfidenceCut CutByConfidence(std::span<const UtteranceRecord> records,
                              double fraction);

// Word-level edit distance normalized by the longer hypothesis; 0 when both
// are empty.
double DisagreementScore(const HypothesisPair& pair);

struct DisagreementCut {
  std::vector<FilterDecision> decisions;  // input order
  std::optional<double> low_threshold;    // score of last low drop
  std::optional<double> high_threshold;   // score of first high drop
};

// Sorted by (score asc, id asc): the first floor(low * n) are dropped as too
// easy, the last floor(high * n) as too noisy.
DisagreementCut CutByDisagreement(std::span<const HypothesisPair> pairs,
                                  double low_fraction, double high_fraction,
                                  unsigned threads = 1);

struct Segment {
  UtteranceRecord record;
  bool oversize = false;
};

struct SegmentationResult {
  std::vector<Segment> segments;
  // Set when the record could not be segmented (align_missing or
  // segment_empty).
  std::optional<FilterDecision> dropped;
};

// Greedy packing of aligned words into segments spanning at most
// max_segment_s. Child ids are "{parent}#k" with k counted from 0; child
// alignments are rebased to the segment start, which is recorded in
// offset_s (added to the parent's own offset).
SegmentationResult SegmentUtterance(const UtteranceRecord& record,
                                    double max_segment_s);

struct RareRuleConfig {
  double min_count = 2.0;
  double word_fraction = 0.25;
  std::vector<std::string> rule_countries{"US", "GB", "CA", "AU"};
};

// Kept iff the country is outside the rule set (or absent), or
// R >= min(min_count, word_fraction * W) over normalized tokens.
FilterDecision RareDataKeep(const UtteranceRecord& record,
                            const WordFrequencyTable& table,
                            const NormalizerConfig& normalizer,
                            const RareRuleConfig& rule = {});

// ---------------------------------------------------------------------------
// Pipeline

struct StageReport {
  Stage stage;
  std::size_t input = 0;
  std::size_t dropped = 0;
  std::optional<double> threshold;
  std::optional<double> threshold_high;
  std::size_t unscored = 0;
  // Segmentation only.
  std::size_t segments_emitted = 0;
  std::size_t oversize_segments = 0;
};

struct PipelineReport {
  std::size_t input_records = 0;
  double input_hours = 0.0;
  std::vector<StageReport> stages;
  std::size_t kept_records = 0;
  double kept_hours = 0.0;
  std::size_t dropped_records = 0;
  double dropped_hours = 0.0;

  std::string ToJson() const;
};

struct DroppedRecord {
  UtteranceRecord record;
  FilterDecision decision;
};

struct PipelineResult {
  std::vector<UtteranceRecord> kept;
  std::vector<DroppedRecord> dropped;
  PipelineReport report;
};

// Runs the enabled stages in configured order. Each stage first computes its
// corpus statistics over the records that survived the previous stages and
// then decides every record; the first stage to drop a record wins. Outputs
// keep input order, with segments in place of their parent. Throws
// ConfigError before processing when a stage lacks its auxiliary input.
PipelineResult RunPipeline(const PipelineConfig& config,
                           std::span<const UtteranceRecord> manifest,
                           const std::vector<HypothesisPair>* pairs = nullptr,
                           const WordFrequencyTable* table = nullptr,
                           unsigned threads = 1);

// Dropped records as JSONL: the record fields followed by "drop_reason" and,
// when measured, "drop_statistic".
std::string WriteDroppedManifest(std::span<const DroppedRecord> dropped);

}  // namespace asrkit
