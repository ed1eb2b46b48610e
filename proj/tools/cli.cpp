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

#include "asrkit/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "asrkit/budget.hpp"
#include "asrkit/error.hpp"
#include "asrkit/manifest.hpp"
#include "asrkit/metrics.hpp"
#include "asrkit/parallel.hpp"
#include "asrkit/rnnt.hpp"
#include "asrkit/rnnt_reference.hpp"
#include "asrkit/selection.hpp"
#include "json.hpp"

namespace asrkit::cli {

namespace {

// Raised when a --check verification fails; reported as a data error.
class CheckFailed : public Error {
 public:
  using Error::Error;
};

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Collects every output of a command and publishes them only once the
// command has fully succeeded.
class OutputSet {
 public:
  explicit OutputSet(std::ostream& out) : out_(out) {}

  // An empty path or "-" means the output stream.
  void Add(const std::string& path, std::string content) {
    items_.emplace_back(path, std::move(content));
  }

  void Commit() {
    std::vector<std::pair<std::string, std::string>> staged;
    for (const auto& [path, content] : items_) {
      if (path.empty() || path == "-") continue;
      const std::string tmp = path + ".tmp." + std::to_string(::getpid());
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw ConfigError("cannot write '" + path + "'");
      f << content;
      f.close();
      if (!f) throw ConfigError("failed writing '" + path + "'");
      staged.emplace_back(tmp, path);
    }
    for (const auto& [tmp, path] : staged) {
      std::error_code ec;
      std::filesystem::rename(tmp, path, ec);
      if (ec) throw ConfigError("cannot rename into '" + path + "': " + ec.message());
    }
    for (const auto& [path, content] : items_) {
      if (path.empty() || path == "-") out_ << content;
    }
    out_.flush();
  }

 private:
  std::ostream& out_;
  std::vector<std::pair<std::string, std::string>> items_;
};

NormalizerConfig ParseNorm(const std::string& list, const std::string& fillers) {
  NormalizerConfig cfg;
  cfg.lowercase = false;
  cfg.strip_punctuation = false;
  cfg.remove_fillers = false;
  if (list != "none") {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "lower") {
        cfg.lowercase = true;
      } else if (item == "punct") {
        cfg.strip_punctuation = true;
      } else if (item == "fillers") {
        cfg.remove_fillers = true;
      } else if (!item.empty()) {
        throw ConfigError("unknown --norm option '" + item +
                          "' (expected lower, punct, fillers or none)");
      }
    }
  }
  if (!fillers.empty()) {
    cfg.filler_set.clear();
    std::stringstream ss(fillers);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.filler_set.push_back(item);
    }
  }
  cfg.Validate();
  return cfg;
}

std::vector<UtteranceRecord> LoadManifest(const std::string& path) {
  return ParseManifest(ReadFile(path));
}

struct CommonOptions {
  std::optional<int> threads;
};

// ---------------------------------------------------------------------------

struct FreqOptions {
  std::string manifest;
  std::string out;
  double coverage = 0.9;
  std::string norm = "lower,punct";
  std::string fillers;
};

void CmdFreq(const FreqOptions& o, OutputSet& outputs, std::ostream& err) {
  const NormalizerConfig norm = ParseNorm(o.norm, o.fillers);
  if (!(o.coverage > 0.0 && o.coverage <= 1.0))
    throw ConfigError("--coverage must be in (0, 1]");
  const auto records = LoadManifest(o.manifest);
  const WordFrequencyTable table = BuildFreqTable(records, norm, o.coverage);
  err << "freq: " << table.words().size() << " word types, " << table.total()
      << " tokens, common set " << table.common_set_size() << "\n";
  outputs.Add(o.out, table.ToJson());
}

struct FilterOptions {
  std::string manifest;
  std::string config;
  std::string freq;
  std::string pairs;
  std::string out;
  std::string dropped;
  std::string report;
};

void CmdFilter(const FilterOptions& o, const CommonOptions& common,
               OutputSet& outputs, std::ostream& err) {
  const unsigned threads = ResolveThreads(common.threads);
  const PipelineConfig config =
      o.config.empty() ? PipelineConfig{} : PipelineConfig::FromJson(ReadFile(o.config));
  config.Validate();
  if (config.Enabled(Stage::kRareData) && o.freq.empty())
    throw ConfigError("rare_data stage is enabled but --freq was not given");
  if (config.Enabled(Stage::kDisagreement) && o.pairs.empty())
    throw ConfigError("disagreement stage is enabled but --pairs was not given");

  std::optional<WordFrequencyTable> table;
  if (!o.freq.empty())
    table = WordFrequencyTable::FromJson(ReadFile(o.freq), config.frequency_coverage);
  std::optional<std::vector<HypothesisPair>> pairs;
  if (!o.pairs.empty()) pairs = ParseHypothesisPairs(ReadFile(o.pairs));
  const auto records = LoadManifest(o.manifest);

  PipelineResult result = RunPipeline(config, records, pairs ? &*pairs : nullptr,
                                      table ? &*table : nullptr, threads);
  err << "filter: kept " << result.report.kept_records << " of "
      << result.report.input_records << " input records ("
      << result.report.kept_hours << " h of " << result.report.input_hours
      << " h)\n";
  outputs.Add(o.out, WriteManifest(result.kept));
  if (!o.dropped.empty()) outputs.Add(o.dropped, WriteDroppedManifest(result.dropped));
  outputs.Add(o.report, result.report.ToJson());
}

struct SegmentOptions {
  std::string manifest;
  std::string out;
  std::string dropped;
  std::string report;
  double max_segment_s = 10.0;
};

void CmdSegment(const SegmentOptions& o, const CommonOptions& common,
                OutputSet& outputs, std::ostream& err) {
  if (!(o.max_segment_s > 0.0)) throw ConfigError("--max-segment-s must be > 0");
  PipelineConfig config;
  config.stages = {Stage::kSegmentation};
  config.max_segment_s = o.max_segment_s;
  const auto records = LoadManifest(o.manifest);
  PipelineResult result = RunPipeline(config, records, nullptr, nullptr,
                                      ResolveThreads(common.threads));
  const StageReport& s = result.report.stages.front();
  err << "segment: " << s.segments_emitted << " segments (" << s.oversize_segments
      << " oversize), " << s.dropped << " records dropped\n";
  outputs.Add(o.out, WriteManifest(result.kept));
  if (!o.dropped.empty()) outputs.Add(o.dropped, WriteDroppedManifest(result.dropped));
  if (!o.report.empty()) outputs.Add(o.report, result.report.ToJson());
}

struct ScoreOptions {
  std::string ref;
  std::string hyp;
  std::string freq;
  std::string norm = "lower,punct";
  std::string fillers;
  std::string report;
};

void CmdScore(const ScoreOptions& o, const CommonOptions& common,
              OutputSet& outputs, std::ostream& err) {
  const unsigned threads = ResolveThreads(common.threads);
  const NormalizerConfig norm = ParseNorm(o.norm, o.fillers);
  std::optional<WordFrequencyTable> table;
  if (!o.freq.empty()) table = WordFrequencyTable::FromJson(ReadFile(o.freq));
  const auto ref = LoadManifest(o.ref);
  const auto hyp = LoadManifest(o.hyp);
  const ScoreReport report = Score(ref, hyp, norm, table ? &*table : nullptr, threads);
  const std::string json = ScoreReportToJson(report);
  err << "score: WER " << report.wer.Wer() << " over N=" << report.wer.ref_words;
  if (report.rare)
    err << ", rare WER " << report.rare->RareWer() << " over N_r="
        << report.rare->rare_ref_words;
  err << "\n";
  outputs.Add(o.report, json);
}

struct LossOptions {
  std::string input;
  bool grad = false;
  bool check = false;
};

double MaxAbs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Enumeration is skipped above this many alignments.
constexpr std::uint64_t kMaxEnumeratedPaths = 200000;

void CmdLoss(const LossOptions& o, const Hooks& hooks, OutputSet& outputs,
             std::ostream& err) {
  const rnnt::LossCase c = rnnt::ParseLossCase(ReadFile(o.input));
  const rnnt::RnntInstance& x = c.instance;
  const bool need_grad = o.grad || o.check;

  const rnnt::LossResult full = rnnt::LossFull(x, need_grad);
  std::optional<rnnt::LossResult> restricted;
  if (c.band) restricted = rnnt::LossRestricted(x, *c.band, need_grad);
  const rnnt::LossResult& primary = restricted ? *restricted : full;

  nlohmann::ordered_json obj;
  obj["variant"] = restricted ? "restricted" : "full";
  obj["loss"] = primary.loss;
  obj["valid_cells"] = primary.valid_cells;
  if (o.grad) obj["grad_max_abs"] = MaxAbs(*primary.gradients);
  if (restricted) {
    nlohmann::ordered_json f;
    f["loss"] = full.loss;
    f["valid_cells"] = full.valid_cells;
    if (o.grad) f["grad_max_abs"] = MaxAbs(*full.gradients);
    obj["full"] = std::move(f);
  }

  bool passed = true;
  if (o.check) {
    nlohmann::ordered_json check;
    const auto verify = [&](const rnnt::LossResult& r, const rnnt::AlignmentBand* band,
                            const char* name) {
      std::vector<double> grad = *r.gradients;
      if (hooks.perturb_gradient) hooks.perturb_gradient(grad);
      const double rel = rnnt::GradCheckAgainst(x, band, grad, 1e-5);
      const double node_sum = rnnt::MaxNodeGradientSum(x, grad);
      nlohmann::ordered_json entry;
      entry["grad_max_rel_error"] = rel;
      entry["node_sum_max"] = node_sum;
      const bool ok = rel <= 1e-5 && node_sum <= 1e-8;
      entry["passed"] = ok;
      check[name] = std::move(entry);
      passed = passed && ok;
    };
    verify(full, nullptr, "full");
    if (restricted) verify(*restricted, &*c.band, "restricted");

    if (rnnt::CountAlignments(x.T, x.U) <= kMaxEnumeratedPaths) {
      const double reference = rnnt::EnumerateLoss(x);
      const double rel = std::abs(reference - full.loss) / std::max(std::abs(reference), 1e-300);
      check["enumeration_loss"] = reference;
      check["enumeration_rel_error"] = rel;
      passed = passed && rel <= 1e-10;
    }
    if (restricted) {
      rnnt::AlignmentBand saturated = *c.band;
      saturated.left = x.T;
      saturated.right = x.T;
      const double sat = rnnt::LossRestricted(x, saturated, false).loss;
      check["saturated_band_abs_error"] = std::abs(sat - full.loss);
      check["restricted_ge_full"] = restricted->loss >= full.loss - 1e-9;
      passed = passed && std::abs(sat - full.loss) <= 1e-9 &&
               restricted->loss >= full.loss - 1e-9;
    }
    check["passed"] = passed;
    obj["check"] = std::move(check);
  }
  outputs.Add("", obj.dump(1) + "\n");
  if (!passed) throw CheckFailed("loss --check: verification failed");
  err << "loss: " << primary.loss << " nats over " << primary.valid_cells
      << " lattice nodes\n";
}

struct BudgetOptions {
  std::string preset = "10B";
  std::optional<std::int64_t> hidden;
  std::optional<std::int64_t> layers;
  std::optional<std::int64_t> heads;
  double batch_hours = 23.0;
  std::int64_t updates = 200000;
  double frame_ms = 80.0;
  std::string convention = "train_6ND";
  budget::LossShape shape;
  std::string out;
};

void CmdBudget(const BudgetOptions& o, OutputSet& outputs) {
  budget::EncoderConfig enc;
  if (o.preset == "100M") {
    enc = budget::Encoder100M();
  } else if (o.preset == "1B") {
    enc = budget::Encoder1B();
  } else if (o.preset == "10B") {
    enc = budget::Encoder10B();
  } else {
    throw ConfigError("--preset must be 100M, 1B or 10B");
  }
  if (o.hidden) enc.hidden = *o.hidden;
  if (o.layers) enc.layers = *o.layers;
  if (o.heads) enc.heads = *o.heads;
  enc.frame_ms = o.frame_ms;
  budget::TrainPlan plan;
  plan.batch_hours = o.batch_hours;
  plan.updates = o.updates;
  auto conv = budget::ConventionFromString(o.convention);
  if (!conv) throw ConfigError("--convention must be forward_2ND or train_6ND");
  plan.convention = *conv;
  outputs.Add(o.out, budget::MakeReport(enc, plan, o.shape).ToJson());
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err, const Hooks& hooks) {
  CLI::App app{"asrkit: data selection, scoring, transducer loss and budget tools"};
  app.require_subcommand(1);
  CommonOptions common;
  const auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", common.threads,
                    "Worker threads (default: $ASRKIT_THREADS or all cores)");
  };

  FreqOptions freq;
  CLI::App* freq_cmd = app.add_subcommand("freq", "Build a word frequency table");
  freq_cmd->add_option("--manifest", freq.manifest, "Supervised manifest (JSONL)")->required();
  freq_cmd->add_option("--out", freq.out, "Output table (default: stdout)");
  freq_cmd->add_option("--coverage", freq.coverage, "Cumulative coverage of the common set");
  freq_cmd->add_option("--norm", freq.norm, "Comma list of lower,punct,fillers or none");
  freq_cmd->add_option("--fillers", freq.fillers, "Comma-separated filler words");

  FilterOptions filter;
  CLI::App* filter_cmd = app.add_subcommand("filter", "Run the data selection pipeline");
  filter_cmd->add_option("--manifest", filter.manifest, "Input manifest")->required();
  filter_cmd->add_option("--config", filter.config, "Filter config JSON (default: all stages)");
  filter_cmd->add_option("--freq", filter.freq, "Frequency table for the rare_data stage");
  filter_cmd->add_option("--pairs", filter.pairs, "Hypothesis pairs JSONL for disagreement");
  filter_cmd->add_option("--out", filter.out, "Kept manifest")->required();
  filter_cmd->add_option("--dropped", filter.dropped, "Dropped manifest with reasons");
  filter_cmd->add_option("--report", filter.report, "Report JSON (default: stdout)");
  add_threads(filter_cmd);

  SegmentOptions segment;
  CLI::App* segment_cmd = app.add_subcommand("segment", "Cut aligned utterances into segments");
  segment_cmd->add_option("--manifest", segment.manifest, "Input manifest")->required();
  segment_cmd->add_option("--out", segment.out, "Segment manifest (default: stdout)");
  segment_cmd->add_option("--dropped", segment.dropped, "Records that could not be segmented");
  segment_cmd->add_option("--report", segment.report, "Report JSON");
  segment_cmd->add_option("--max-segment-s", segment.max_segment_s, "Maximum segment span");
  add_threads(segment_cmd);

  ScoreOptions score;
  CLI::App* score_cmd = app.add_subcommand("score", "WER and rare-word WER");
  score_cmd->add_option("--ref", score.ref, "Reference manifest")->required();
  score_cmd->add_option("--hyp", score.hyp, "Hypothesis manifest")->required();
  score_cmd->add_option("--freq", score.freq, "Frequency table; enables rare WER");
  score_cmd->add_option("--norm", score.norm, "Comma list of lower,punct,fillers or none");
  score_cmd->add_option("--fillers", score.fillers, "Comma-separated filler words");
  score_cmd->add_option("--report", score.report, "Report JSON (default: stdout)");
  add_threads(score_cmd);

  LossOptions loss;
  CLI::App* loss_cmd = app.add_subcommand("loss", "Evaluate a transducer loss case");
  loss_cmd->add_option("--input", loss.input, "Loss case JSON")->required();
  loss_cmd->add_flag("--grad", loss.grad, "Report the gradient max-abs");
  loss_cmd->add_flag("--check", loss.check, "Verify against enumeration and finite differences");

  BudgetOptions bud;
  CLI::App* budget_cmd = app.add_subcommand("budget", "Parameter, FLOPs and loss-memory budget");
  budget_cmd->add_option("--preset", bud.preset, "Base encoder: 100M, 1B or 10B");
  budget_cmd->add_option("--hidden", bud.hidden, "Hidden size");
  budget_cmd->add_option("--layers", bud.layers, "Transformer blocks");
  budget_cmd->add_option("--heads", bud.heads, "Attention heads");
  budget_cmd->add_option("--batch-hours", bud.batch_hours, "Audio hours per update");
  budget_cmd->add_option("--updates", bud.updates, "Number of updates");
  budget_cmd->add_option("--frame-ms", bud.frame_ms, "Encoder frame shift in ms");
  budget_cmd->add_option("--convention", bud.convention, "forward_2ND or train_6ND");
  budget_cmd->add_option("--batch", bud.shape.batch, "Loss memory: utterances per batch");
  budget_cmd->add_option("--frames", bud.shape.frames, "Loss memory: encoder frames T");
  budget_cmd->add_option("--targets", bud.shape.targets, "Loss memory: target length U");
  budget_cmd->add_option("--vocab", bud.shape.vocab, "Loss memory: output units D");
  budget_cmd->add_option("--b-left", bud.shape.left, "Loss memory: left buffer");
  budget_cmd->add_option("--b-right", bud.shape.right, "Loss memory: right buffer");
  budget_cmd->add_option("--bytes-per-cell", bud.shape.bytes_per_cell, "Loss memory: bytes per value");
  budget_cmd->add_option("--out", bud.out, "Report JSON (default: stdout)");

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("asrkit");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    OutputSet outputs(out);
    if (freq_cmd->parsed()) {
      CmdFreq(freq, outputs, err);
    } else if (filter_cmd->parsed()) {
      CmdFilter(filter, common, outputs, err);
    } else if (segment_cmd->parsed()) {
      CmdSegment(segment, common, outputs, err);
    } else if (score_cmd->parsed()) {
      CmdScore(score, common, outputs, err);
    } else if (loss_cmd->parsed()) {
      try {
        CmdLoss(loss, hooks, outputs, err);
      } catch (const CheckFailed&) {
        // The report explains the failure; publish it before failing.
        outputs.Commit();
        throw;
      }
    } else if (budget_cmd->parsed()) {
      CmdBudget(bud, outputs);
    }
    outputs.Commit();
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InfeasibleBandError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const CheckFailed& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace asrkit::cli
