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

#include "asrkit/budget.hpp"

#include <algorithm>
#include <cmath>

#include "asrkit/error.hpp"
#include "json.hpp"

namespace asrkit::budget {

namespace {

// Front end estimate: three VGG blocks of two 3x3 convolutions each with
// channels 64, 128, 128 and 2x2 pooling, so 80 mel bins shrink to 10 and the
// frame shift grows from 10 ms to 80 ms. The flattened 128 * 10 features are
// projected to the hidden size.
constexpr std::int64_t kMelBins = 80;
constexpr std::int64_t kVggChannels[3] = {64, 128, 128};

std::int64_t ConvParams(std::int64_t in, std::int64_t out) {
  return 9 * in * out + out;
}

std::int64_t FrontendParams(std::int64_t hidden) {
  std::int64_t total = 0;
  std::int64_t in = 1;
  std::int64_t bins = kMelBins;
  for (std::int64_t out : kVggChannels) {
    total += ConvParams(in, out) + ConvParams(out, out);
    in = out;
    bins /= 2;
  }
  return total + in * bins * hidden + hidden;
}

}  // namespace

void EncoderConfig::Validate() const {
  if (hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (layers < 1) throw ConfigError("layers must be >= 1");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (hidden % heads != 0)
    throw ConfigError("hidden size must be divisible by heads");
  if (ffn_multiplier < 1) throw ConfigError("ffn multiplier must be >= 1");
  if (!(frame_ms > 0.0)) throw ConfigError("frame_ms must be > 0");
}

EncoderConfig Encoder100M() { return {512, 36, 8}; }
EncoderConfig Encoder1B() { return {1152, 60, 16}; }
EncoderConfig Encoder10B() { return {3072, 90, 48}; }

std::string_view ToString(FlopsConvention c) {
  return c == FlopsConvention::kForward2ND ? "forward_2ND" : "train_6ND";
}

std::optional<FlopsConvention> ConventionFromString(std::string_view name) {
  if (name == "forward_2ND") return FlopsConvention::kForward2ND;
  if (name == "train_6ND") return FlopsConvention::kTrain6ND;
  return std::nullopt;
}

void TrainPlan::Validate() const {
  if (!(batch_hours > 0.0)) throw ConfigError("batch hours must be > 0");
  if (updates < 0) throw ConfigError("updates must be >= 0");
}

ParamBreakdown CountParams(const EncoderConfig& c) {
  c.Validate();
  const std::int64_t d = c.hidden;
  const std::int64_t n = c.layers;
  const std::int64_t ffn = c.ffn_multiplier * d;
  ParamBreakdown p;
  p.core = n * (4 * d * d + 2 * d * ffn);
  p.bias_and_norm = n * (4 * d + ffn + d + 4 * d);
  p.frontend = FrontendParams(d);
  p.encoder_total = p.core + p.bias_and_norm + p.frontend;
  return p;
}

double InitScale(std::int64_t layers) {
  if (layers < 1) throw ConfigError("layers must be >= 1");
  return 1.0 / std::sqrt(2.0 * static_cast<double>(layers));
}

double FramesPerUpdate(const EncoderConfig& config, const TrainPlan& plan) {
  return plan.batch_hours * 3600.0 * (1000.0 / config.frame_ms);
}

double TotalPflops(std::int64_t params, const EncoderConfig& config,
                   const TrainPlan& plan) {
  const double k = plan.convention == FlopsConvention::kTrain6ND ? 6.0 : 2.0;
  return k * static_cast<double>(params) * FramesPerUpdate(config, plan) *
         static_cast<double>(plan.updates) / 1e15;
}

LossMemory TransducerLossMemory(std::int64_t batch, std::int64_t frames,
                                std::int64_t targets, std::int64_t vocab,
                                std::int64_t left, std::int64_t right,
                                double bytes_per_cell) {
  if (batch < 1 || frames < 1 || targets < 0 || vocab < 1)
    throw ConfigError("loss memory: dimensions must be positive");
  if (left < 0 || right < 0) throw ConfigError("loss memory: buffers must be >= 0");
  if (!(bytes_per_cell > 0.0)) throw ConfigError("loss memory: bytes per cell must be > 0");
  const double full_cells = static_cast<double>(frames) * (targets + 1);
  const double band_cells =
      static_cast<double>(frames) + static_cast<double>(targets) * (left + right + 1);
  const double scale = static_cast<double>(batch) * vocab * bytes_per_cell;
  return {full_cells * scale, std::min(band_cells, full_cells) * scale};
}

BudgetReport MakeReport(const EncoderConfig& encoder, const TrainPlan& plan,
                        const LossShape& s) {
  encoder.Validate();
  plan.Validate();
  BudgetReport r;
  r.encoder = encoder;
  r.plan = plan;
  r.loss_shape = s;
  r.params = CountParams(encoder);
  r.frames_per_update = FramesPerUpdate(encoder, plan);
  const double k = plan.convention == FlopsConvention::kTrain6ND ? 6.0 : 2.0;
  r.flops_per_update = k * static_cast<double>(r.params.core) * r.frames_per_update;
  r.total_pflops = TotalPflops(r.params.core, encoder, plan);
  r.loss_memory = TransducerLossMemory(s.batch, s.frames, s.targets, s.vocab,
                                       s.left, s.right, s.bytes_per_cell);
  r.init_scale = InitScale(encoder.layers);
  return r;
}

std::string BudgetReport::ToJson() const {
  nlohmann::ordered_json obj;
  nlohmann::ordered_json enc;
  enc["hidden"] = encoder.hidden;
  enc["layers"] = encoder.layers;
  enc["heads"] = encoder.heads;
  enc["ffn_multiplier"] = encoder.ffn_multiplier;
  enc["frame_ms"] = encoder.frame_ms;
  obj["encoder"] = std::move(enc);

  nlohmann::ordered_json p;
  p["batch_hours"] = plan.batch_hours;
  p["updates"] = plan.updates;
  p["flops_convention"] = std::string(ToString(plan.convention));
  obj["plan"] = std::move(p);

  nlohmann::ordered_json prm;
  prm["core"] = params.core;
  prm["bias_and_norm"] = params.bias_and_norm;
  prm["frontend"] = params.frontend;
  prm["encoder_total"] = params.encoder_total;
  prm["predictor"] = params.predictor;
  prm["joiner"] = params.joiner;
  obj["params"] = std::move(prm);

  obj["frames_per_update"] = frames_per_update;
  obj["flops_per_update"] = flops_per_update;
  obj["total_pflops"] = total_pflops;
  obj["flops_params"] = "core";

  nlohmann::ordered_json mem;
  mem["B"] = loss_shape.batch;
  mem["T"] = loss_shape.frames;
  mem["U"] = loss_shape.targets;
  mem["D"] = loss_shape.vocab;
  mem["b_l"] = loss_shape.left;
  mem["b_r"] = loss_shape.right;
  mem["bytes_per_cell"] = loss_shape.bytes_per_cell;
  mem["loss_mem_full"] = loss_memory.full_bytes;
  mem["loss_mem_restricted"] = loss_memory.restricted_bytes;
  obj["loss_memory"] = std::move(mem);

  obj["init_scale"] = init_scale;
  return obj.dump(1) + "\n";
}

}  // namespace asrkit::budget
