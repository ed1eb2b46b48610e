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
#include <string>
#include <string_view>

namespace asrkit::budget {

// Transformer encoder shape. The FFN inner size is always 4x hidden and the
// VGG front end leaves one encoder frame every 80 ms.
struct EncoderConfig {
  std::int64_t hidden = 0;
  std::int64_t layers = 0;
  std::int64_t heads = 0;
  std::int64_t ffn_multiplier = 4;
  double frame_ms = 80.0;
  double dropout = 0.1;  // informational

  // Throws ConfigError.
  void Validate() const;
};

// The three published encoder sizes.
EncoderConfig Encoder100M();
EncoderConfig Encoder1B();
EncoderConfig Encoder10B();

enum class FlopsConvention { kForward2ND, kTrain6ND };
std::string_view ToString(FlopsConvention c);
std::optional<FlopsConvention> ConventionFromString(std::string_view name);

struct TrainPlan {
  double batch_hours = 23.0;
  std::int64_t updates = 200000;
  FlopsConvention convention = FlopsConvention::kTrain6ND;

  void Validate() const;
};

struct ParamBreakdown {
  // 12 * layers * hidden^2: attention projections (4 d^2) plus the two FFN
  // matrices (2 * 4 d^2).
  std::int64_t core = 0;
  // Per layer: 4d attention biases, 4d + d FFN biases, two layer norms (4d).
  std::int64_t bias_and_norm = 0;
  // VGG front end plus its projection to the hidden size (see budget.cpp).
  std::int64_t frontend = 0;
  std::int64_t encoder_total = 0;  // core + bias_and_norm + frontend
  // Fixed non-encoder parts of the transducer, reported separately.
  std::int64_t predictor = 19'000'000;
  std::int64_t joiner = 4'000'000;
};

ParamBreakdown CountParams(const EncoderConfig& config);

// 1 / sqrt(2n): scale for the second FFN projection in an n-block stack.
double InitScale(std::int64_t layers);

// Encoder frames seen per update: batch_hours * 3600 s * (1000 / frame_ms).
double FramesPerUpdate(const EncoderConfig& config, const TrainPlan& plan);

// Total encoder compute in PFLOPs (1e15) for `params` parameters:
// k * params * frames_per_update * updates with k = 2 (forward) or 6 (train).
double TotalPflops(std::int64_t params, const EncoderConfig& config,
                   const TrainPlan& plan);

struct LossMemory {
  double full_bytes = 0.0;
  double restricted_bytes = 0.0;
};

// full = B*T*(U+1)*D*bytes; restricted = B*min(T + U*(b_l+b_r+1), T*(U+1))*D*bytes.
LossMemory TransducerLossMemory(std::int64_t batch, std::int64_t frames,
                                std::int64_t targets, std::int64_t vocab,
                                std::int64_t left, std::int64_t right,
                                double bytes_per_cell);

struct LossShape {
  std::int64_t batch = 1;
  std::int64_t frames = 100;
  std::int64_t targets = 20;
  std::int64_t vocab = 4096;
  std::int64_t left = 15;
  std::int64_t right = 15;
  double bytes_per_cell = 4.0;
};

struct BudgetReport {
  EncoderConfig encoder;
  TrainPlan plan;
  LossShape loss_shape;
  ParamBreakdown params;
  double frames_per_update = 0.0;
  double flops_per_update = 0.0;
  double total_pflops = 0.0;
  LossMemory loss_memory;
  double init_scale = 0.0;

  std::string ToJson() const;
};

// FLOPs use the core parameter count.
BudgetReport MakeReport(const EncoderConfig& encoder, const TrainPlan& plan,
                        const LossShape& loss_shape = {});

}  // namespace asrkit::budget
