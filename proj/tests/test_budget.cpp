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

#include <cmath>

#include "asrkit/error.hpp"
#include "doctest.h"

using namespace asrkit;
using namespace asrkit::budget;

TEST_CASE("core parameter counts of the presets") {
  CHECK(CountParams(Encoder100M()).core == 113'246'208);
  CHECK(CountParams(Encoder1B()).core == 955'514'880);
  CHECK(CountParams(Encoder10B()).core == 10'192'158'720);
}

TEST_CASE("encoder totals land near the nominal sizes") {
  const auto near = [](std::int64_t value, double label) {
    return std::abs(static_cast<double>(value) - label) <= 0.3 * label;
  };
  CHECK(near(CountParams(Encoder100M()).encoder_total, 1e8));
  CHECK(near(CountParams(Encoder1B()).encoder_total, 1e9));
  CHECK(near(CountParams(Encoder10B()).encoder_total, 1e10));
  const auto p = CountParams(Encoder100M());
  CHECK(p.encoder_total == p.core + p.bias_and_norm + p.frontend);
  CHECK(p.bias_and_norm == 36 * (4 * 512 + 4 * 512 + 512 + 4 * 512));
}

TEST_CASE("training compute") {
  const TrainPlan plan;
  const auto enc = Encoder10B();
  CHECK(FramesPerUpdate(enc, plan) == 1'035'000.0);
  const double total = TotalPflops(CountParams(enc).core, enc, plan);
  CHECK(total == doctest::Approx(12'658'661.13024).epsilon(1e-12));
  CHECK(total / 8.41e6 < 2.0);
  CHECK(total / 8.41e6 > 0.5);

  TrainPlan fwd = plan;
  fwd.convention = FlopsConvention::kForward2ND;
  CHECK(TotalPflops(1000, enc, fwd) * 3 == doctest::Approx(TotalPflops(1000, enc, plan)));

  TrainPlan none = plan;
  none.updates = 0;
  CHECK(TotalPflops(CountParams(enc).core, enc, none) == 0.0);

  EncoderConfig slow = enc;
  slow.frame_ms = 160.0;
  CHECK(TotalPflops(12345, slow, plan) * 2 == TotalPflops(12345, enc, plan));

  const auto report = MakeReport(enc, plan);
  CHECK(report.total_pflops == total);
  CHECK(report.flops_per_update == 6.0 * CountParams(enc).core * 1'035'000.0);
}

TEST_CASE("transducer loss memory") {
  const auto m = TransducerLossMemory(1, 100, 20, 4096, 15, 15, 4.0);
  CHECK(m.full_bytes == 34'406'400.0);
  CHECK(m.restricted_bytes == 11'796'480.0);

  const auto u0 = TransducerLossMemory(2, 50, 0, 16, 3, 3, 2.0);
  CHECK(u0.full_bytes == u0.restricted_bytes);

  const auto sat = TransducerLossMemory(1, 30, 5, 8, 30, 30, 4.0);
  CHECK(sat.restricted_bytes == sat.full_bytes);

  for (std::int64_t b = 0; b < 40; ++b) {
    const auto r = TransducerLossMemory(3, 40, 7, 10, b, b / 2, 4.0);
    CHECK(r.restricted_bytes <= r.full_bytes);
  }
  CHECK_THROWS_AS(TransducerLossMemory(0, 1, 1, 1, 1, 1, 4.0), ConfigError);
  CHECK_THROWS_AS(TransducerLossMemory(1, 1, 1, 1, -1, 1, 4.0), ConfigError);
}

TEST_CASE("init scale") {
  CHECK(InitScale(1) == doctest::Approx(0.707107).epsilon(1e-6));
  CHECK(InitScale(36) == doctest::Approx(0.117851).epsilon(1e-6));
  CHECK(InitScale(90) == doctest::Approx(0.074536).epsilon(1e-6));
  CHECK_THROWS_AS(InitScale(0), ConfigError);
}

TEST_CASE("validation") {
  EncoderConfig c = Encoder100M();
  c.heads = 7;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = Encoder100M();
  c.layers = -1;
  CHECK_THROWS_AS(CountParams(c), ConfigError);
  TrainPlan p;
  p.batch_hours = 0;
  CHECK_THROWS_AS(p.Validate(), ConfigError);
  CHECK(ConventionFromString("forward_2ND") == FlopsConvention::kForward2ND);
  CHECK(ConventionFromString("6ND") == std::nullopt);
}

TEST_CASE("report echoes its assumptions") {
  const std::string json = MakeReport(Encoder10B(), TrainPlan{}).ToJson();
  for (const char* key : {"\"batch_hours\"", "\"updates\"", "\"flops_convention\"",
                          "\"train_6ND\"", "\"frame_ms\"", "\"loss_mem_full\"",
                          "\"init_scale\"", "\"flops_params\""})
    CHECK(json.find(key) != std::string::npos);
}
