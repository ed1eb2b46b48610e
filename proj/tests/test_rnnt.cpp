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

#include "asrkit/rnnt.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "asrkit/error.hpp"
#include "asrkit/rnnt_reference.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace asrkit;
using namespace asrkit::rnnt;

namespace {

RnntInstance Uniform(int T, int U, int V) {
  RnntInstance x;
  x.T = T;
  x.U = U;
  x.V = V;
  x.logits.assign(static_cast<std::size_t>(T) * (U + 1) * V, 0.0);
  for (int u = 0; u < U; ++u) x.targets.push_back(1 + u % (V - 1));
  return x;
}

// Values produced offline by an independent log-space implementation.
RnntInstance Frozen() {
  RnntInstance x;
  x.T = 3;
  x.U = 2;
  x.V = 4;
  x.targets = {2, 3};
  x.logits = {0.0,   0.3,   -0.27, -0.89, -0.45, -0.99, 0.06,  1.34,  -0.49,
              -0.62, 0.49,  0.36,  0.11,  -0.93, -0.03, 0.7,   -1.34, -0.46,
              -1.9,  -1.29, -1.84, -0.24, -1.27, 0.27,  0.16,  -0.19, -2.52,
              -0.54, -0.05, 0.11,  -1.53, -0.48, -0.98, -0.81, 1.06,  -0.81};
  return x;
}

double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("loss: hand-computed uniform cases") {
  CHECK(LossFull(Uniform(1, 0, 2)).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(LossFull(Uniform(1, 1, 2)).loss ==
        doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
  // T=2, U=1, V=2: two alignments of probability 1/8 each.
  CHECK(LossFull(Uniform(2, 1, 2)).loss == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("loss: frozen reference values") {
  const RnntInstance x = Frozen();
  CHECK(CountAlignments(3, 2) == 6);
  const auto full = LossFull(x);
  CHECK(RelErr(full.loss, 7.450610611172335) <= 1e-12);
  CHECK(full.valid_cells == 9);
  CHECK(RelErr(EnumerateLoss(x), 7.450610611172335) <= 1e-12);

  const AlignmentBand band{{0, 0}, 0, 0};
  const auto restricted = LossRestricted(x, band);
  CHECK(RelErr(restricted.loss, 9.065903612034063) <= 1e-12);
  CHECK(RelErr(EnumerateLoss(x, &band), 9.065903612034063) <= 1e-12);
  // The single surviving path still needs (1,2) and (2,2).
  const auto layout = LatticeLayout::Restricted(3, 2, band);
  CHECK(layout.Contains(1, 2));
  CHECK(layout.Contains(2, 2));
  CHECK_FALSE(layout.Contains(1, 0));
}

TEST_CASE("loss: matches enumeration on random instances") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const RnntInstance x = testing::RandomInstance(rng, 6, 4, 5);
    CHECK(RelErr(LossFull(x, false).loss, EnumerateLoss(x)) <= 1e-10);
    if (x.U == 0) continue;
    const AlignmentBand band = testing::RandomBand(rng, x.T, x.U, 2);
    const double brute = EnumerateLoss(x, &band);
    REQUIRE(std::isfinite(brute));
    const auto r = LossRestricted(x, band, false);
    CHECK(RelErr(r.loss, brute) <= 1e-10);
    CHECK(r.loss >= LossFull(x, false).loss - 1e-12);
  }
}

TEST_CASE("loss: saturated band equals full") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const RnntInstance x = testing::RandomInstance(rng, 10, 6, 6);
    AlignmentBand band = testing::RandomBand(rng, x.T, x.U, 0);
    band.left = band.right = x.T;
    const auto full = LossFull(x);
    const auto r = LossRestricted(x, band);
    CHECK(std::abs(full.loss - r.loss) <= 1e-9);
    CHECK(r.valid_cells == full.valid_cells);
    for (std::size_t k = 0; k < full.gradients->size(); ++k)
      CHECK(std::abs((*full.gradients)[k] - (*r.gradients)[k]) <= 1e-9);
  }
}

TEST_CASE("loss: U = 0 is the all-blank path") {
  RnntInstance x = Uniform(4, 0, 3);
  x.logits = {0.1, 0.2, 0.3, -1.0, 0.0, 2.0, 0.5, 0.5, 0.5, 3.0, -2.0, 1.0};
  double expected = 0.0;
  for (int t = 0; t < 4; ++t) {
    double z = 0.0;
    for (int v = 0; v < 3; ++v) z += std::exp(x.Logit(t, 0, v));
    expected -= x.Logit(t, 0, 0) - std::log(z);
  }
  CHECK(LossFull(x).loss == doctest::Approx(expected).epsilon(1e-13));
  CHECK(LossRestricted(x, AlignmentBand{{}, 0, 0}).loss ==
        doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("gradients: finite differences and node sums") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 60; ++i) {
    const RnntInstance x = testing::RandomInstance(rng, 6, 4, 5);
    const auto full = LossFull(x);
    CHECK(GradCheckAgainst(x, nullptr, *full.gradients) <= 1e-5);
    CHECK(MaxNodeGradientSum(x, *full.gradients) <= 1e-8);
    const AlignmentBand band = testing::RandomBand(rng, x.T, x.U, 2);
    const auto r = LossRestricted(x, band);
    CHECK(GradCheckAgainst(x, &band, *r.gradients) <= 1e-5);
    CHECK(MaxNodeGradientSum(x, *r.gradients) <= 1e-8);
    const auto layout = LatticeLayout::Restricted(x.T, x.U, band);
    for (int t = 0; t < x.T; ++t)
      for (int u = 0; u <= x.U; ++u)
        if (!layout.Contains(t, u))
          for (int v = 0; v < x.V; ++v) CHECK((*r.gradients)[x.Index(t, u, v)] == 0.0);
  }
}

TEST_CASE("gradients: a planted bug is caught") {
  std::mt19937_64 rng(14);
  const RnntInstance x = testing::RandomInstance(rng, 5, 3, 4);
  auto g = *LossFull(x).gradients;
  g[x.Index(0, 0, 0)] *= 1.01;
  CHECK(GradCheckAgainst(x, nullptr, g) > 1e-5);
}

TEST_CASE("loss: invariant to per-node logit shifts") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 30; ++i) {
    RnntInstance x = testing::RandomInstance(rng, 6, 4, 5);
    const double base = LossFull(x, false).loss;
    for (int t = 0; t < x.T; ++t)
      for (int u = 0; u <= x.U; ++u)
        for (int v = 0; v < x.V; ++v) x.logits[x.Index(t, u, v)] += 100.0 * (t - u);
    CHECK(RelErr(LossFull(x, false).loss, base) <= 1e-10);
  }
}

TEST_CASE("loss: large logits stay finite") {
  std::mt19937_64 rng(16);
  RnntInstance x = testing::RandomInstance(rng, 8, 5, 6);
  for (double& v : x.logits) v *= 500.0;
  const auto r = LossFull(x);
  CHECK(std::isfinite(r.loss));
  for (double g : *r.gradients) CHECK(std::isfinite(g));
}

TEST_CASE("loss: widening the band never raises the loss") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) {
    const RnntInstance x = testing::RandomInstance(rng, 10, 5, 5);
    AlignmentBand band = testing::RandomBand(rng, x.T, x.U, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int b = 0; b <= x.T; ++b) {
      band.left = band.right = b;
      const double l = LossRestricted(x, band, false).loss;
      CHECK(l <= prev + 1e-12);
      prev = l;
    }
    CHECK(std::abs(prev - LossFull(x, false).loss) <= 1e-9);
  }
}

TEST_CASE("band: malformed frames are infeasible") {
  const RnntInstance x = Frozen();
  CHECK_THROWS_AS(LossRestricted(x, AlignmentBand{{2, 0}, 0, 0}), InfeasibleBandError);
  const AlignmentBand bad{{2, 0}, 0, 0};
  CHECK(std::isinf(EnumerateLoss(x, &bad)));
  CHECK_THROWS_AS(LossRestricted(x, AlignmentBand{{0}, 0, 0}), ValidationError);
  CHECK_THROWS_AS(LossRestricted(x, AlignmentBand{{0, 0}, -1, 0}), ValidationError);
}

TEST_CASE("band: derived from word spans") {
  const std::vector<WordSpan> one{{"hello", 0.0, 1.0}};
  const std::vector<int> two{2};
  CHECK(BandFromWordSpans(one, two, 12.5, 13).token_frames == std::vector<int>{0, 6});
  const std::vector<int> single{1};
  CHECK(BandFromWordSpans(one, single, 12.5, 13).token_frames == std::vector<int>{0});

  const std::vector<WordSpan> late{{"a", 0.4, 0.5}, {"b", 2.0, 3.0}};
  const std::vector<int> ones{1, 1};
  // 2.0 s is frame 25, clamped to T-1.
  CHECK(BandFromWordSpans(late, ones, 12.5, 10).token_frames == std::vector<int>{5, 9});
  // Overlapping spans never produce decreasing frames.
  const std::vector<WordSpan> overlap{{"a", 1.0, 2.0}, {"b", 0.5, 1.0}};
  CHECK(BandFromWordSpans(overlap, ones, 12.5, 100).token_frames == std::vector<int>{12, 12});
}

TEST_CASE("cell counts") {
  CHECK(CountCells(100, 20).full == 2100);
  CHECK(CountCells(100, 20).restricted == 2100);
  std::mt19937_64 rng(18);
  for (int i = 0; i < 200; ++i) {
    const int T = 1 + static_cast<int>(rng() % 200), U = static_cast<int>(rng() % 40);
    const AlignmentBand band = testing::RandomBand(rng, T, U, 20);
    const auto c = CountCells(T, U, &band);
    CHECK(c.full == static_cast<std::size_t>(T) * (U + 1));
    CHECK(c.restricted <= c.full);
    CHECK(c.restricted <=
          static_cast<std::size_t>(T + U * (band.left + band.right + 1)));
  }
  AlignmentBand spread;
  for (int u = 0; u < 20; ++u) spread.token_frames.push_back(u * 5);
  CHECK(CountCells(100, 20, &spread).restricted <= 720);
}

TEST_CASE("loss case files") {
  const LossCase c{Frozen(), AlignmentBand{{0, 1}, 1, 2}};
  const LossCase back = ParseLossCase(WriteLossCase(c));
  CHECK(back.instance.logits == c.instance.logits);
  CHECK(back.instance.targets == c.instance.targets);
  CHECK(back.band->token_frames == c.band->token_frames);
  CHECK(back.band->left == 1);
  CHECK(back.band->right == 2);

  CHECK_THROWS_AS(ParseLossCase("{"), DataError);
  CHECK_THROWS_AS(ParseLossCase(R"({"T":1,"U":0,"V":2,"logits":[[[0]]],"targets":[]})"),
                  DataError);
  CHECK_THROWS_AS(
      ParseLossCase(R"({"T":1,"U":1,"V":2,"logits":[[[0,0],[0,0]]],"targets":[0]})"),
      DataError);
  CHECK_NOTHROW(ParseLossCase(R"({"T":1,"U":0,"V":2,"logits":[[[0,0]]],"targets":[]})"));
}
