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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrkit/manifest.hpp"

namespace asrkit::rnnt {

inline constexpr int kBlank = 0;

// Raw (pre-softmax) joiner outputs for one utterance, laid out row-major as
// [T][U+1][V], plus the target token ids (never the blank).
struct RnntInstance {
  int T = 0;
  int U = 0;
  int V = 0;
  std::vector<double> logits;
  std::vector<int> targets;

  std::size_t Index(int t, int u, int v) const {
    return (static_cast<std::size_t>(t) * (U + 1) + u) * V + v;
  }
  double Logit(int t, int u, int v) const { return logits[Index(t, u, v)]; }

  // Throws ValidationError on inconsistent shapes or out-of-range targets.
  void Validate() const;
};

// Per-token frame positions with left/right buffers, in frames.
struct AlignmentBand {
  std::vector<int> token_frames;
  int left = 15;
  int right = 15;
};

// Inclusive frame range [first, last] of one lattice row; empty when
// first > last.
struct RowRange {
  int first = 0;
  int last = -1;
  int width() const { return last >= first ? last - first + 1 : 0; }
};

// The set of lattice nodes (t, u) that are evaluated, stored row by row.
//
// Restricting token u's emission to frames [a_u - b_l, a_u + b_r] is the same
// as restricting node validity: a path sits in row u only between emitting
// token u and emitting token u + 1, so row u spans
//   [a_u - b_l, a_{u+1} + b_r]
// with row 0 starting at frame 0 and row U ending at frame T - 1. Summed over
// rows this is at most T + U * (b_l + b_r + 1) nodes.
class LatticeLayout {
 public:
  static LatticeLayout Full(int T, int U);
  // Throws ValidationError when the band has the wrong length or negative
  // buffers. Frames outside [0, T) are clamped by the row ranges.
  static LatticeLayout Restricted(int T, int U, const AlignmentBand& band);

  int T() const { return T_; }
  int U() const { return U_; }
  const RowRange& row(int u) const { return rows_[u]; }
  std::size_t cells() const { return cells_; }
  bool Contains(int t, int u) const {
    if (u < 0 || u > U_) return false;
    const RowRange& r = rows_[u];
    return t >= r.first && t <= r.last;
  }
  // Dense index of a contained node.
  std::size_t Slot(int t, int u) const {
    return offsets_[u] + static_cast<std::size_t>(t - rows_[u].first);
  }

 private:
  int T_ = 0;
  int U_ = 0;
  std::vector<RowRange> rows_;
  std::vector<std::size_t> offsets_;
  std::size_t cells_ = 0;
};

struct LossResult {
  double loss = 0.0;  // nats
  // Same layout as RnntInstance::logits; exactly zero outside the layout.
  std::optional<std::vector<double>> gradients;
  std::size_t valid_cells = 0;
};

// Negative log-likelihood over all monotonic alignments of the full
// T x (U+1) lattice, computed in double precision in log space.
LossResult LossFull(const RnntInstance& instance, bool with_gradients = true);

// Same recursion restricted to the band's nodes. Throws InfeasibleBandError
// when no complete path survives.
LossResult LossRestricted(const RnntInstance& instance,
                          const AlignmentBand& band, bool with_gradients = true);

// Shared entry point for both variants.
LossResult Loss(const RnntInstance& instance, const LatticeLayout& layout,
                bool with_gradients = true);

// Each word's tokens are spread evenly over [start_s, end_s), converted to
// frames with floor, clamped to [0, T-1] and made non-decreasing.
AlignmentBand BandFromWordSpans(std::span<const WordSpan> words,
                                std::span<const int> tokens_per_word,
                                double frame_rate_hz, int T, int left = 15,
                                int right = 15);

struct CellCount {
  std::size_t full = 0;
  std::size_t restricted = 0;
};

// `restricted` equals `full` when no band is given.
CellCount CountCells(int T, int U, const AlignmentBand* band = nullptr);

// Largest |sum_v dloss/dlogit(t,u,v)| over all nodes.
double MaxNodeGradientSum(const RnntInstance& instance,
                          std::span<const double> gradients);

// Central finite differences on every logit against `analytic`; returns the
// max of |a - n| / max(|a|, |n|, 1e-8).
double GradCheckAgainst(const RnntInstance& instance, const AlignmentBand* band,
                        std::span<const double> analytic,
                        double epsilon = 1e-5);
double GradCheck(const RnntInstance& instance, const AlignmentBand* band,
                 double epsilon = 1e-5);

// Loss case files: {T, U, V, logits:[T][U+1][V], targets:[...],
// band?:{a:[...], b_l, b_r}}. Throws DataError.
struct LossCase {
  RnntInstance instance;
  std::optional<AlignmentBand> band;
};
LossCase ParseLossCase(std::string_view json_text);
std::string WriteLossCase(const LossCase& c);

}  // namespace asrkit::rnnt
