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

#include "asrkit/rnnt_reference.hpp"

#include <cmath>
#include <limits>

namespace asrkit::rnnt {

namespace {

// Plain probabilities, no log space: the reference shares nothing with the
// lattice code beyond the instance layout.
struct Walker {
  const RnntInstance& x;
  const AlignmentBand* band;
  std::vector<double> softmax;

  double Prob(int t, int u, int v) const { return softmax[x.Index(t, u, v)]; }

  bool EmitAllowed(int t, int u_next) const {
    if (!band) return true;
    const long long a = band->token_frames[u_next - 1];
    return t >= a - band->left && t <= a + band->right;
  }

  // Sum over all completions starting at node (t, u) with accumulated
  // probability `acc`.
  double Walk(int t, int u, double acc) const {
    if (t == x.T - 1 && u == x.U) return acc * Prob(t, u, kBlank);
    double total = 0.0;
    if (u < x.U && EmitAllowed(t, u + 1))
      total += Walk(t, u + 1, acc * Prob(t, u, x.targets[u]));
    if (t < x.T - 1) total += Walk(t + 1, u, acc * Prob(t, u, kBlank));
    return total;
  }
};

}  // namespace

double EnumerateLoss(const RnntInstance& x, const AlignmentBand* band) {
  x.Validate();
  Walker walker{x, band, std::vector<double>(x.logits.size())};
  for (std::size_t node = 0; node < x.logits.size(); node += x.V) {
    double norm = 0.0;
    for (int v = 0; v < x.V; ++v) norm += std::exp(x.logits[node + v]);
    for (int v = 0; v < x.V; ++v)
      walker.softmax[node + v] = std::exp(x.logits[node + v]) / norm;
  }
  const double p = walker.Walk(0, 0, 1.0);
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(p);
}

std::uint64_t CountAlignments(int T, int U) {
  // C(T - 1 + U, U) by the multiplicative formula; exact for the sizes used.
  std::uint64_t c = 1;
  for (int k = 1; k <= U; ++k) c = c * static_cast<std::uint64_t>(T - 1 + k) / k;
  return c;
}

}  // namespace asrkit::rnnt
