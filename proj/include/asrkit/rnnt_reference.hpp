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

#include "asrkit/rnnt.hpp"

namespace asrkit::rnnt {

// Brute-force reference for the transducer loss: walks every monotonic
// alignment (T - 1 inner blanks and U emissions in any order, then the final
// blank), multiplies softmax probabilities and returns -log of the sum.
// With a band, only alignments that emit token u at a frame inside
// [a_u - b_l, a_u + b_r] are summed. Returns +inf when nothing survives.
double EnumerateLoss(const RnntInstance& instance,
                     const AlignmentBand* band = nullptr);

// Number of alignments the enumeration visits without a band:
// C(T - 1 + U, U).
std::uint64_t CountAlignments(int T, int U);

}  // namespace asrkit::rnnt
