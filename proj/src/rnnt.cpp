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

#include <algorithm>
#include <cmath>
#include <limits>

#include "asrkit/error.hpp"
#include "json.hpp"

namespace asrkit::rnnt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAddExp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

int ClampFrame(long long frame, int T) {
  return static_cast<int>(std::clamp<long long>(frame, 0, T - 1));
}

// Forward-only negative log-likelihood in extended precision with one logit
// shifted by `delta`. The finite-difference checker divides a loss difference
// by 2 * epsilon, so double rounding in the loss alone would cap the
// attainable relative accuracy for small gradients.
long double ExtendedLoss(const RnntInstance& x, const LatticeLayout& layout,
                         std::size_t shifted, long double delta) {
  using R = long double;
  constexpr R kNegInfL = -std::numeric_limits<R>::infinity();
  const auto logit = [&](int t, int u, int v) {
    const std::size_t i = x.Index(t, u, v);
    return static_cast<R>(x.logits[i]) + (i == shifted ? delta : R{0});
  };
  const auto log_add = [&](R a, R b) {
    if (a == kNegInfL) return b;
    if (b == kNegInfL) return a;
    return std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
  };
  std::vector<R> log_norm(layout.cells());
  for (int u = 0; u <= x.U; ++u) {
    const RowRange& r = layout.row(u);
    for (int t = r.first; t <= r.last; ++t) {
      R hi = kNegInfL;
      for (int v = 0; v < x.V; ++v) hi = std::max(hi, logit(t, u, v));
      R sum = 0;
      for (int v = 0; v < x.V; ++v) sum += std::exp(logit(t, u, v) - hi);
      log_norm[layout.Slot(t, u)] = hi + std::log(sum);
    }
  }
  const auto lp = [&](int t, int u, int v) {
    return logit(t, u, v) - log_norm[layout.Slot(t, u)];
  };
  std::vector<R> alpha(layout.cells(), kNegInfL);
  for (int u = 0; u <= x.U; ++u) {
    const RowRange& r = layout.row(u);
    for (int t = r.first; t <= r.last; ++t) {
      if (t == 0 && u == 0) {
        alpha[layout.Slot(t, u)] = 0;
        continue;
      }
      const R b = layout.Contains(t - 1, u)
                      ? alpha[layout.Slot(t - 1, u)] + lp(t - 1, u, kBlank)
                      : kNegInfL;
      const R l = layout.Contains(t, u - 1)
                      ? alpha[layout.Slot(t, u - 1)] + lp(t, u - 1, x.targets[u - 1])
                      : kNegInfL;
      alpha[layout.Slot(t, u)] = log_add(b, l);
    }
  }
  return -(alpha[layout.Slot(x.T - 1, x.U)] + lp(x.T - 1, x.U, kBlank));
}

}  // namespace

void RnntInstance::Validate() const {
  if (T < 1) throw ValidationError("rnnt: T must be >= 1");
  if (U < 0) throw ValidationError("rnnt: U must be >= 0");
  if (V < 2) throw ValidationError("rnnt: V must be >= 2");
  const std::size_t expected = static_cast<std::size_t>(T) * (U + 1) * V;
  if (logits.size() != expected)
    throw ValidationError("rnnt: logits have " + std::to_string(logits.size()) +
                          " entries, expected T*(U+1)*V = " +
                          std::to_string(expected));
  if (targets.size() != static_cast<std::size_t>(U))
    throw ValidationError("rnnt: targets length differs from U");
  for (int y : targets) {
    if (y < 1 || y >= V)
      throw ValidationError("rnnt: target id " + std::to_string(y) +
                            " outside [1, V-1]");
  }
  for (double z : logits) {
    if (!std::isfinite(z)) throw ValidationError("rnnt: non-finite logit");
  }
}

// ---------------------------------------------------------------------------
// Layout

LatticeLayout LatticeLayout::Full(int T, int U) {
  LatticeLayout layout;
  layout.T_ = T;
  layout.U_ = U;
  layout.rows_.assign(U + 1, RowRange{0, T - 1});
  layout.offsets_.resize(U + 1);
  for (int u = 0; u <= U; ++u) {
    layout.offsets_[u] = layout.cells_;
    layout.cells_ += static_cast<std::size_t>(T);
  }
  return layout;
}

LatticeLayout LatticeLayout::Restricted(int T, int U, const AlignmentBand& band) {
  if (band.token_frames.size() != static_cast<std::size_t>(U))
    throw ValidationError("band: " + std::to_string(band.token_frames.size()) +
                          " token frames for U = " + std::to_string(U));
  if (band.left < 0 || band.right < 0)
    throw ValidationError("band: buffers must be >= 0");
  if (U == 0) return Full(T, U);

  // a(u) is the frame of token u, 1-based like the lattice rows.
  const auto a = [&](int u) -> long long { return band.token_frames[u - 1]; };
  LatticeLayout layout;
  layout.T_ = T;
  layout.U_ = U;
  layout.rows_.resize(U + 1);
  layout.offsets_.resize(U + 1);
  for (int u = 0; u <= U; ++u) {
    const long long lo = (u == 0) ? 0 : a(u) - band.left;
    const long long hi = (u == U) ? T - 1 : a(u + 1) + band.right;
    RowRange r;
    if (hi < 0 || lo > T - 1 || lo > hi) {
      r = RowRange{0, -1};
    } else {
      r = RowRange{ClampFrame(lo, T), ClampFrame(hi, T)};
    }
    layout.rows_[u] = r;
    layout.offsets_[u] = layout.cells_;
    layout.cells_ += static_cast<std::size_t>(r.width());
  }
  return layout;
}

// ---------------------------------------------------------------------------
// Loss

LossResult Loss(const RnntInstance& x, const LatticeLayout& layout,
                bool with_gradients) {
  x.Validate();
  if (layout.T() != x.T || layout.U() != x.U)
    throw ValidationError("rnnt: layout shape differs from instance");
  const int T = x.T;
  const int U = x.U;
  const int V = x.V;
  if (!layout.Contains(0, 0) || !layout.Contains(T - 1, U))
    throw InfeasibleBandError("band excludes the start or final lattice node");

  // Per-node log partition function.
  std::vector<double> log_norm(layout.cells());
  for (int u = 0; u <= U; ++u) {
    const RowRange& r = layout.row(u);
    for (int t = r.first; t <= r.last; ++t) {
      const double* z = &x.logits[x.Index(t, u, 0)];
      const double hi = *std::max_element(z, z + V);
      double sum = 0.0;
      for (int v = 0; v < V; ++v) sum += std::exp(z[v] - hi);
      log_norm[layout.Slot(t, u)] = hi + std::log(sum);
    }
  }
  const auto blank_lp = [&](int t, int u) {
    return x.Logit(t, u, kBlank) - log_norm[layout.Slot(t, u)];
  };
  const auto label_lp = [&](int t, int u) {
    return x.Logit(t, u, x.targets[u]) - log_norm[layout.Slot(t, u)];
  };

  std::vector<double> alpha(layout.cells(), kNegInf);
  for (int u = 0; u <= U; ++u) {
    const RowRange& r = layout.row(u);
    for (int t = r.first; t <= r.last; ++t) {
      double value;
      if (t == 0 && u == 0) {
        value = 0.0;
      } else {
        const double from_blank = layout.Contains(t - 1, u)
                                      ? alpha[layout.Slot(t - 1, u)] + blank_lp(t - 1, u)
                                      : kNegInf;
        const double from_label = layout.Contains(t, u - 1)
                                      ? alpha[layout.Slot(t, u - 1)] + label_lp(t, u - 1)
                                      : kNegInf;
        value = LogAddExp(from_blank, from_label);
      }
      alpha[layout.Slot(t, u)] = value;
    }
  }
  const double log_likelihood = alpha[layout.Slot(T - 1, U)] + blank_lp(T - 1, U);
  if (!std::isfinite(log_likelihood))
    throw InfeasibleBandError("band admits no complete alignment path");

  LossResult result;
  result.loss = -log_likelihood;
  result.valid_cells = layout.cells();
  if (!with_gradients) return result;

  std::vector<double> beta(layout.cells(), kNegInf);
  for (int u = U; u >= 0; --u) {
    const RowRange& r = layout.row(u);
    for (int t = r.last; t >= r.first; --t) {
      double value;
      if (t == T - 1 && u == U) {
        value = blank_lp(t, u);
      } else {
        const double to_blank = layout.Contains(t + 1, u)
                                    ? blank_lp(t, u) + beta[layout.Slot(t + 1, u)]
                                    : kNegInf;
        const double to_label = (u < U && layout.Contains(t, u + 1))
                                    ? label_lp(t, u) + beta[layout.Slot(t, u + 1)]
                                    : kNegInf;
        value = LogAddExp(to_blank, to_label);
      }
      beta[layout.Slot(t, u)] = value;
    }
  }

  // dloss/dz(t,u,v) = softmax(v) * occupancy(t,u) - [v = blank] * blank_flow
  //                   - [v = y_{u+1}] * label_flow
  std::vector<double> grad(x.logits.size(), 0.0);
  for (int u = 0; u <= U; ++u) {
    const RowRange& r = layout.row(u);
    for (int t = r.first; t <= r.last; ++t) {
      const double a = alpha[layout.Slot(t, u)];
      if (a == kNegInf) continue;
      double next_blank;
      if (t == T - 1 && u == U) {
        next_blank = 0.0;
      } else {
        next_blank = layout.Contains(t + 1, u) ? beta[layout.Slot(t + 1, u)] : kNegInf;
      }
      const double blank_flow = std::exp(a + blank_lp(t, u) + next_blank + result.loss);
      const double label_flow =
          (u < U && layout.Contains(t, u + 1))
              ? std::exp(a + label_lp(t, u) + beta[layout.Slot(t, u + 1)] + result.loss)
              : 0.0;
      const double occupancy = blank_flow + label_flow;
      if (occupancy == 0.0) continue;
      const double ln = log_norm[layout.Slot(t, u)];
      double* g = &grad[x.Index(t, u, 0)];
      const double* z = &x.logits[x.Index(t, u, 0)];
      for (int v = 0; v < V; ++v) g[v] = std::exp(z[v] - ln) * occupancy;
      g[kBlank] -= blank_flow;
      if (u < U) g[x.targets[u]] -= label_flow;
    }
  }
  result.gradients = std::move(grad);
  return result;
}

LossResult LossFull(const RnntInstance& instance, bool with_gradients) {
  instance.Validate();
  return Loss(instance, LatticeLayout::Full(instance.T, instance.U),
              with_gradients);
}

LossResult LossRestricted(const RnntInstance& instance,
                          const AlignmentBand& band, bool with_gradients) {
  instance.Validate();
  return Loss(instance,
              LatticeLayout::Restricted(instance.T, instance.U, band),
              with_gradients);
}

// ---------------------------------------------------------------------------
// Bands and counting

AlignmentBand BandFromWordSpans(std::span<const WordSpan> words,
                                std::span<const int> tokens_per_word,
                                double frame_rate_hz, int T, int left,
                                int right) {
  if (words.size() != tokens_per_word.size())
    throw ValidationError("band: one token count per word is required");
  if (!(frame_rate_hz > 0.0)) throw ValidationError("band: frame rate must be > 0");
  if (T < 1) throw ValidationError("band: T must be >= 1");
  if (left < 0 || right < 0) throw ValidationError("band: buffers must be >= 0");

  AlignmentBand band;
  band.left = left;
  band.right = right;
  int previous = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const int n = tokens_per_word[w];
    if (n < 1) throw ValidationError("band: token count per word must be >= 1");
    const double start = words[w].start_s;
    const double step = (words[w].end_s - start) / n;
    for (int j = 0; j < n; ++j) {
      const double seconds = start + j * step;
      const auto frame =
          static_cast<long long>(std::floor(seconds * frame_rate_hz + 1e-9));
      const int clamped = std::max(previous, ClampFrame(frame, T));
      band.token_frames.push_back(clamped);
      previous = clamped;
    }
  }
  return band;
}

CellCount CountCells(int T, int U, const AlignmentBand* band) {
  CellCount count;
  count.full = static_cast<std::size_t>(T) * (U + 1);
  count.restricted =
      band ? LatticeLayout::Restricted(T, U, *band).cells() : count.full;
  return count;
}

double MaxNodeGradientSum(const RnntInstance& x,
                          std::span<const double> gradients) {
  double worst = 0.0;
  for (int t = 0; t < x.T; ++t) {
    for (int u = 0; u <= x.U; ++u) {
      double sum = 0.0;
      for (int v = 0; v < x.V; ++v) sum += gradients[x.Index(t, u, v)];
      worst = std::max(worst, std::abs(sum));
    }
  }
  return worst;
}

double GradCheckAgainst(const RnntInstance& instance, const AlignmentBand* band,
                        std::span<const double> analytic, double epsilon) {
  instance.Validate();
  if (!(epsilon > 0.0)) throw ConfigError("grad check epsilon must be > 0");
  if (analytic.size() != instance.logits.size())
    throw ValidationError("grad check: gradient has the wrong size");
  const LatticeLayout layout =
      band ? LatticeLayout::Restricted(instance.T, instance.U, *band)
           : LatticeLayout::Full(instance.T, instance.U);
  if (!layout.Contains(0, 0) || !layout.Contains(instance.T - 1, instance.U))
    throw InfeasibleBandError("band excludes the start or final lattice node");
  const long double eps = epsilon;
  double worst = 0.0;
  for (std::size_t i = 0; i < instance.logits.size(); ++i) {
    const long double plus = ExtendedLoss(instance, layout, i, eps);
    const long double minus = ExtendedLoss(instance, layout, i, -eps);
    const double numeric = static_cast<double>((plus - minus) / (2 * eps));
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double GradCheck(const RnntInstance& instance, const AlignmentBand* band,
                 double epsilon) {
  const LossResult r =
      band ? LossRestricted(instance, *band) : LossFull(instance);
  return GradCheckAgainst(instance, band, *r.gradients, epsilon);
}

// ---------------------------------------------------------------------------
// Case files

LossCase ParseLossCase(std::string_view text) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("loss case: malformed JSON: ") + e.what());
  }
  LossCase c;
  RnntInstance& x = c.instance;
  try {
    x.T = obj.at("T").get<int>();
    x.U = obj.at("U").get<int>();
    x.V = obj.at("V").get<int>();
    x.targets = obj.at("targets").get<std::vector<int>>();
    const auto& frames = obj.at("logits");
    if (x.T < 1 || x.U < 0 || x.V < 2)
      throw ValidationError("loss case: need T >= 1, U >= 0, V >= 2");
    if (!frames.is_array() || frames.size() != static_cast<std::size_t>(x.T))
      throw ValidationError("loss case: logits must have T rows");
    x.logits.reserve(static_cast<std::size_t>(x.T) * (x.U + 1) * x.V);
    for (const auto& frame : frames) {
      if (!frame.is_array() || frame.size() != static_cast<std::size_t>(x.U + 1))
        throw ValidationError("loss case: logits[t] must have U+1 entries");
      for (const auto& node : frame) {
        if (!node.is_array() || node.size() != static_cast<std::size_t>(x.V))
          throw ValidationError("loss case: logits[t][u] must have V entries");
        for (const auto& z : node) x.logits.push_back(z.get<double>());
      }
    }
    if (auto it = obj.find("band"); it != obj.end() && !it->is_null()) {
      AlignmentBand band;
      band.token_frames = it->at("a").get<std::vector<int>>();
      band.left = it->value("b_l", 15);
      band.right = it->value("b_r", 15);
      c.band = std::move(band);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("loss case: ") + e.what());
  }
  x.Validate();
  if (c.band) {
    if (c.band->token_frames.size() != static_cast<std::size_t>(x.U))
      throw ValidationError("loss case: band needs one frame per target");
    if (c.band->left < 0 || c.band->right < 0)
      throw ValidationError("loss case: band buffers must be >= 0");
  }
  return c;
}

std::string WriteLossCase(const LossCase& c) {
  const RnntInstance& x = c.instance;
  nlohmann::ordered_json obj;
  obj["T"] = x.T;
  obj["U"] = x.U;
  obj["V"] = x.V;
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (int t = 0; t < x.T; ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int u = 0; u <= x.U; ++u) {
      nlohmann::ordered_json node = nlohmann::ordered_json::array();
      for (int v = 0; v < x.V; ++v) node.push_back(x.Logit(t, u, v));
      row.push_back(std::move(node));
    }
    frames.push_back(std::move(row));
  }
  obj["logits"] = std::move(frames);
  obj["targets"] = x.targets;
  if (c.band) {
    nlohmann::ordered_json band;
    band["a"] = c.band->token_frames;
    band["b_l"] = c.band->left;
    band["b_r"] = c.band->right;
    obj["band"] = std::move(band);
  }
  return obj.dump() + "\n";
}

}  // namespace asrkit::rnnt
