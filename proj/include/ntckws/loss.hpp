// ntckws/loss.hpp
//
// Copyright 2026 The ntckws Authors
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

#ifndef NTCKWS_LOSS_HPP_
#define NTCKWS_LOSS_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntckws/graph.hpp"
#include "ntckws/lattice.hpp"
#include "ntckws/posteriorgram.hpp"

namespace ntckws {

// Exponentially decaying wildcard arc penalties. The schedule is pure:
// the epoch is always an explicit argument, never hidden state.
struct PenaltySchedule {
  double lambda0_self_loop = -4.0;
  double beta_self_loop = 0.999;
  double lambda0_bypass = -4.0;
  double beta_bypass = 0.975;

  void validate() const {
    if (beta_self_loop <= 0.0 || beta_self_loop > 1.0 || beta_bypass <= 0.0 ||
        beta_bypass > 1.0)
      throw ValidationError("penalty decay must lie in (0, 1]");
    if (lambda0_self_loop > 0.0 || lambda0_bypass > 0.0)
      throw ValidationError("initial wildcard penalties must be <= 0");
  }
};

// lambda^(l) = lambda^(0) * beta^l for each arc type.
inline std::pair<double, double> penalty_at_epoch(const PenaltySchedule& s, int epoch) {
  if (epoch < 0) throw ValidationError("epoch must be >= 0");
  return {s.lambda0_self_loop * std::pow(s.beta_self_loop, epoch),
          s.lambda0_bypass * std::pow(s.beta_bypass, epoch)};
}

struct LossOptions {
  bool gradient = false;
  bool occupancy = false;
};

struct LossResult {
  // -log P(y|x); +inf with feasible=false when the transcript has no legal
  // alignment at this frame count (callers typically skip such samples).
  double loss = std::numeric_limits<double>::infinity();
  bool feasible = false;
  // d loss / d log-posterior, over the input posteriorgram's columns,
  // row-major frames x tokens. Empty unless requested and feasible.
  std::vector<double> gradient;
  int frames = 0;
  int tokens = 0;
  // Per-frame emission occupancies over the lattice posteriorgram's
  // columns (the augmented matrix for the NTC criterion).
  std::vector<double> occupancy;
  int occ_tokens = 0;
};

// Caches the token and lexicon transducers for repeated loss evaluations.
struct LossContext {
  explicit LossContext(Lexicon lexicon)
      : lex(std::move(lexicon)),
        token_fst(build_token_fst(lex.vocab())),
        lexicon_fst(build_lexicon_fst(lex)) {}

  const Vocabulary& vocab() const { return lex.vocab(); }

  Lexicon lex;
  WeightedFst token_fst;
  WeightedFst lexicon_fst;
};

namespace detail {

inline LossResult loss_on_grammar(const Posteriorgram& input,
                                  const Posteriorgram& emissions,
                                  const LossContext& ctx, const WeightedFst& grammar,
                                  const LossOptions& opts) {
  SearchSpace space =
      compile_search_space(ctx.token_fst, ctx.lexicon_fst, grammar);
  Lattice lat = intersect_dense(space.graph, emissions);
  Weight fwd = forward_score(lat);

  LossResult res;
  res.frames = input.frames();
  res.tokens = input.tokens();
  if (fwd == kLogZero) return res;
  res.loss = -fwd;
  res.feasible = true;
  if (!opts.gradient && !opts.occupancy) return res;

  // Column of each graph label in the emission matrix.
  std::vector<int> cols = resolve_columns(space.graph, emissions);
  std::vector<double> occ(static_cast<size_t>(emissions.frames()) * emissions.tokens(),
                          0.0);
  for (const ArcPosterior& ap : arc_posteriors(lat))
    occ[static_cast<size_t>(ap.frame) * emissions.tokens() + cols[ap.token]] +=
        ap.occupancy;

  if (opts.occupancy) {
    res.occupancy = occ;
    res.occ_tokens = emissions.tokens();
  }
  if (opts.gradient) {
    // d loss / d log p(v at t) = -occupancy(t, v). When the wildcard
    // columns were synthesized from the input, their occupancy chains back
    // through the linear-domain mean: each real token receives the
    // wildcard occupancy scaled by its share of the mean.
    const int vin = input.tokens();
    res.gradient.assign(static_cast<size_t>(input.frames()) * vin, 0.0);
    bool synthesized = emissions.tokens() > vin;
    int wc_a = synthesized ? emissions.col_of(kSelfLoopSymbol) : -1;
    int wc_b = synthesized ? emissions.col_of(kBypassSymbol) : -1;
    std::vector<int> real_cols;
    if (synthesized)
      for (int id : ctx.vocab().real_tokens())
        real_cols.push_back(input.col_of(ctx.vocab().table().name(id)));
    for (int t = 0; t < input.frames(); ++t) {
      for (int j = 0; j < vin; ++j)
        res.gradient[static_cast<size_t>(t) * vin + j] -=
            occ[static_cast<size_t>(t) * emissions.tokens() + j];
      if (synthesized) {
        double wocc = occ[static_cast<size_t>(t) * emissions.tokens() + wc_a] +
                      occ[static_cast<size_t>(t) * emissions.tokens() + wc_b];
        if (wocc == 0.0) continue;
        double sum = 0.0;
        for (int c : real_cols) sum += input.prob(t, c);
        if (sum <= 0.0) continue;
        for (int c : real_cols)
          res.gradient[static_cast<size_t>(t) * vin + c] -=
              wocc * input.prob(t, c) / sum;
      }
    }
  }
  return res;
}

}  // namespace detail

// loss = -Forward(emissions intersected with T o L o linear(y)).
inline LossResult ctc_loss(const Posteriorgram& p, const std::vector<std::string>& y,
                           const LossContext& ctx, const LossOptions& opts = {}) {
  WeightedFst g = build_linear_grammar(ctx.lex, y);
  return detail::loss_on_grammar(p, p, ctx, g, opts);
}

// The noise-aware criterion: the linear grammar gains scheduled wildcard
// arcs and the emissions gain wildcard columns (added here when absent).
// With both penalties at -inf this reduces to ctc_loss exactly.
inline LossResult ntc_loss(const Posteriorgram& p, const std::vector<std::string>& y,
                           const LossContext& ctx, const PenaltySchedule& schedule,
                           int epoch, const LossOptions& opts = {},
                           const WildcardOptions& wopts = {}) {
  schedule.validate();
  auto [lambda_sl, lambda_bp] = penalty_at_epoch(schedule, epoch);
  WeightedFst g = add_wildcard_arcs(build_linear_grammar(ctx.lex, y), lambda_sl,
                                    lambda_bp, wopts);
  if (p.has_wildcards()) return detail::loss_on_grammar(p, p, ctx, g, opts);
  Posteriorgram aug = augment_wildcards(p, ctx.vocab());
  return detail::loss_on_grammar(p, aug, ctx, g, opts);
}

struct GradientConfig {
  bool ntc = false;
  PenaltySchedule schedule;
  int epoch = 0;
};

// Convenience wrapper: the gradient of the selected criterion, or an error
// when the loss is infinite (no legal alignment, nothing to differentiate).
inline LossResult loss_gradient(const Posteriorgram& p,
                                const std::vector<std::string>& y,
                                const LossContext& ctx, const GradientConfig& cfg) {
  LossOptions opts;
  opts.gradient = true;
  LossResult res = cfg.ntc ? ntc_loss(p, y, ctx, cfg.schedule, cfg.epoch, opts)
                           : ctc_loss(p, y, ctx, opts);
  if (!res.feasible)
    throw ValidationError("loss is infinite; gradient undefined");
  return res;
}

}  // namespace ntckws

#endif  // NTCKWS_LOSS_HPP_
