// ntckws/compose.hpp
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

#ifndef NTCKWS_COMPOSE_HPP_
#define NTCKWS_COMPOSE_HPP_

#include <deque>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ntckws/fst.hpp"

namespace ntckws {

namespace detail {

// Wildcard/background annotations ride on grammar arcs; when two arcs pair
// up the grammar side (b) wins, otherwise whichever side has one.
inline ArcKind combine_kinds(ArcKind a, ArcKind b) {
  return b != ArcKind::kNone ? b : a;
}

}  // namespace detail

// Composition with the three-state epsilon-sequencing filter.
//
// Between two matched moves, a path may advance `a` along output-epsilon
// arcs and `b` along input-epsilon arcs. Every interleaving of those moves
// reaches the same state pair, so an unfiltered product counts the pair
// path (and its weight) once per interleaving and inflates forward scores.
// The filter admits exactly one canonical order: all a-side epsilon moves,
// then all b-side epsilon moves.
//
//   filter 0: last move was a match (or path start)
//   filter 1: inside an a-epsilon block
//   filter 2: inside a b-epsilon block (a-epsilon moves are blocked)
//
// Requires a's output alphabet to be contained in b's input alphabet: the
// check uses b's input symbol table when attached, otherwise the set of
// labels on b's arcs.
inline WeightedFst compose(const WeightedFst& a, const WeightedFst& b) {
  // Alphabet precondition.
  std::unordered_set<int> b_ilabels;
  if (!b.input_symbols) {
    for (int s = 0; s < b.num_states(); ++s)
      for (const Arc& arc : b.arcs(s)) b_ilabels.insert(arc.ilabel);
  }
  for (int s = 0; s < a.num_states(); ++s) {
    for (const Arc& arc : a.arcs(s)) {
      if (arc.olabel == kEpsilon) continue;
      bool known = b.input_symbols ? b.input_symbols->contains(arc.olabel)
                                   : b_ilabels.count(arc.olabel) > 0;
      if (!known) {
        std::string name = a.output_symbols && a.output_symbols->contains(arc.olabel)
                               ? a.output_symbols->name(arc.olabel)
                               : std::to_string(arc.olabel);
        throw ValidationError(
            strcat("compose: output label '", name,
                   "' of the left FST is not in the right FST's input alphabet"));
      }
    }
  }

  WeightedFst out;
  out.input_symbols = a.input_symbols;
  out.output_symbols = b.output_symbols;
  if (a.start() == kNoState || b.start() == kNoState) return out;

  auto key = [&b](int qa, int qb, int f) {
    return (static_cast<int64_t>(qa) * b.num_states() + qb) * 3 + f;
  };
  std::unordered_map<int64_t, int> state_of;
  std::deque<std::tuple<int, int, int>> queue;

  auto state_for = [&](int qa, int qb, int f) {
    int64_t k = key(qa, qb, f);
    auto it = state_of.find(k);
    if (it != state_of.end()) return it->second;
    int id = out.add_state();
    state_of.emplace(k, id);
    queue.emplace_back(qa, qb, f);
    return id;
  };

  out.set_start(state_for(a.start(), b.start(), 0));

  while (!queue.empty()) {
    auto [qa, qb, f] = queue.front();
    queue.pop_front();
    int src = state_of[key(qa, qb, f)];

    // Matched moves: any filter state -> 0.
    for (const Arc& aa : a.arcs(qa)) {
      if (aa.olabel == kEpsilon) continue;
      for (const Arc& ba : b.arcs(qb)) {
        if (ba.ilabel != aa.olabel) continue;
        Arc arc;
        arc.ilabel = aa.ilabel;
        arc.olabel = ba.olabel;
        arc.weight = times(aa.weight, ba.weight);
        arc.kind = detail::combine_kinds(aa.kind, ba.kind);
        arc.next = state_for(aa.next, ba.next, 0);
        out.add_arc(src, arc);
      }
    }
    // a moves alone on an output-epsilon arc: allowed from filter 0 and 1.
    if (f == 0 || f == 1) {
      for (const Arc& aa : a.arcs(qa)) {
        if (aa.olabel != kEpsilon) continue;
        Arc arc;
        arc.ilabel = aa.ilabel;
        arc.olabel = kEpsilon;
        arc.weight = aa.weight;
        arc.kind = aa.kind;
        arc.next = state_for(aa.next, qb, 1);
        out.add_arc(src, arc);
      }
    }
    // b moves alone on an input-epsilon arc: allowed from any filter state.
    for (const Arc& ba : b.arcs(qb)) {
      if (ba.ilabel != kEpsilon) continue;
      Arc arc;
      arc.ilabel = kEpsilon;
      arc.olabel = ba.olabel;
      arc.weight = ba.weight;
      arc.kind = ba.kind;
      arc.next = state_for(qa, ba.next, 2);
      out.add_arc(src, arc);
    }

    Weight fin = times(a.final_weight(qa), b.final_weight(qb));
    if (fin != kLogZero) out.set_final(src, fin);
  }

  return connect(out);
}

}  // namespace ntckws

#endif  // NTCKWS_COMPOSE_HPP_
