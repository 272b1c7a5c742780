// ntckws/lattice.hpp
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

#ifndef NTCKWS_LATTICE_HPP_
#define NTCKWS_LATTICE_HPP_

#include <algorithm>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ntckws/fst.hpp"
#include "ntckws/posteriorgram.hpp"

namespace ntckws {

struct LatticeArc {
  int token = kEpsilon;  // graph input label; epsilon consumes no frame
  int frame = -1;        // level the arc leaves from
  Weight weight = kLogOne;
  int next = kNoState;
  ArcKind kind = ArcKind::kNone;
  bool emitting = false;
};

// A graph unrolled over frames. States are created in topological order
// (level by level, epsilon chains within a level in dependency order), so
// a single forward pass over state ids is a valid DP schedule. Every path
// from the start to a final state consumes exactly `frames` frames.
class Lattice {
 public:
  int add_state() {
    arcs_.emplace_back();
    final_.push_back(kLogZero);
    return num_states() - 1;
  }
  int num_states() const { return static_cast<int>(arcs_.size()); }

  void add_arc(int src, LatticeArc arc) { arcs_[src].push_back(arc); }
  const std::vector<LatticeArc>& arcs(int s) const { return arcs_[s]; }

  void set_final(int s, Weight w) { final_[s] = w; }
  Weight final_weight(int s) const { return final_[s]; }
  bool is_final(int s) const { return final_[s] != kLogZero; }

  int start() const { return start_; }
  void set_start(int s) { start_ = s; }

  int frames() const { return frames_; }
  void set_frames(int t) { frames_ = t; }

 private:
  int start_ = kNoState;
  int frames_ = 0;
  std::vector<std::vector<LatticeArc>> arcs_;
  std::vector<Weight> final_;
};

namespace detail {

// Maps every non-epsilon input label of `graph` to its posteriorgram
// column. Resolution goes through the graph's input symbol table when one
// is attached, otherwise label id l maps to column l-1.
inline std::vector<int> resolve_columns(const WeightedFst& graph,
                                        const Posteriorgram& post) {
  int max_label = 0;
  for (int s = 0; s < graph.num_states(); ++s)
    for (const Arc& a : graph.arcs(s)) max_label = std::max(max_label, a.ilabel);
  std::vector<int> cols(max_label + 1, -1);
  for (int s = 0; s < graph.num_states(); ++s) {
    for (const Arc& a : graph.arcs(s)) {
      if (a.ilabel == kEpsilon || cols[a.ilabel] != -1) continue;
      int col;
      if (graph.input_symbols) {
        col = post.col_of(graph.input_symbols->name(a.ilabel));
        if (col == -1)
          throw ValidationError(strcat("posteriorgram has no column for label '",
                                       graph.input_symbols->name(a.ilabel), "'"));
      } else {
        col = a.ilabel - 1;
        if (col >= post.tokens())
          throw ValidationError(
              strcat("posteriorgram has no column for label ", a.ilabel));
      }
      cols[a.ilabel] = col;
    }
  }
  return cols;
}

}  // namespace detail

// Intersects a token-level graph with dense per-frame emissions: each
// frame-t arc weighs graph-weight (+) log P(token | frame t); epsilon graph
// arcs are unrolled within a level and consume no frame. Dead-end states
// are kept (they cannot contribute to any score).
inline Lattice intersect_dense(const WeightedFst& graph, const Posteriorgram& post) {
  if (graph.start() == kNoState)
    throw ValidationError("intersect_dense: graph has no start state");
  if (post.frames() < 1) throw ValidationError("intersect_dense: empty posteriorgram");
  std::vector<int> cols = detail::resolve_columns(graph, post);

  const int T = post.frames();
  Lattice lat;
  lat.set_frames(T);

  struct Pending {
    int src_lattice;  // lattice state the arc leaves
    LatticeArc arc;   // next filled in once the target level exists
    int target_gstate;
  };

  // Expands one level: epsilon-closes the seed graph states, orders the
  // members so every intra-level epsilon arc goes forward, then creates
  // lattice states in that order. Returns gstate -> lattice id.
  auto build_level = [&](int t, const std::vector<int>& seeds) {
    std::vector<int> members;
    std::unordered_map<int, int> member_index;
    std::deque<int> queue;
    for (int g : seeds)
      if (!member_index.count(g)) {
        member_index.emplace(g, static_cast<int>(members.size()));
        members.push_back(g);
        queue.push_back(g);
      }
    while (!queue.empty()) {
      int g = queue.front();
      queue.pop_front();
      for (const Arc& a : graph.arcs(g)) {
        if (a.ilabel != kEpsilon) continue;
        if (!member_index.count(a.next)) {
          member_index.emplace(a.next, static_cast<int>(members.size()));
          members.push_back(a.next);
          queue.push_back(a.next);
        }
      }
    }
    // Kahn's algorithm over the intra-level epsilon edges; a leftover
    // member means an epsilon cycle, which would make the path set infinite.
    std::vector<int> indegree(members.size(), 0);
    for (int g : members)
      for (const Arc& a : graph.arcs(g))
        if (a.ilabel == kEpsilon) indegree[member_index[a.next]]++;
    std::vector<int> order;
    std::deque<int> ready;
    for (size_t i = 0; i < members.size(); ++i)
      if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
    while (!ready.empty()) {
      int i = ready.front();
      ready.pop_front();
      order.push_back(i);
      for (const Arc& a : graph.arcs(members[i])) {
        if (a.ilabel != kEpsilon) continue;
        int j = member_index[a.next];
        if (--indegree[j] == 0) ready.push_back(j);
      }
    }
    if (order.size() != members.size())
      throw ValidationError("intersect_dense: epsilon cycle in graph");

    std::unordered_map<int, int> lattice_id;
    for (int i : order) lattice_id.emplace(members[i], lat.add_state());
    // Intra-level epsilon arcs.
    for (int i : order) {
      int g = members[i];
      for (const Arc& a : graph.arcs(g)) {
        if (a.ilabel != kEpsilon) continue;
        LatticeArc la;
        la.token = kEpsilon;
        la.frame = t;
        la.weight = a.weight;
        la.kind = a.kind;
        la.emitting = a.emitting;
        la.next = lattice_id[a.next];
        lat.add_arc(lattice_id[g], la);
      }
    }
    return lattice_id;
  };

  std::unordered_map<int, int> level = build_level(0, {graph.start()});
  lat.set_start(level[graph.start()]);

  for (int t = 0; t < T; ++t) {
    // Frame-consuming arcs out of the current level, in lattice-id order.
    std::vector<std::pair<int, int>> by_id;  // (lattice id, gstate)
    by_id.reserve(level.size());
    for (const auto& [g, id] : level) by_id.emplace_back(id, g);
    std::sort(by_id.begin(), by_id.end());

    std::vector<Pending> pending;
    std::vector<int> seeds;
    for (const auto& [id, g] : by_id) {
      for (const Arc& a : graph.arcs(g)) {
        if (a.ilabel == kEpsilon) continue;
        Pending p;
        p.src_lattice = id;
        p.arc.token = a.ilabel;
        p.arc.frame = t;
        p.arc.weight = times(a.weight, post.log_prob(t, cols[a.ilabel]));
        p.arc.kind = a.kind;
        p.arc.emitting = a.emitting;
        p.target_gstate = a.next;
        pending.push_back(p);
        seeds.push_back(a.next);
      }
    }
    level = build_level(t + 1, seeds);
    for (auto& p : pending) {
      p.arc.next = level[p.target_gstate];
      lat.add_arc(p.src_lattice, p.arc);
    }
  }

  for (const auto& [g, id] : level)
    if (graph.is_final(g)) lat.set_final(id, graph.final_weight(g));
  return lat;
}

// Log-semiring sum over all complete paths. Summation order is fixed
// (state id, then arc insertion order), so results are reproducible.
// Returns -inf when no complete path exists.
inline Weight forward_score(const Lattice& lat) {
  if (lat.start() == kNoState) return kLogZero;
  std::vector<Weight> alpha(lat.num_states(), kLogZero);
  alpha[lat.start()] = kLogOne;
  for (int s = 0; s < lat.num_states(); ++s) {
    if (alpha[s] == kLogZero) continue;
    for (const LatticeArc& a : lat.arcs(s))
      alpha[a.next] = log_add(alpha[a.next], times(alpha[s], a.weight));
  }
  Weight total = kLogZero;
  for (int s = 0; s < lat.num_states(); ++s)
    if (lat.is_final(s)) total = log_add(total, times(alpha[s], lat.final_weight(s)));
  return total;
}

struct ViterbiResult {
  std::vector<int> alignment;  // token per frame
  Weight score = kLogZero;
};

// Tropical best path. Ties are broken by keeping the earliest candidate in
// (state id, arc insertion order), and the lowest-id final state.
inline std::optional<ViterbiResult> viterbi_best_path(const Lattice& lat) {
  if (lat.start() == kNoState) return std::nullopt;
  const int n = lat.num_states();
  std::vector<Weight> best(n, kLogZero);
  std::vector<std::pair<int, int>> back(n, {kNoState, -1});  // (prev state, arc idx)
  best[lat.start()] = kLogOne;
  for (int s = 0; s < n; ++s) {
    if (best[s] == kLogZero) continue;
    const auto& arcs = lat.arcs(s);
    for (int i = 0; i < static_cast<int>(arcs.size()); ++i) {
      Weight cand = times(best[s], arcs[i].weight);
      if (cand > best[arcs[i].next]) {
        best[arcs[i].next] = cand;
        back[arcs[i].next] = {s, i};
      }
    }
  }
  int best_final = kNoState;
  Weight best_score = kLogZero;
  for (int s = 0; s < n; ++s) {
    if (!lat.is_final(s) || best[s] == kLogZero) continue;
    Weight cand = times(best[s], lat.final_weight(s));
    if (cand > best_score) {
      best_score = cand;
      best_final = s;
    }
  }
  if (best_final == kNoState) return std::nullopt;

  ViterbiResult res;
  res.score = best_score;
  for (int s = best_final; s != lat.start();) {
    auto [prev, idx] = back[s];
    const LatticeArc& a = lat.arcs(prev)[idx];
    if (a.token != kEpsilon) res.alignment.push_back(a.token);
    s = prev;
  }
  std::reverse(res.alignment.begin(), res.alignment.end());
  return res;
}

// Per-arc occupancy restricted to frame-consuming arcs: the posterior
// probability, under the log-semiring path distribution, of passing
// through each (frame, token) arc. Empty when the lattice has no path.
struct ArcPosterior {
  int frame;
  int token;
  ArcKind kind;
  double occupancy;
};

inline std::vector<ArcPosterior> arc_posteriors(const Lattice& lat) {
  std::vector<ArcPosterior> out;
  if (lat.start() == kNoState) return out;
  const int n = lat.num_states();
  std::vector<Weight> alpha(n, kLogZero), beta(n, kLogZero);
  alpha[lat.start()] = kLogOne;
  for (int s = 0; s < n; ++s) {
    if (alpha[s] == kLogZero) continue;
    for (const LatticeArc& a : lat.arcs(s))
      alpha[a.next] = log_add(alpha[a.next], times(alpha[s], a.weight));
  }
  Weight total = kLogZero;
  for (int s = 0; s < n; ++s)
    if (lat.is_final(s)) total = log_add(total, times(alpha[s], lat.final_weight(s)));
  if (total == kLogZero) return out;

  for (int s = n - 1; s >= 0; --s) {
    beta[s] = lat.final_weight(s);
    for (const LatticeArc& a : lat.arcs(s))
      beta[s] = log_add(beta[s], times(a.weight, beta[a.next]));
  }
  for (int s = 0; s < n; ++s) {
    if (alpha[s] == kLogZero) continue;
    for (const LatticeArc& a : lat.arcs(s)) {
      if (a.token == kEpsilon) continue;
      Weight w = times(times(alpha[s], a.weight), beta[a.next]);
      if (w == kLogZero) continue;
      out.push_back({a.frame, a.token, a.kind, std::exp(w - total)});
    }
  }
  return out;
}

}  // namespace ntckws

#endif  // NTCKWS_LATTICE_HPP_
