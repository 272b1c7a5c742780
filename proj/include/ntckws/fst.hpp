// ntckws/fst.hpp
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

#ifndef NTCKWS_FST_HPP_
#define NTCKWS_FST_HPP_

#include <deque>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ntckws/common.hpp"
#include "ntckws/semiring.hpp"
#include "ntckws/symbol_table.hpp"

namespace ntckws {

inline constexpr int kNoState = -1;

// Role of an arc inside a keyword grammar. Annotations are attached when
// grammars are built and survive composition and projection, so the decoder
// can tell keyword progress, background absorption and wildcard traversals
// apart on the compiled search space.
enum class ArcKind : uint8_t {
  kNone = 0,
  kKeyword = 1,     // advances the keyword (or transcript) chain
  kBackground = 2,  // background/filler absorption
  kSelfLoop = 3,    // wildcard self-loop (noise insertion)
  kBypass = 4,      // wildcard bypass (masked/substituted token)
};

inline const char* arc_kind_name(ArcKind k) {
  switch (k) {
    case ArcKind::kNone: return "none";
    case ArcKind::kKeyword: return "keyword";
    case ArcKind::kBackground: return "background";
    case ArcKind::kSelfLoop: return "self_loop";
    case ArcKind::kBypass: return "bypass";
  }
  return "none";
}

inline ArcKind arc_kind_from_name(const std::string& name) {
  if (name == "none") return ArcKind::kNone;
  if (name == "keyword") return ArcKind::kKeyword;
  if (name == "background") return ArcKind::kBackground;
  if (name == "self_loop") return ArcKind::kSelfLoop;
  if (name == "bypass") return ArcKind::kBypass;
  throw ValidationError(strcat("unknown arc kind: ", name));
}

struct Arc {
  int ilabel = kEpsilon;
  int olabel = kEpsilon;
  Weight weight = kLogOne;
  int next = kNoState;
  ArcKind kind = ArcKind::kNone;
  // True when this arc completed a grammar unit before projection to an
  // acceptor (i.e. its pre-projection output label was non-epsilon).
  bool emitting = false;
};

// Mutable during construction, then treated as immutable: every algorithm
// here takes `const WeightedFst&` and the engine never mutates a graph it
// shares across threads. Iteration order (state id, then arc insertion
// order) is the documented deterministic order for scores and tie-breaks.
class WeightedFst {
 public:
  int add_state() {
    arcs_.emplace_back();
    final_.push_back(kLogZero);
    return num_states() - 1;
  }

  int num_states() const { return static_cast<int>(arcs_.size()); }

  void set_start(int s) {
    check_state(s);
    start_ = s;
  }
  int start() const { return start_; }

  void add_arc(int src, Arc arc) {
    check_state(src);
    check_state(arc.next);
    if (arc.ilabel < 0 || arc.olabel < 0)
      throw ValidationError("negative labels are not allowed");
    arcs_[src].push_back(arc);
  }

  const std::vector<Arc>& arcs(int s) const {
    check_state(s);
    return arcs_[s];
  }

  std::vector<Arc>& mutable_arcs(int s) {
    check_state(s);
    return arcs_[s];
  }

  void set_final(int s, Weight w = kLogOne) {
    check_state(s);
    final_[s] = w;
  }
  Weight final_weight(int s) const {
    check_state(s);
    return final_[s];
  }
  bool is_final(int s) const { return final_weight(s) != kLogZero; }

  bool has_final_state() const {
    for (int s = 0; s < num_states(); ++s)
      if (is_final(s)) return true;
    return false;
  }

  int num_arcs() const {
    int n = 0;
    for (const auto& a : arcs_) n += static_cast<int>(a.size());
    return n;
  }

  bool is_acceptor() const {
    for (int s = 0; s < num_states(); ++s)
      for (const Arc& a : arcs_[s])
        if (a.ilabel != a.olabel) return false;
    return true;
  }

  // Optional symbol tables; used for alphabet checks and readable I/O.
  SymbolTablePtr input_symbols;
  SymbolTablePtr output_symbols;

  // ---- AT&T text format ----
  // Arc lines `src dst ilabel olabel weight`, final lines `state weight`.
  // The source of the first line is the start state.

  void write_att(std::ostream& os) const {
    if (start_ == kNoState) return;
    os << std::setprecision(17);
    auto write_state = [&](int s) {
      for (const Arc& a : arcs_[s])
        os << s << ' ' << a.next << ' ' << a.ilabel << ' ' << a.olabel << ' '
           << a.weight << '\n';
      if (is_final(s)) os << s << ' ' << final_[s] << '\n';
    };
    write_state(start_);
    for (int s = 0; s < num_states(); ++s)
      if (s != start_) write_state(s);
  }

  static WeightedFst read_att(std::istream& is) {
    WeightedFst fst;
    std::string line;
    int lineno = 0;
    auto ensure_state = [&fst](long s) {
      if (s < 0) throw ValidationError("negative state id in FST text");
      while (fst.num_states() <= s) fst.add_state();
      return static_cast<int>(s);
    };
    while (std::getline(is, line)) {
      ++lineno;
      std::istringstream ls(line);
      std::vector<std::string> fields;
      std::string f;
      while (ls >> f) fields.push_back(f);
      if (fields.empty()) continue;
      try {
        if (fields.size() == 5) {
          int src = ensure_state(std::stol(fields[0]));
          Arc a;
          a.next = ensure_state(std::stol(fields[1]));
          a.ilabel = static_cast<int>(std::stol(fields[2]));
          a.olabel = static_cast<int>(std::stol(fields[3]));
          a.weight = std::stod(fields[4]);
          if (fst.start_ == kNoState) fst.start_ = src;
          fst.add_arc(src, a);
        } else if (fields.size() == 2) {
          int s = ensure_state(std::stol(fields[0]));
          if (fst.start_ == kNoState) fst.start_ = s;
          fst.set_final(s, std::stod(fields[1]));
        } else if (fields.size() == 1) {
          int s = ensure_state(std::stol(fields[0]));
          if (fst.start_ == kNoState) fst.start_ = s;
          fst.set_final(s, kLogOne);
        } else {
          throw ValidationError("expected 1, 2 or 5 fields");
        }
      } catch (const std::invalid_argument&) {
        throw ValidationError(strcat("bad FST text at line ", lineno, ": ", line));
      }
    }
    return fst;
  }

 private:
  void check_state(int s) const {
    if (s < 0 || s >= num_states())
      throw ValidationError(strcat("state id out of range: ", s, " (have ",
                                   num_states(), " states)"));
  }

  int start_ = kNoState;
  std::vector<std::vector<Arc>> arcs_;
  std::vector<Weight> final_;
};

// Removes states that are not both reachable from the start and able to
// reach a final state. Surviving states keep their relative order.
inline WeightedFst connect(const WeightedFst& fst) {
  int n = fst.num_states();
  WeightedFst out;
  out.input_symbols = fst.input_symbols;
  out.output_symbols = fst.output_symbols;
  if (fst.start() == kNoState || n == 0) return out;

  std::vector<bool> fwd(n, false);
  std::deque<int> queue{fst.start()};
  fwd[fst.start()] = true;
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    for (const Arc& a : fst.arcs(s))
      if (!fwd[a.next]) {
        fwd[a.next] = true;
        queue.push_back(a.next);
      }
  }

  // Backward reachability over reversed arcs.
  std::vector<std::vector<int>> rev(n);
  for (int s = 0; s < n; ++s)
    for (const Arc& a : fst.arcs(s)) rev[a.next].push_back(s);
  std::vector<bool> bwd(n, false);
  for (int s = 0; s < n; ++s)
    if (fst.is_final(s) && fwd[s]) {
      bwd[s] = true;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    for (int p : rev[s])
      if (fwd[p] && !bwd[p]) {
        bwd[p] = true;
        queue.push_back(p);
      }
  }

  std::vector<int> remap(n, kNoState);
  for (int s = 0; s < n; ++s)
    if (fwd[s] && bwd[s]) remap[s] = out.add_state();
  if (remap[fst.start()] == kNoState) return WeightedFst{};
  out.set_start(remap[fst.start()]);
  for (int s = 0; s < n; ++s) {
    if (remap[s] == kNoState) continue;
    for (const Arc& a : fst.arcs(s)) {
      if (remap[a.next] == kNoState) continue;
      Arc b = a;
      b.next = remap[a.next];
      out.add_arc(remap[s], b);
    }
    if (fst.is_final(s)) out.set_final(remap[s], fst.final_weight(s));
  }
  return out;
}

// Copies the FST as an acceptor over its input labels. `emitting` is set on
// arcs whose output label was non-epsilon before projection.
inline WeightedFst project_input(const WeightedFst& fst) {
  WeightedFst out;
  out.input_symbols = fst.input_symbols;
  out.output_symbols = fst.input_symbols;
  for (int s = 0; s < fst.num_states(); ++s) out.add_state();
  if (fst.start() != kNoState) out.set_start(fst.start());
  for (int s = 0; s < fst.num_states(); ++s) {
    for (const Arc& a : fst.arcs(s)) {
      Arc b = a;
      b.emitting = (a.olabel != kEpsilon);
      b.olabel = b.ilabel;
      out.add_arc(s, b);
    }
    if (fst.is_final(s)) out.set_final(s, fst.final_weight(s));
  }
  return out;
}

}  // namespace ntckws

#endif  // NTCKWS_FST_HPP_
