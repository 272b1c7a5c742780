// ntckws/graph.hpp
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

#ifndef NTCKWS_GRAPH_HPP_
#define NTCKWS_GRAPH_HPP_

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ntckws/compose.hpp"
#include "ntckws/fst.hpp"
#include "ntckws/vocab.hpp"

#include "json.hpp"

namespace ntckws {

// Token-level transducer implementing the collapse map: blanks emit
// nothing, repeated tokens without an intervening blank emit once. State 0
// is the blank context; state for token a means "last consumed a, no blank
// since". Every state is final. Wildcard tokens, when present, are ordinary
// non-blank tokens here.
inline WeightedFst build_token_fst(const Vocabulary& vocab) {
  WeightedFst t;
  t.input_symbols = vocab.table_ptr();
  t.output_symbols = vocab.table_ptr();

  std::vector<int> tokens;  // non-blank tokens in id order
  for (int id = 1; id < vocab.table().size(); ++id)
    if (id != vocab.blank()) tokens.push_back(id);

  int start = t.add_state();
  t.set_start(start);
  t.set_final(start, kLogOne);
  std::vector<int> state_of(vocab.table().size(), kNoState);
  for (int id : tokens) {
    state_of[id] = t.add_state();
    t.set_final(state_of[id], kLogOne);
  }

  t.add_arc(start, {vocab.blank(), kEpsilon, kLogOne, start});
  for (int id : tokens) t.add_arc(start, {id, id, kLogOne, state_of[id]});
  for (int id : tokens) {
    int s = state_of[id];
    t.add_arc(s, {id, kEpsilon, kLogOne, s});           // repeat, merged
    t.add_arc(s, {vocab.blank(), kEpsilon, kLogOne, start});
    for (int other : tokens)
      if (other != id) t.add_arc(s, {other, other, kLogOne, state_of[other]});
  }
  return t;
}

// Lexicon transducer: closure over one branch per entry, token sequence in,
// word out on the entry's last arc. Wildcard tokens pass through as their
// own word symbols so grammars can spell wildcard arcs.
inline WeightedFst build_lexicon_fst(const Lexicon& lex) {
  if (lex.entries().empty()) throw ValidationError("lexicon is empty");
  WeightedFst l;
  l.input_symbols = lex.vocab().table_ptr();
  l.output_symbols = lex.word_symbols();

  int root = l.add_state();
  l.set_start(root);
  l.set_final(root, kLogOne);
  for (const auto& e : lex.entries()) {
    int word = lex.word_id(e.word);
    int cur = root;
    for (size_t i = 0; i < e.phonemes.size(); ++i) {
      bool last = (i + 1 == e.phonemes.size());
      int next = last ? root : l.add_state();
      l.add_arc(cur, {e.phonemes[i], last ? word : kEpsilon, kLogOne, next});
      cur = next;
    }
  }
  if (lex.vocab().has_wildcards()) {
    l.add_arc(root, {lex.vocab().self_loop(), lex.self_loop_word(), kLogOne, root});
    l.add_arc(root, {lex.vocab().bypass(), lex.bypass_word(), kLogOne, root});
  }
  return l;
}

// Chain grammar accepting exactly the given word sequence.
inline WeightedFst build_linear_grammar(const Lexicon& lex,
                                        const std::vector<std::string>& words) {
  if (words.empty()) throw ValidationError("empty transcript");
  WeightedFst g;
  g.input_symbols = lex.word_symbols();
  g.output_symbols = lex.word_symbols();
  int cur = g.add_state();
  g.set_start(cur);
  for (const auto& w : words) {
    int id = lex.word_id(w);
    if (id == -1 || !lex.find(w))
      throw ValidationError(strcat("word not in lexicon: ", w));
    int next = g.add_state();
    g.add_arc(cur, {id, id, kLogOne, next, ArcKind::kKeyword});
    cur = next;
  }
  g.set_final(cur, kLogOne);
  return g;
}

struct GrammarOptions {
  bool background_path = false;
  // Weight of each background absorption arc.
  double background_weight = 0.0;
  // Added to arcs that enter the keyword chain.
  double keyword_entry_bonus = 0.0;
};

// Keyword grammar: the keyword chain plus, optionally, one background state
// absorbing any lexicon word so decoding can idle on non-keyword speech.
// The background state re-enters the keyword and re-absorbs after it, which
// lets a stream fire on every occurrence.
inline WeightedFst build_kws_grammar(const Lexicon& lex,
                                     const std::vector<std::string>& keyword_words,
                                     const GrammarOptions& opts = {}) {
  if (keyword_words.empty()) throw ValidationError("empty keyword");
  std::vector<int> word_ids;
  for (const auto& w : keyword_words) {
    int id = lex.word_id(w);
    if (id == -1 || !lex.find(w))
      throw ValidationError(strcat("keyword word not in lexicon: ", w));
    word_ids.push_back(id);
  }

  WeightedFst g;
  g.input_symbols = lex.word_symbols();
  g.output_symbols = lex.word_symbols();
  int start = g.add_state();
  g.set_start(start);
  std::vector<int> chain{start};
  for (size_t i = 0; i < word_ids.size(); ++i) {
    int next = g.add_state();
    double w = (i == 0) ? opts.keyword_entry_bonus : 0.0;
    g.add_arc(chain.back(), {word_ids[i], word_ids[i], w, next, ArcKind::kKeyword});
    chain.push_back(next);
  }
  g.set_final(chain.back(), kLogOne);

  if (opts.background_path) {
    int bg = g.add_state();
    g.set_final(bg, kLogOne);
    std::vector<int> absorb;  // real words only, not wildcard passthroughs
    for (const auto& e : lex.entries()) {
      int id = lex.word_id(e.word);
      if (std::find(absorb.begin(), absorb.end(), id) == absorb.end())
        absorb.push_back(id);
    }
    for (int id : absorb)
      g.add_arc(start, {id, id, opts.background_weight, bg, ArcKind::kBackground});
    for (int id : absorb)
      g.add_arc(bg, {id, id, opts.background_weight, bg, ArcKind::kBackground});
    // Keyword re-entry from background.
    g.add_arc(bg, {word_ids[0], word_ids[0], opts.keyword_entry_bonus, chain[1],
                   ArcKind::kKeyword});
    // Post-keyword absorption.
    for (int id : absorb)
      g.add_arc(chain.back(),
                {id, id, opts.background_weight, bg, ArcKind::kBackground});
  }
  return g;
}

struct WildcardOptions {
  // Also place self-loops at the chain's first and last states. Off by
  // default: boundary insertions are background speech, not keyword noise.
  bool boundary_self_loops = false;
};

// Adds the two wildcard arc families to a grammar with a linear keyword
// core: a self-loop at every state between adjacent keyword words, and one
// bypass arc parallel to each keyword word arc. Existing arcs are neither
// removed nor reweighted. Consecutive bypasses may chain; the decoder's
// discard rule rejects paths that end up all-wildcard.
inline WeightedFst add_wildcard_arcs(const WeightedFst& g, double lambda_self_loop,
                                     double lambda_bypass,
                                     const WildcardOptions& opts = {}) {
  if (!g.input_symbols)
    throw ValidationError("grammar has no symbol table; cannot name wildcard arcs");
  int sl = g.input_symbols->find(kSelfLoopSymbol);
  int bp = g.input_symbols->find(kBypassSymbol);
  if (sl == -1 || bp == -1)
    throw ValidationError(
        "grammar symbol table lacks wildcard symbols; "
        "build the lexicon over a wildcard vocabulary");

  // Walk the linear keyword core.
  if (g.start() == kNoState) throw ValidationError("grammar has no start state");
  std::vector<int> chain{g.start()};
  std::vector<std::pair<int, const Arc*>> chain_arcs;  // (src, arc)
  int cur = g.start();
  while (true) {
    const Arc* kw = nullptr;
    for (const Arc& a : g.arcs(cur)) {
      if (a.kind != ArcKind::kKeyword) continue;
      if (kw) throw ValidationError("grammar keyword core is not linear");
      kw = &a;
    }
    if (!kw) break;
    for (int s : chain)
      if (s == kw->next) throw ValidationError("grammar keyword core has a cycle");
    chain_arcs.emplace_back(cur, kw);
    chain.push_back(kw->next);
    cur = kw->next;
  }
  if (chain_arcs.empty())
    throw ValidationError("grammar lacks a linear keyword core");

  WeightedFst out = g;
  size_t lo = opts.boundary_self_loops ? 0 : 1;
  size_t hi = opts.boundary_self_loops ? chain.size() : chain.size() - 1;
  for (size_t i = lo; i < hi; ++i)
    out.add_arc(chain[i], {sl, sl, lambda_self_loop, chain[i], ArcKind::kSelfLoop});
  // One bypass parallel to every keyword word arc, background re-entry
  // arcs included, so a masked first token stays recoverable mid-stream.
  std::vector<std::pair<int, int>> bypass_sites;  // (src, dst)
  for (int s = 0; s < g.num_states(); ++s)
    for (const Arc& a : g.arcs(s))
      if (a.kind == ArcKind::kKeyword) bypass_sites.emplace_back(s, a.next);
  for (const auto& [src, dst] : bypass_sites)
    out.add_arc(src, {bp, bp, lambda_bypass, dst, ArcKind::kBypass});
  return out;
}

// Compiled token-level search space with decoding metadata.
struct SearchSpace {
  WeightedFst graph;               // acceptor over token ids
  std::vector<int> keyword_tokens; // sorted unique token ids of the keyword
  std::string keyword;             // display name for detections

  bool has_wildcard_arcs() const {
    for (int s = 0; s < graph.num_states(); ++s)
      for (const Arc& a : graph.arcs(s))
        if (a.kind == ArcKind::kSelfLoop || a.kind == ArcKind::kBypass) return true;
    return false;
  }
};

// S = project_input(T o L o G). Wildcard annotations flow through the
// composition; any arc whose token is @ or * is additionally stamped, so
// every wildcard-labelled arc in S carries its annotation.
inline SearchSpace compile_search_space(const WeightedFst& t, const WeightedFst& l,
                                        const WeightedFst& g) {
  WeightedFst s = project_input(compose(compose(t, l), g));
  if (s.start() == kNoState)
    throw ValidationError("compiled search space is empty");

  int sl = kEpsilon, bp = kEpsilon;
  if (s.input_symbols) {
    sl = s.input_symbols->find(kSelfLoopSymbol);
    bp = s.input_symbols->find(kBypassSymbol);
  }
  SearchSpace space;
  std::set<int> kw_tokens;
  for (int st = 0; st < s.num_states(); ++st) {
    for (Arc& a : s.mutable_arcs(st)) {
      if (a.ilabel == kEpsilon)
        throw ValidationError("search space must not contain epsilon arcs");
      if (sl != kEpsilon && a.ilabel == sl) a.kind = ArcKind::kSelfLoop;
      if (bp != kEpsilon && a.ilabel == bp) a.kind = ArcKind::kBypass;
      if (a.kind == ArcKind::kKeyword) kw_tokens.insert(a.ilabel);
    }
  }
  space.graph = std::move(s);
  space.keyword_tokens.assign(kw_tokens.begin(), kw_tokens.end());
  return space;
}

// ---- search space serialization ----
// <prefix>.fst.txt   AT&T text arcs/finals
// <prefix>.ann       `arcid kind` per arc, in file arc order
// <prefix>.isyms.txt token symbol table
// <prefix>.meta.json keyword, keyword token ids, emitting arc ids

namespace detail {

// Arc ids follow the AT&T serialization order: the start state's arcs
// first, then remaining states in id order.
template <typename Fn>
void for_each_arc_in_file_order(const WeightedFst& fst, Fn&& fn) {
  if (fst.start() == kNoState) return;
  for (const Arc& a : fst.arcs(fst.start())) fn(a);
  for (int s = 0; s < fst.num_states(); ++s) {
    if (s == fst.start()) continue;
    for (const Arc& a : fst.arcs(s)) fn(a);
  }
}

template <typename Fn>
void for_each_mutable_arc_in_file_order(WeightedFst& fst, Fn&& fn) {
  if (fst.start() == kNoState) return;
  for (Arc& a : fst.mutable_arcs(fst.start())) fn(a);
  for (int s = 0; s < fst.num_states(); ++s) {
    if (s == fst.start()) continue;
    for (Arc& a : fst.mutable_arcs(s)) fn(a);
  }
}

}  // namespace detail

inline void save_search_space(const SearchSpace& space, const std::string& prefix) {
  {
    std::ofstream os(prefix + ".fst.txt");
    if (!os) throw IoError(strcat("cannot write ", prefix, ".fst.txt"));
    space.graph.write_att(os);
  }
  {
    std::ofstream os(prefix + ".ann");
    if (!os) throw IoError(strcat("cannot write ", prefix, ".ann"));
    int arcid = 0;
    detail::for_each_arc_in_file_order(space.graph, [&](const Arc& a) {
      os << arcid++ << ' ' << arc_kind_name(a.kind) << '\n';
    });
  }
  if (space.graph.input_symbols)
    space.graph.input_symbols->save(prefix + ".isyms.txt");
  {
    nlohmann::ordered_json meta;
    meta["keyword"] = space.keyword;
    meta["keyword_tokens"] = space.keyword_tokens;
    std::vector<int> emitting;
    int arcid = 0;
    detail::for_each_arc_in_file_order(space.graph, [&](const Arc& a) {
      if (a.emitting) emitting.push_back(arcid);
      ++arcid;
    });
    meta["emitting_arcs"] = emitting;
    std::ofstream os(prefix + ".meta.json");
    if (!os) throw IoError(strcat("cannot write ", prefix, ".meta.json"));
    os << meta.dump(2) << '\n';
  }
}

inline SearchSpace load_search_space(const std::string& prefix) {
  SearchSpace space;
  {
    std::ifstream is(prefix + ".fst.txt");
    if (!is) throw IoError(strcat("cannot open ", prefix, ".fst.txt"));
    space.graph = WeightedFst::read_att(is);
  }
  {
    std::ifstream is(prefix + ".isyms.txt");
    if (is) {
      is.close();
      space.graph.input_symbols =
          std::make_shared<SymbolTable>(SymbolTable::load(prefix + ".isyms.txt"));
      space.graph.output_symbols = space.graph.input_symbols;
    }
  }
  std::vector<ArcKind> kinds;
  {
    std::ifstream is(prefix + ".ann");
    if (!is) throw IoError(strcat("cannot open ", prefix, ".ann"));
    long id;
    std::string kind;
    while (is >> id >> kind) {
      if (id != static_cast<long>(kinds.size()))
        throw ValidationError(strcat("annotation ids must be dense, got ", id));
      kinds.push_back(arc_kind_from_name(kind));
    }
  }
  std::set<int> emitting;
  {
    std::ifstream is(prefix + ".meta.json");
    if (!is) throw IoError(strcat("cannot open ", prefix, ".meta.json"));
    nlohmann::json meta = nlohmann::json::parse(is);
    space.keyword = meta.value("keyword", "");
    space.keyword_tokens = meta.value("keyword_tokens", std::vector<int>{});
    for (int id : meta.value("emitting_arcs", std::vector<int>{})) emitting.insert(id);
  }
  int arcid = 0;
  detail::for_each_mutable_arc_in_file_order(space.graph, [&](Arc& a) {
    if (arcid >= static_cast<int>(kinds.size()))
      throw ValidationError("annotation file has fewer entries than arcs");
    a.kind = kinds[arcid];
    a.emitting = emitting.count(arcid) > 0;
    ++arcid;
  });
  if (arcid != static_cast<int>(kinds.size()))
    throw ValidationError("annotation file has more entries than arcs");
  return space;
}

}  // namespace ntckws

#endif  // NTCKWS_GRAPH_HPP_
