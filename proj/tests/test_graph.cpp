// tests/test_graph.cpp

#include "ntckws/graph.hpp"

#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ntckws/lattice.hpp"
#include "oracles.hpp"

namespace ntckws {
namespace {

// Small three-token world used throughout: vocab {A,B,C} (+blank,
// wildcards), phone-level lexicon.
struct Toy {
  Toy()
      : vocab(Vocabulary::from_symbols({"A", "B", "C"}, true)),
        lex(Lexicon::phone_lexicon(vocab)),
        t(build_token_fst(vocab)),
        l(build_lexicon_fst(lex)) {}
  Vocabulary vocab;
  Lexicon lex;
  WeightedFst t;
  WeightedFst l;

  int tok(const std::string& s) const { return vocab.table().find(s); }
  std::vector<int> toks(const std::vector<std::string>& names) const {
    std::vector<int> out;
    for (const auto& n : names) out.push_back(tok(n));
    return out;
  }
};

// Collapse a given alignment through the token FST by composing with a
// linear acceptor and enumerating outputs.
std::vector<std::vector<int>> apply_token_fst(const WeightedFst& t,
                                              const std::vector<int>& alignment) {
  WeightedFst input;
  int cur = input.add_state();
  input.set_start(cur);
  for (int a : alignment) {
    int next = input.add_state();
    input.add_arc(cur, {a, a, kLogOne, next});
    cur = next;
  }
  input.set_final(cur, kLogOne);
  input.output_symbols = t.input_symbols;
  auto rel = oracle::enumerate_relation(compose(input, t));
  std::vector<std::vector<int>> outputs;
  for (const auto& [key, entry] : rel) outputs.push_back(key.second);
  return outputs;
}

TEST(TokenFst, CollapsesPerTheMappingRule) {
  Toy toy;
  int A = toy.tok("A");
  int blk = toy.vocab.blank();
  // "A A blk" -> "A"
  auto out1 = apply_token_fst(toy.t, {A, A, blk});
  ASSERT_EQ(out1.size(), 1u);
  EXPECT_EQ(out1[0], std::vector<int>{A});
  // "blk blk blk" -> ""
  auto out2 = apply_token_fst(toy.t, {blk, blk, blk});
  ASSERT_EQ(out2.size(), 1u);
  EXPECT_TRUE(out2[0].empty());
  // "A blk A" -> "A A": the blank separates a genuine repeat.
  auto out3 = apply_token_fst(toy.t, {A, blk, A});
  ASSERT_EQ(out3.size(), 1u);
  EXPECT_EQ(out3[0], (std::vector<int>{A, A}));
}

TEST(TokenFst, MatchesIndependentCollapseOnRandomAlignments) {
  Toy toy;
  std::mt19937_64 rng(99);
  std::vector<int> alphabet{toy.vocab.blank(), toy.tok("A"), toy.tok("B"),
                            toy.tok("C")};
  for (int iter = 0; iter < 100; ++iter) {
    int len = 1 + static_cast<int>(rng() % 6);
    std::vector<int> pi(len);
    for (auto& x : pi) x = alphabet[rng() % alphabet.size()];
    auto outs = apply_token_fst(toy.t, pi);
    ASSERT_EQ(outs.size(), 1u) << "collapse must be functional";
    EXPECT_EQ(outs[0], oracle::collapse(pi, toy.vocab.blank()));
  }
}

TEST(LexiconFst, SingleEntryMapsTokensToWord) {
  Vocabulary vocab = Vocabulary::from_symbols({"HH", "EY"}, false);
  Lexicon lex(vocab);
  lex.add_entry("hey", {"HH", "EY"});
  WeightedFst l = build_lexicon_fst(lex);

  WeightedFst input;
  int s0 = input.add_state(), s1 = input.add_state(), s2 = input.add_state();
  input.set_start(s0);
  input.add_arc(s0, {vocab.table().find("HH"), vocab.table().find("HH"), kLogOne, s1});
  input.add_arc(s1, {vocab.table().find("EY"), vocab.table().find("EY"), kLogOne, s2});
  input.set_final(s2, kLogOne);
  input.output_symbols = vocab.table_ptr();

  auto rel = oracle::enumerate_relation(compose(input, l));
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_EQ(rel.begin()->first.second,
            std::vector<int>{lex.word_id("hey")});
}

TEST(LexiconFst, HomophonesYieldOnePathPerEntry) {
  Vocabulary vocab = Vocabulary::from_symbols({"HH", "EY"}, false);
  Lexicon lex(vocab);
  lex.add_entry("hey", {"HH", "EY"});
  lex.add_entry("hei", {"HH", "EY"});
  WeightedFst l = build_lexicon_fst(lex);

  WeightedFst input;
  int s0 = input.add_state(), s1 = input.add_state(), s2 = input.add_state();
  input.set_start(s0);
  input.add_arc(s0, {vocab.table().find("HH"), vocab.table().find("HH"), kLogOne, s1});
  input.add_arc(s1, {vocab.table().find("EY"), vocab.table().find("EY"), kLogOne, s2});
  input.set_final(s2, kLogOne);
  input.output_symbols = vocab.table_ptr();

  auto rel = oracle::enumerate_relation(compose(input, l));
  EXPECT_EQ(rel.size(), 2u);  // both words reachable
  int paths = 0;
  for (const auto& [key, entry] : rel) paths += entry.paths;
  EXPECT_EQ(paths, 2);  // path count equals entry count
}

TEST(Lexicon, UnknownPhonemeIsError) {
  Vocabulary vocab = Vocabulary::from_symbols({"HH"}, false);
  Lexicon lex(vocab);
  EXPECT_THROW(lex.add_entry("hey", {"HH", "EY"}), ValidationError);
  EXPECT_THROW(lex.add_entry("x", {}), ValidationError);
}

TEST(LexiconFst, EmptyLexiconIsError) {
  Vocabulary vocab = Vocabulary::from_symbols({"A"}, false);
  Lexicon lex(vocab);
  EXPECT_THROW(build_lexicon_fst(lex), ValidationError);
}

TEST(LinearGrammar, ChainShapeAndExactAcceptance) {
  Toy toy;
  WeightedFst g = build_linear_grammar(toy.lex, {"A", "B"});
  EXPECT_EQ(g.num_states(), 3);
  EXPECT_EQ(g.num_arcs(), 2);
  int wa = toy.lex.word_id("A"), wb = toy.lex.word_id("B");
  EXPECT_NE(oracle::accept_weight(g, {wa, wb}, Semiring::kLog), kLogZero);
  EXPECT_EQ(oracle::accept_weight(g, {wb, wa}, Semiring::kLog), kLogZero);
  EXPECT_THROW(build_linear_grammar(toy.lex, {}), ValidationError);
  EXPECT_THROW(build_linear_grammar(toy.lex, {"nope"}), ValidationError);
}

TEST(LinearGrammar, ComposedSpaceAcceptsExactlyTheLegalAlignments) {
  Toy toy;
  SearchSpace s = compile_search_space(toy.t, toy.l,
                                       build_linear_grammar(toy.lex, {"A", "B"}));
  std::vector<int> target = toy.toks({"A", "B"});
  std::vector<int> alphabet{toy.vocab.blank(), toy.tok("A"), toy.tok("B"),
                            toy.tok("C")};
  const int T = 4;
  oracle::for_each_string(alphabet, T, [&](const std::vector<int>& pi) {
    bool legal = oracle::collapse(pi, toy.vocab.blank()) == target;
    bool accepted =
        oracle::accept_weight(s.graph, pi, Semiring::kLog) != kLogZero;
    EXPECT_EQ(accepted, legal) << "alignment acceptance must match collapse rule";
  });
}

TEST(KwsGrammar, LinearWhenNoBackground) {
  Toy toy;
  WeightedFst g = build_kws_grammar(toy.lex, {"A", "B", "C"});
  EXPECT_EQ(g.num_states(), 4);
  EXPECT_EQ(g.num_arcs(), 3);
  EXPECT_THROW(build_kws_grammar(toy.lex, {"A", "missing"}), ValidationError);
}

TEST(KwsGrammar, BackgroundAddsOneAbsorbingState) {
  Toy toy;
  GrammarOptions opts;
  opts.background_path = true;
  WeightedFst g = build_kws_grammar(toy.lex, {"A", "B", "C"}, opts);
  EXPECT_EQ(g.num_states(), 5);
  // Exactly one extra state carrying one self-loop per lexicon word.
  int bg_state = -1;
  for (int s = 0; s < g.num_states(); ++s) {
    int self_loops = 0;
    for (const Arc& a : g.arcs(s)) self_loops += (a.next == s);
    if (self_loops > 0) {
      EXPECT_EQ(bg_state, -1);
      bg_state = s;
      EXPECT_EQ(self_loops, static_cast<int>(toy.lex.entries().size()));
    }
  }
  ASSERT_NE(bg_state, -1);
}

TEST(KwsGrammar, ComposedSpaceAcceptsRepeatsAndRejectsPermutation) {
  Toy toy;
  SearchSpace s = compile_search_space(
      toy.t, toy.l, build_kws_grammar(toy.lex, {"A", "B", "C"}));
  int A = toy.tok("A"), B = toy.tok("B"), C = toy.tok("C");
  int blk = toy.vocab.blank();
  EXPECT_NE(oracle::accept_weight(s.graph, {A, A, blk, B, C}, Semiring::kLog),
            kLogZero);
  EXPECT_EQ(oracle::accept_weight(s.graph, {A, C, B}, Semiring::kLog), kLogZero);
}

TEST(WildcardArcs, CountsForThreeTokenKeyword) {
  Toy toy;
  WeightedFst g = build_kws_grammar(toy.lex, {"A", "B", "C"});
  WeightedFst g_ntc = add_wildcard_arcs(g, -1.0, -2.0);
  int self_loops = 0, bypasses = 0;
  for (int s = 0; s < g_ntc.num_states(); ++s)
    for (const Arc& a : g_ntc.arcs(s)) {
      self_loops += (a.kind == ArcKind::kSelfLoop);
      bypasses += (a.kind == ArcKind::kBypass);
    }
  EXPECT_EQ(self_loops, 2);  // between A-B and B-C only
  EXPECT_EQ(bypasses, 3);    // one per keyword token
  // Superset: every original arc is still present, unreweighted.
  for (int s = 0; s < g.num_states(); ++s) {
    for (const Arc& a : g.arcs(s)) {
      bool found = false;
      for (const Arc& b : g_ntc.arcs(s))
        found |= (b.ilabel == a.ilabel && b.next == a.next &&
                  b.weight == a.weight && b.kind == a.kind);
      EXPECT_TRUE(found);
    }
  }
}

TEST(WildcardArcs, BoundaryOptionAddsEdgeLoops) {
  Toy toy;
  WeightedFst g = build_kws_grammar(toy.lex, {"A", "B", "C"});
  WildcardOptions w;
  w.boundary_self_loops = true;
  WeightedFst g_ntc = add_wildcard_arcs(g, -1.0, -2.0, w);
  int self_loops = 0;
  for (int s = 0; s < g_ntc.num_states(); ++s)
    for (const Arc& a : g_ntc.arcs(s)) self_loops += (a.kind == ArcKind::kSelfLoop);
  EXPECT_EQ(self_loops, 4);
}

TEST(WildcardArcs, RequiresLinearCoreAndWildcardSymbols) {
  Toy toy;
  WeightedFst no_core;
  int s0 = no_core.add_state();
  no_core.set_start(s0);
  no_core.set_final(s0, kLogOne);
  no_core.input_symbols = toy.lex.word_symbols();
  EXPECT_THROW(add_wildcard_arcs(no_core, -1, -1), ValidationError);

  Vocabulary plain = Vocabulary::from_symbols({"A"}, false);
  Lexicon plain_lex = Lexicon::phone_lexicon(plain);
  WeightedFst g = build_kws_grammar(plain_lex, {"A"});
  EXPECT_THROW(add_wildcard_arcs(g, -1, -1), ValidationError);
}

TEST(WildcardArcs, MinusInfinityAnnihilatesWildcardPaths) {
  Toy toy;
  WeightedFst g = build_kws_grammar(toy.lex, {"A", "B"});
  SearchSpace s_ctc = compile_search_space(toy.t, toy.l, g);
  SearchSpace s_ntc = compile_search_space(
      toy.t, toy.l, add_wildcard_arcs(g, kLogZero, kLogZero));
  std::vector<int> alphabet{toy.vocab.blank(), toy.tok("A"), toy.tok("B"),
                            toy.vocab.self_loop(), toy.vocab.bypass()};
  for (int T = 1; T <= 4; ++T) {
    oracle::for_each_string(alphabet, T, [&](const std::vector<int>& pi) {
      Weight w_ctc = oracle::accept_weight(s_ctc.graph, pi, Semiring::kLog);
      Weight w_ntc = oracle::accept_weight(s_ntc.graph, pi, Semiring::kLog);
      if (w_ctc == kLogZero)
        EXPECT_EQ(w_ntc, kLogZero);
      else
        EXPECT_NEAR(w_ntc, w_ctc, 1e-12);
    });
  }
}

TEST(CompileSearchSpace, WildcardAnnotationsSurvive) {
  Toy toy;
  WeightedFst g = add_wildcard_arcs(build_kws_grammar(toy.lex, {"A", "B"}), -0.5,
                                    -0.25);
  SearchSpace s = compile_search_space(toy.t, toy.l, g);
  int sl = toy.vocab.self_loop(), bp = toy.vocab.bypass();
  int wildcard_arcs = 0;
  for (int st = 0; st < s.graph.num_states(); ++st)
    for (const Arc& a : s.graph.arcs(st)) {
      if (a.ilabel == sl) {
        EXPECT_EQ(a.kind, ArcKind::kSelfLoop);
        ++wildcard_arcs;
      }
      if (a.ilabel == bp) {
        EXPECT_EQ(a.kind, ArcKind::kBypass);
        ++wildcard_arcs;
      }
    }
  EXPECT_GT(wildcard_arcs, 0);
  EXPECT_EQ(s.keyword_tokens, toy.toks({"A", "B"}));
}

TEST(CompileSearchSpace, ToyAlignmentSetMatchesBruteForce) {
  Toy toy;
  SearchSpace s = compile_search_space(toy.t, toy.l,
                                       build_kws_grammar(toy.lex, {"A", "B"}));
  std::vector<int> target = toy.toks({"A", "B"});
  std::vector<int> alphabet{toy.vocab.blank(), toy.tok("A"), toy.tok("B"),
                            toy.tok("C")};
  for (int T = 2; T <= 3; ++T)
    oracle::for_each_string(alphabet, T, [&](const std::vector<int>& pi) {
      bool legal = oracle::collapse(pi, toy.vocab.blank()) == target;
      bool accepted =
          oracle::accept_weight(s.graph, pi, Semiring::kLog) != kLogZero;
      EXPECT_EQ(accepted, legal);
    });
}

TEST(CompileSearchSpace, EmptyGrammarIsError) {
  Toy toy;
  WeightedFst g;  // no states at all
  EXPECT_THROW(compile_search_space(toy.t, toy.l, g), ValidationError);
  WeightedFst no_final;
  int s0 = no_final.add_state();
  no_final.set_start(s0);
  no_final.add_arc(s0, {toy.lex.word_id("A"), toy.lex.word_id("A"), kLogOne, s0});
  no_final.input_symbols = toy.lex.word_symbols();
  EXPECT_THROW(compile_search_space(toy.t, toy.l, no_final), ValidationError);
}

// Property from the module contract: for small configurations, the
// finite-weight alignment set of the compiled plain space equals the
// collapse-rule preimage of the keyword.
TEST(CompileSearchSpace, AlignmentSetPropertyOverConfigurations) {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 12; ++iter) {
    int n_real = 2 + static_cast<int>(rng() % 3);  // 2..4 real tokens
    std::vector<std::string> names;
    for (int i = 0; i < n_real; ++i) names.push_back("p" + std::to_string(i));
    Vocabulary vocab = Vocabulary::from_symbols(names, false);
    Lexicon lex = Lexicon::phone_lexicon(vocab);
    int kw_len = 1 + static_cast<int>(rng() % 3);
    std::vector<std::string> kw;
    for (int i = 0; i < kw_len; ++i) kw.push_back(names[rng() % names.size()]);
    SearchSpace s = compile_search_space(build_token_fst(vocab),
                                         build_lexicon_fst(lex),
                                         build_kws_grammar(lex, kw));
    std::vector<int> target;
    for (const auto& w : kw) target.push_back(vocab.table().find(w));
    std::vector<int> alphabet{vocab.blank()};
    for (int id : vocab.real_tokens()) alphabet.push_back(id);
    int T = 1 + static_cast<int>(rng() % 4);
    oracle::for_each_string(alphabet, T, [&](const std::vector<int>& pi) {
      bool legal = oracle::collapse(pi, vocab.blank()) == target;
      bool accepted =
          oracle::accept_weight(s.graph, pi, Semiring::kLog) != kLogZero;
      ASSERT_EQ(accepted, legal);
    });
  }
}

TEST(WildcardArcs, BypassCrossoverMatchesHandComputation) {
  // Keyword "A B" on 3 frames: alignment A B B (real) vs A * repeats.
  // The bypass path wins exactly when lambda_* + wildcard emission beats
  // the skipped token's emission chain.
  Toy toy;
  WeightedFst g = build_kws_grammar(toy.lex, {"A", "B"});
  Posteriorgram p(3, {"<blk>", "A", "B", "C", "@", "*"});
  // A strong at frame 0; B weak at frames 1,2; wildcard mean fixed at 0.2.
  auto set_row = [&](int t, double a, double b) {
    p.set_prob(t, 0, 0.01);
    p.set_prob(t, 1, a);
    p.set_prob(t, 2, b);
    p.set_prob(t, 3, 1.0 - a - b - 0.01);
    double mean = (a + b + (1.0 - a - b - 0.01)) / 3.0;
    p.set_prob(t, 4, mean);
    p.set_prob(t, 5, mean);
  };
  set_row(0, 0.9, 0.05);
  set_row(1, 0.05, 0.10);
  set_row(2, 0.05, 0.10);

  // Real chain after A: B at both frames: log(0.10)*2. Bypass chain: one *
  // emission then a * repeat: 2*log(mean(t)) + lambda. Crossover lambda:
  double mean1 = p.prob(1, 4), mean2 = p.prob(2, 4);
  double real_tail = std::log(0.10) + std::log(0.10);
  double bypass_emissions = std::log(mean1) + std::log(mean2);
  double crossover = real_tail - bypass_emissions;

  for (double delta : {-0.05, 0.05}) {
    double lambda = crossover + delta;
    SearchSpace s = compile_search_space(
        toy.t, toy.l, add_wildcard_arcs(g, kLogZero, lambda));
    auto vit = viterbi_best_path(intersect_dense(s.graph, p));
    ASSERT_TRUE(vit.has_value());
    bool used_bypass = false;
    for (int tok : vit->alignment) used_bypass |= (tok == toy.vocab.bypass());
    EXPECT_EQ(used_bypass, delta > 0) << "lambda=" << lambda;
  }
}

TEST(SearchSpaceIo, RoundTripPreservesEverything) {
  Toy toy;
  SearchSpace s = compile_search_space(
      toy.t, toy.l,
      add_wildcard_arcs(build_kws_grammar(toy.lex, {"A", "B"}), 0.0, 0.0));
  s.keyword = "A B";
  std::string prefix = testing::TempDir() + "/space";
  save_search_space(s, prefix);
  SearchSpace r = load_search_space(prefix);
  EXPECT_EQ(r.keyword, s.keyword);
  EXPECT_EQ(r.keyword_tokens, s.keyword_tokens);
  ASSERT_EQ(r.graph.num_states(), s.graph.num_states());
  EXPECT_EQ(r.graph.start(), s.graph.start());
  for (int st = 0; st < s.graph.num_states(); ++st) {
    ASSERT_EQ(r.graph.arcs(st).size(), s.graph.arcs(st).size());
    for (size_t i = 0; i < s.graph.arcs(st).size(); ++i) {
      const Arc& x = s.graph.arcs(st)[i];
      const Arc& y = r.graph.arcs(st)[i];
      EXPECT_EQ(y.ilabel, x.ilabel);
      EXPECT_DOUBLE_EQ(y.weight, x.weight);
      EXPECT_EQ(y.next, x.next);
      EXPECT_EQ(y.kind, x.kind);
      EXPECT_EQ(y.emitting, x.emitting);
    }
    EXPECT_DOUBLE_EQ(r.graph.final_weight(st), s.graph.final_weight(st));
  }
}

}  // namespace
}  // namespace ntckws
