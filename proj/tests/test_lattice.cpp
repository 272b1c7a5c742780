// tests/test_lattice.cpp

#include "ntckws/lattice.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ntckws/graph.hpp"
#include "oracles.hpp"

namespace ntckws {
namespace {

Posteriorgram uniform_gram(int frames, const std::vector<std::string>& symbols) {
  Posteriorgram p(frames, symbols);
  double u = 1.0 / symbols.size();
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < static_cast<int>(symbols.size()); ++j) p.set_prob(t, j, u);
  return p;
}

Posteriorgram random_gram(int frames, const std::vector<std::string>& symbols,
                          std::mt19937_64& rng) {
  Posteriorgram p(frames, symbols);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int t = 0; t < frames; ++t) {
    double sum = 0.0;
    std::vector<double> row(symbols.size());
    for (auto& v : row) sum += (v = u(rng));
    for (int j = 0; j < static_cast<int>(symbols.size()); ++j)
      p.set_prob(t, j, row[j] / sum);
  }
  return p;
}

// Acceptor over labels {1..n_tokens} without a symbol table: label l reads
// posteriorgram column l-1.
WeightedFst random_acceptor(int n_tokens, std::mt19937_64& rng) {
  WeightedFst g;
  int n = 2 + static_cast<int>(rng() % 3);
  for (int s = 0; s < n; ++s) g.add_state();
  g.set_start(0);
  std::uniform_real_distribution<double> w(-1.0, 0.5);
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (rng() % 3 == 0) {
        int label = 1 + static_cast<int>(rng() % n_tokens);
        g.add_arc(s, {label, label, w(rng), d});
      }
  for (int s = 0; s < n; ++s)
    if (rng() % 2) g.set_final(s, w(rng));
  // Guarantee at least one arc and one final so most instances are useful.
  if (g.arcs(0).empty()) g.add_arc(0, {1, 1, w(rng), n - 1});
  g.set_final(n - 1, kLogOne);
  return g;
}

TEST(IntersectDense, SingleTokenSingleFrame) {
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {1, 1, kLogOne, s1});
  g.set_final(s1, kLogOne);
  Posteriorgram p(1, {"a"});
  p.set_prob(0, 0, 0.5);
  Lattice lat = intersect_dense(g, p);
  EXPECT_NEAR(forward_score(lat), std::log(0.5), 1e-12);
  auto vit = viterbi_best_path(lat);
  ASSERT_TRUE(vit.has_value());
  EXPECT_EQ(vit->alignment, std::vector<int>{1});
}

TEST(IntersectDense, UnknownLabelIsError) {
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {3, 3, kLogOne, s1});
  g.set_final(s1, kLogOne);
  Posteriorgram p(1, {"a"});
  p.set_prob(0, 0, 1.0);
  EXPECT_THROW(intersect_dense(g, p), ValidationError);
}

TEST(Posteriorgram, ZeroFramesImpossible) {
  EXPECT_THROW(Posteriorgram(0, {"a"}), ValidationError);
}

TEST(ForwardScore, SinglePathIsItsWeight) {
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {1, 1, -0.25, s1});
  g.set_final(s1, -0.5);
  Posteriorgram p(1, {"a"});
  p.set_prob(0, 0, 1.0);
  Lattice lat = intersect_dense(g, p);
  EXPECT_DOUBLE_EQ(forward_score(lat), -0.75);
}

TEST(ForwardScore, TwoParallelPaths) {
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {1, 1, std::log(0.25), s1});
  g.add_arc(s0, {2, 2, std::log(0.25), s1});
  g.set_final(s1, kLogOne);
  Posteriorgram p(1, {"a", "b"});
  p.set_prob(0, 0, 1.0);
  p.set_prob(0, 1, 1.0);  // not a distribution; weights are what matter here
  Lattice lat = intersect_dense(g, p);
  EXPECT_NEAR(forward_score(lat), std::log(0.5), 1e-12);
}

TEST(ForwardScore, NoPathIsLogZeroNotError) {
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {1, 1, kLogOne, s1});
  // s1 not final; also the graph needs 2 frames to reach nothing
  Posteriorgram p(2, {"a"});
  p.set_prob(0, 0, 1.0);
  p.set_prob(1, 0, 1.0);
  Lattice lat = intersect_dense(g, p);
  EXPECT_EQ(forward_score(lat), kLogZero);
  EXPECT_FALSE(viterbi_best_path(lat).has_value());
}

// The CTC toy: vocab {a, blank}, transcript "a", T=2, uniform 0.5.
// Legal alignments: a-, -a, aa; each has weight 0.25.
class CtcToy : public ::testing::Test {
 protected:
  CtcToy()
      : vocab(Vocabulary::from_symbols({"a"}, false)),
        lex(make_lexicon()),
        space(compile_search_space(build_token_fst(vocab), build_lexicon_fst(lex),
                                   build_linear_grammar(lex, {"a"}))) {}

  Lexicon make_lexicon() {
    Lexicon l(vocab);
    l.add_entry("a", {"a"});
    return l;
  }

  Vocabulary vocab;
  Lexicon lex;
  SearchSpace space;
};

TEST_F(CtcToy, ThreeAlignmentsForwardAndViterbi) {
  Posteriorgram p = uniform_gram(2, {"<blk>", "a"});
  Lattice lat = intersect_dense(space.graph, p);
  EXPECT_NEAR(forward_score(lat), std::log(0.75), 1e-12);

  auto vit = viterbi_best_path(lat);
  ASSERT_TRUE(vit.has_value());
  EXPECT_NEAR(vit->score, 2 * std::log(0.5), 1e-12);
  // All three alignments tie; the documented tie-break (lowest insertion
  // order) picks deterministically. Check legality and determinism.
  std::vector<int> collapsed = oracle::collapse(vit->alignment, vocab.blank());
  EXPECT_EQ(collapsed, std::vector<int>{vocab.table().find("a")});
  auto vit2 = viterbi_best_path(intersect_dense(space.graph, p));
  EXPECT_EQ(vit2->alignment, vit->alignment);
  EXPECT_EQ(vit->alignment.size(), 2u);
}

TEST_F(CtcToy, ForwardAtLeastViterbi) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    Posteriorgram p = random_gram(1 + static_cast<int>(rng() % 5),
                                  {"<blk>", "a"}, rng);
    Lattice lat = intersect_dense(space.graph, p);
    double fwd = forward_score(lat);
    auto vit = viterbi_best_path(lat);
    if (!vit) {
      EXPECT_EQ(fwd, kLogZero);
      continue;
    }
    EXPECT_GE(fwd + 1e-12, vit->score);
  }
}

TEST(LatticeOracle, RandomGraphsMatchBruteForce) {
  std::mt19937_64 rng(1234);
  int nontrivial = 0;
  for (int iter = 0; iter < 150; ++iter) {
    int n_tokens = 2 + static_cast<int>(rng() % 3);  // <= 4
    std::vector<std::string> symbols;
    for (int j = 0; j < n_tokens; ++j) symbols.push_back("t" + std::to_string(j + 1));
    WeightedFst g = random_acceptor(n_tokens, rng);
    int frames = 1 + static_cast<int>(rng() % 6);
    Posteriorgram p = random_gram(frames, symbols, rng);
    Lattice lat = intersect_dense(g, p);

    double fwd = forward_score(lat);
    double brute = oracle::forward_brute(g, p);
    if (brute == kLogZero) {
      EXPECT_EQ(fwd, kLogZero);
      continue;
    }
    ++nontrivial;
    EXPECT_NEAR(fwd, brute, 1e-9);

    auto vit = viterbi_best_path(lat);
    auto vb = oracle::viterbi_brute(g, p);
    ASSERT_TRUE(vit.has_value());
    ASSERT_TRUE(vb.has_value());
    EXPECT_NEAR(vit->score, vb->score, 1e-12);
    EXPECT_EQ(vit->alignment, vb->alignment);  // continuous scores: no ties
    EXPECT_GE(fwd + 1e-12, vit->score);
  }
  EXPECT_GT(nontrivial, 50);
}

TEST(IntersectDense, EpsilonArcsConsumeNoFrame) {
  // start --eps(-0.5)--> s1 --a--> final; one frame consumed, epsilon free.
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state(), s2 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {kEpsilon, kEpsilon, -0.5, s1});
  g.add_arc(s1, {1, 1, kLogOne, s2});
  g.set_final(s2, kLogOne);
  Posteriorgram p(1, {"a"});
  p.set_prob(0, 0, 0.5);
  Lattice lat = intersect_dense(g, p);
  EXPECT_NEAR(forward_score(lat), -0.5 + std::log(0.5), 1e-12);
  auto vit = viterbi_best_path(lat);
  ASSERT_TRUE(vit);
  EXPECT_EQ(vit->alignment.size(), 1u);  // epsilon arcs add no frames
}

TEST(IntersectDense, EpsilonCycleIsError) {
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {kEpsilon, kEpsilon, -0.1, s1});
  g.add_arc(s1, {kEpsilon, kEpsilon, -0.1, s0});
  g.add_arc(s0, {1, 1, kLogOne, s1});
  g.set_final(s1, kLogOne);
  Posteriorgram p(1, {"a"});
  p.set_prob(0, 0, 1.0);
  EXPECT_THROW(intersect_dense(g, p), ValidationError);
}

TEST(ArcPosteriors, SumToExpectedEmissionCount) {
  // Forced single path: occupancy 1 on each frame's arc.
  WeightedFst g;
  int s0 = g.add_state(), s1 = g.add_state(), s2 = g.add_state();
  g.set_start(s0);
  g.add_arc(s0, {1, 1, kLogOne, s1});
  g.add_arc(s1, {2, 2, kLogOne, s2});
  g.set_final(s2, kLogOne);
  Posteriorgram p(2, {"a", "b"});
  p.set_prob(0, 0, 0.5);
  p.set_prob(0, 1, 0.5);
  p.set_prob(1, 0, 0.5);
  p.set_prob(1, 1, 0.5);
  auto occ = arc_posteriors(intersect_dense(g, p));
  double total = 0.0;
  for (const auto& ap : occ) total += ap.occupancy;
  EXPECT_NEAR(total, 2.0, 1e-12);  // == T for a forced fixed-length path
}

}  // namespace
}  // namespace ntckws
