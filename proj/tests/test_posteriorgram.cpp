// tests/test_posteriorgram.cpp

#include "ntckws/posteriorgram.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace ntckws {
namespace {

Posteriorgram make_gram(const std::vector<std::vector<double>>& rows,
                        const std::vector<std::string>& symbols) {
  Posteriorgram p(static_cast<int>(rows.size()), symbols);
  for (size_t t = 0; t < rows.size(); ++t)
    for (size_t j = 0; j < rows[t].size(); ++j)
      p.set_prob(static_cast<int>(t), static_cast<int>(j), rows[t][j]);
  return p;
}

TEST(AugmentWildcards, MeanOfRealColumns) {
  Vocabulary vocab = Vocabulary::from_symbols({"a", "b", "c"}, true);
  Posteriorgram p = make_gram({{0.4, 0.2, 0.3, 0.1}}, {"<blk>", "a", "b", "c"});
  Posteriorgram aug = augment_wildcards(p, vocab);
  ASSERT_EQ(aug.tokens(), 6);
  EXPECT_DOUBLE_EQ(aug.prob(0, 4), 0.2);  // mean of 0.2, 0.3, 0.1
  EXPECT_DOUBLE_EQ(aug.prob(0, 5), 0.2);
  // Original columns unchanged, bit-exact.
  for (int j = 0; j < 4; ++j) EXPECT_EQ(aug.prob(0, j), p.prob(0, j));
}

TEST(AugmentWildcards, UniformAndSingleTokenCases) {
  {
    Vocabulary vocab = Vocabulary::from_symbols({"a", "b", "c"}, true);
    double u = 0.25;
    Posteriorgram p = make_gram({{u, u, u, u}}, {"<blk>", "a", "b", "c"});
    Posteriorgram aug = augment_wildcards(p, vocab);
    EXPECT_DOUBLE_EQ(aug.prob(0, 4), u);
  }
  {
    Vocabulary vocab = Vocabulary::from_symbols({"a"}, true);
    Posteriorgram p = make_gram({{0.3, 0.7}}, {"<blk>", "a"});
    Posteriorgram aug = augment_wildcards(p, vocab);
    EXPECT_DOUBLE_EQ(aug.prob(0, 2), 0.7);
    EXPECT_DOUBLE_EQ(aug.prob(0, 3), 0.7);
  }
}

TEST(AugmentWildcards, GuardsAndErrors) {
  Vocabulary vocab = Vocabulary::from_symbols({"a"}, true);
  Posteriorgram p = make_gram({{0.5, 0.5}}, {"<blk>", "a"});
  Posteriorgram aug = augment_wildcards(p, vocab);
  EXPECT_THROW(augment_wildcards(aug, vocab), ValidationError);  // idempotent guard
  Posteriorgram no_blank = make_gram({{1.0}}, {"a"});
  EXPECT_THROW(augment_wildcards(no_blank, vocab), ValidationError);
  Vocabulary plain = Vocabulary::from_symbols({"a"}, false);
  EXPECT_THROW(augment_wildcards(p, plain), ValidationError);
}

TEST(AugmentWildcards, MeanPropertyOnRandomGrams) {
  std::mt19937_64 rng(31);
  Vocabulary vocab = Vocabulary::from_symbols({"a", "b", "c", "d"}, true);
  std::vector<std::string> syms{"<blk>", "a", "b", "c", "d"};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 50; ++iter) {
    int frames = 1 + static_cast<int>(rng() % 8);
    Posteriorgram p(frames, syms);
    for (int t = 0; t < frames; ++t) {
      std::vector<double> row(5);
      double sum = 0.0;
      for (auto& v : row) sum += (v = u(rng) + 1e-3);
      for (int j = 0; j < 5; ++j) p.set_prob(t, j, row[j] / sum);
    }
    Posteriorgram aug = augment_wildcards(p, vocab);
    for (int t = 0; t < frames; ++t) {
      double mean = (p.prob(t, 1) + p.prob(t, 2) + p.prob(t, 3) + p.prob(t, 4)) / 4.0;
      EXPECT_NEAR(aug.prob(t, 5), mean, 1e-12);
      EXPECT_EQ(aug.prob(t, 5), aug.prob(t, 6));  // '@' and '*' identical
    }
  }
}

TEST(PosteriorgramIo, RoundTripBitExactForFloatValues) {
  // Values exactly representable in float32 survive save/load bit-exact.
  Posteriorgram p = make_gram({{0.5, 0.25, 0.25}, {0.125, 0.375, 0.5}},
                              {"<blk>", "a", "b"});
  std::string path = testing::TempDir() + "/rt.post";
  p.save(path);
  Posteriorgram q = Posteriorgram::load(path);
  ASSERT_EQ(q.frames(), p.frames());
  ASSERT_EQ(q.symbols(), p.symbols());
  for (int t = 0; t < p.frames(); ++t)
    for (int j = 0; j < p.tokens(); ++j) EXPECT_EQ(q.prob(t, j), p.prob(t, j));
  // And a second trip is bit-stable for arbitrary doubles.
  Posteriorgram r = make_gram({{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {"<blk>", "a", "b"});
  r.save(path);
  Posteriorgram r1 = Posteriorgram::load(path);
  r1.save(path);
  Posteriorgram r2 = Posteriorgram::load(path);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(r1.prob(0, j), r2.prob(0, j));
}

TEST(PosteriorgramIo, TruncatedFileReportsBytes) {
  Posteriorgram p = make_gram({{0.5, 0.5}}, {"<blk>", "a"});
  std::string path = testing::TempDir() + "/trunc.post";
  p.save(path);
  // Chop the payload.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), 14);
  out.close();
  try {
    Posteriorgram::load(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos);
  }
}

TEST(PosteriorgramIo, BadMagicAndBadRowSums) {
  std::string path = testing::TempDir() + "/bad.post";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE  more bytes here to get past header reads";
  }
  EXPECT_THROW(Posteriorgram::load(path), IoError);

  Posteriorgram p = make_gram({{0.5, 0.5}, {0.4, 0.4}}, {"<blk>", "a"});
  p.save(path);
  try {
    Posteriorgram::load(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);  // frame index
  }
}

TEST(PosteriorgramIo, CsvRoundTrip) {
  Posteriorgram p = make_gram({{0.5, 0.5}, {0.25, 0.75}}, {"<blk>", "a"});
  std::ostringstream os;
  p.to_csv(os);
  std::istringstream is(os.str());
  Posteriorgram q = Posteriorgram::from_csv(is);
  ASSERT_EQ(q.frames(), 2);
  EXPECT_EQ(q.symbols(), p.symbols());
  EXPECT_DOUBLE_EQ(q.prob(1, 1), 0.75);
}

TEST(Posteriorgram, ValidateChecksRange) {
  Posteriorgram p = make_gram({{1.2, -0.2}}, {"<blk>", "a"});
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Posteriorgram, ValidateSkipsWildcardColumns) {
  // Augmented rows don't sum to 1 over all columns but must still pass.
  Vocabulary vocab = Vocabulary::from_symbols({"a", "b"}, true);
  Posteriorgram p = make_gram({{0.2, 0.5, 0.3}}, {"<blk>", "a", "b"});
  Posteriorgram aug = augment_wildcards(p, vocab);
  EXPECT_NO_THROW(aug.validate());
  std::string path = testing::TempDir() + "/aug.post";
  aug.save(path);
  EXPECT_NO_THROW(Posteriorgram::load(path));
}

TEST(Posteriorgram, PeekFrames) {
  Posteriorgram p = make_gram({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, {"<blk>", "a"});
  std::string path = testing::TempDir() + "/peek.post";
  p.save(path);
  EXPECT_EQ(Posteriorgram::peek_frames(path), 3);
}

TEST(Posteriorgram, MatrixContainerSkipsRowValidation) {
  Posteriorgram g = make_gram({{-3.5, 12.0}}, {"<blk>", "a"});
  std::string path = testing::TempDir() + "/grad.mat";
  g.save_matrix(path);
  Posteriorgram r = Posteriorgram::load_matrix(path);
  EXPECT_FLOAT_EQ(static_cast<float>(r.prob(0, 0)), -3.5f);
  EXPECT_THROW(Posteriorgram::load(path), IoError);  // wrong magic for POST
}

}  // namespace
}  // namespace ntckws
