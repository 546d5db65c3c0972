#include <gtest/gtest.h>

#include <cmath>

#include "szo/metrics.hpp"
#include "szo/tasks.hpp"

using namespace szo;

namespace {

std::vector<Chunk> tags(std::string_view s) {
  std::vector<Chunk> out;
  for (char c : s) out.push_back(chunk_from_char(c));
  return out;
}

std::vector<std::string> toks(const std::string& s) { return tokenize(s); }

}  // namespace

TEST(Bio, Validity) {
  EXPECT_TRUE(valid_bio(tags("BIOBI")));
  EXPECT_TRUE(valid_bio(tags("")));
  EXPECT_FALSE(valid_bio(tags("I")));
  EXPECT_FALSE(valid_bio(tags("BOI")));
  EXPECT_THROW(chunk_from_char('X'), std::exception);
}

TEST(ChunkF1, Examples) {
  EXPECT_EQ(chunk_f1(tags("BIOB"), tags("BIOB")), 1.0);
  EXPECT_EQ(chunk_f1(tags("OOO"), tags("OOO")), 1.0);
  EXPECT_EQ(chunk_f1(tags("OOO"), tags("BOO")), 0.0);
  EXPECT_EQ(chunk_f1(tags("BOO"), tags("OOO")), 0.0);
  EXPECT_DOUBLE_EQ(chunk_f1(tags("BOOB"), tags("BIOB")), 0.5);
  // 2 predicted, 3 gold, 1 correct: p = 1/2, r = 1/3.
  EXPECT_NEAR(chunk_f1(tags("BIBOO"), tags("BIOBB")), 0.4, 1e-12);
  EXPECT_THROW(chunk_f1(tags("BO"), tags("B")), std::invalid_argument);
}

TEST(ChunkF1, CorpusPoolsSpanCounts) {
  const std::vector<std::vector<Chunk>> pred{tags("BIOB"), tags("OOO")};
  const std::vector<std::vector<Chunk>> gold{tags("BIOB"), tags("BOB")};
  // 2 predicted, 4 gold, 2 correct.
  EXPECT_NEAR(corpus_chunk_f1(pred, gold), 2.0 * 1.0 * 0.5 / 1.5, 1e-12);
  EXPECT_EQ(corpus_chunk_f1(std::vector<std::vector<Chunk>>{tags("OO")},
                            std::vector<std::vector<Chunk>>{tags("OO")}),
            1.0);
}

TEST(SentenceBleu, IdenticalIsOne) {
  EXPECT_NEAR(sentence_bleu_smoothed(toks("a b c d e"), toks("a b c d e")), 1.0, 1e-12);
}

TEST(SentenceBleu, GoldenValues) {
  const double partial = std::pow(5.0 / 6 * 3.0 / 5 * 1.0 / 4 * 0.01 / 3, 0.25);
  EXPECT_NEAR(sentence_bleu_smoothed(toks("the cat sat on the mat"), toks("the cat is on the mat")),
              partial, 1e-10);
  EXPECT_NEAR(partial, 0.1428720215, 1e-10);

  const double none =
      std::pow(0.01 / 5 * 0.01 / 4 * 0.01 / 3 * 0.01 / 2, 0.25) * std::exp(1.0 - 4.0);
  EXPECT_NEAR(sentence_bleu_smoothed(
                  toks("a b c d e"), toks("f g h i j k l m n o p q r s t u v w x y")),
              none, 1e-10);
  EXPECT_NEAR(none, 0.0001504254, 1e-10);

  // Orders 3 and 4 have no hypothesis n-grams at all.
  EXPECT_NEAR(sentence_bleu_smoothed(toks("a b"), toks("a b")), 0.1, 1e-12);
  EXPECT_EQ(sentence_bleu_smoothed({}, toks("a")), 0.0);
  EXPECT_THROW(sentence_bleu_smoothed(toks("a"), {}), std::invalid_argument);
}

TEST(SentenceBleu, StaysInUnitInterval) {
  const std::vector<std::string> pool{"a", "b", "c", "the", "of"};
  std::uint64_t s = 1;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<std::string> h, r;
    for (int i = 0; i < 1 + rep % 9; ++i) h.push_back(pool[((s = s * 6364136223846793005ull + 1) >> 33) % 5]);
    for (int i = 0; i < 1 + rep % 7; ++i) r.push_back(pool[((s = s * 6364136223846793005ull + 1) >> 33) % 5]);
    const double b = sentence_bleu_smoothed(h, r);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

TEST(CorpusBleu, GoldenValues) {
  const std::vector<TokenPair> one{{toks("the cat sat on the mat"), toks("the cat is on the mat")}};
  EXPECT_EQ(corpus_bleu(one), 0.0);
  const std::vector<TokenPair> two{{toks("a b c d"), toks("a b c d")},
                                   {toks("the cat sat on the mat"), toks("the cat is on the mat")}};
  EXPECT_NEAR(corpus_bleu(two), std::pow(0.9 * 0.75 * 0.5 * 0.25, 0.25), 1e-12);
  EXPECT_NEAR(corpus_bleu(two), 0.5389561679, 1e-10);
  const std::vector<TokenPair> short_hyp{{toks("a b c d"), toks("a b c d e f g h")}};
  EXPECT_NEAR(corpus_bleu(short_hyp), std::exp(1.0 - 2.0), 1e-12);
  EXPECT_THROW(corpus_bleu(std::vector<TokenPair>{}), std::invalid_argument);
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(zero_one_loss(2, 2), 0.0);
  EXPECT_EQ(zero_one_loss(1, 2), 1.0);
  const std::vector<std::size_t> p{0, 1, 2, 2}, g{0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(accuracy(p, g), 0.75);
  EXPECT_THROW(accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(Multiclass, InstanceBlocksAndLoss) {
  const auto doc = SparseVector::from_pairs(5, {{1, 2.0}, {4, 1.0}});
  const auto inst = multiclass_instance(doc, 3, 1, "d");
  ASSERT_EQ(inst.size(), 3u);
  EXPECT_EQ(inst.dim(), 15u);
  EXPECT_EQ(inst.candidate(2).features[11], 2.0);
  EXPECT_EQ(inst.candidate(2).features[14], 1.0);
  EXPECT_EQ(Feedback::loss(inst, 1), 0.0);
  EXPECT_EQ(Feedback::loss(inst, 0), 1.0);
  EXPECT_THROW(multiclass_instance(doc, 1, 0), ConfigError);
  EXPECT_THROW(multiclass_instance(doc, 3, 3), DataError);

  std::vector<double> w(15, 0.0);
  w[6] = 1.0;  // class 1, feature 1
  const std::vector<Instance> insts{inst};
  EXPECT_EQ(multiclass_accuracy(w, insts), 1.0);
}
