#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "szo/data_io.hpp"

using namespace szo;

namespace {

const std::string kData = SZO_TEST_DATA_DIR;

std::string gold_string(const SequenceInstance& s) {
  return to_string(SequenceFeedback::gold(s));
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Conll, ParsesFixture) {
  const auto res = parse_conll(kData + "/tiny.conll");
  EXPECT_TRUE(res.warnings.empty());
  ASSERT_EQ(res.items.size(), 2u);
  EXPECT_EQ(res.items[0].size(), 5u);
  EXPECT_EQ(res.items[0].tokens()[3], (Token{"pound", "NN"}));
  EXPECT_EQ(gold_string(res.items[0]), "BOBIO");
  EXPECT_EQ(gold_string(res.items[1]), "BOBIIO");
}

TEST(Conll, NonNpChunksBecomeOutside) {
  std::stringstream in("He PRP B-NP\nruns VBZ B-VP\nfast RB I-ADVP\n");
  const auto res = parse_conll(in);
  EXPECT_EQ(gold_string(res.items.at(0)), "BOO");
}

TEST(Conll, RepairsInsideAfterOutside) {
  std::stringstream in("a DT O\nb NN I-NP\n\n");
  const auto res = parse_conll(in);
  ASSERT_EQ(res.items.size(), 1u);
  EXPECT_EQ(gold_string(res.items[0]), "OB");
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("I-NP after O"), std::string::npos);
}

TEST(Conll, ColumnCountErrors) {
  std::stringstream strict("a DT B-NP\nb NN\n");
  const auto msg = error_of([&] { parse_conll(strict); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("3 columns"), std::string::npos) << msg;

  std::stringstream lenient("a DT B-NP\nb NN\n\nc NN B-NP\n");
  const auto res = parse_conll(lenient, ParseMode::kLenient);
  ASSERT_EQ(res.items.size(), 1u);
  EXPECT_EQ(res.items[0].tokens()[0].word, "c");
  EXPECT_EQ(res.warnings.size(), 1u);
}

TEST(Conll, EmptyInputAndMissingFile) {
  std::stringstream empty("");
  EXPECT_TRUE(parse_conll(empty).items.empty());
  EXPECT_THROW(parse_conll(kData + "/does_not_exist.conll"), DataError);
}

TEST(Conll, WriteReadRoundTrip) {
  const auto a = parse_conll(kData + "/tiny.conll").items;
  std::stringstream ss;
  write_conll(ss, a);
  const auto b = parse_conll(ss).items;
  EXPECT_EQ(a, b);
}

TEST(NBest, ParsesFixture) {
  const auto res = parse_nbest(kData + "/tiny.nbest");
  EXPECT_TRUE(res.warnings.empty());
  const auto& d = res.items;
  ASSERT_EQ(d.instances.size(), 2u);
  EXPECT_EQ(d.instances[0].id(), "0");
  EXPECT_EQ(d.instances[0].size(), 3u);
  EXPECT_EQ(d.instances[1].size(), 2u);
  EXPECT_EQ(d.instances[0].dim(), 3u);
  EXPECT_EQ(d.references[1], (std::vector<std::string>{"hello", "there", "world"}));
  EXPECT_EQ(d.instances[0].candidate(0).features[2], -2.0);
  EXPECT_EQ(l0_norm(d.instances[0].candidate(1).features), 2u);
  EXPECT_NEAR(Feedback::loss(d.instances[0], 0), 0.0, 1e-12);
  // Three tokens have no 4-grams, so the exact match still scores 0.01^(1/4).
  EXPECT_NEAR(Feedback::loss(d.instances[1], 1), 1.0 - std::pow(0.01, 0.25), 1e-12);
  const double expect = 1.0 - sentence_bleu_smoothed(tokenize("hello world"),
                                                     tokenize("hello there world"));
  EXPECT_DOUBLE_EQ(Feedback::loss(d.instances[1], 0), expect);
}

TEST(NBest, Errors) {
  auto err = [](const std::string& text) {
    std::stringstream in(text);
    return error_of([&] { parse_nbest(in); });
  };
  EXPECT_NE(err("0 ||| a b ||| 1 2\n").find("lacks the reference"), std::string::npos);
  EXPECT_NE(err("0 ||| a ||| 1 2 ||| a\n0 ||| b ||| 1\n").find("arity mismatch"), std::string::npos);
  EXPECT_NE(err("0 ||| a ||| 1 2 ||| a\n1 ||| b ||| 1 ||| b\n").find("earlier ids"),
            std::string::npos);
  EXPECT_NE(err("0 ||| a ||| 1 ||| a\n1 ||| b ||| 1 ||| b\n0 ||| c ||| 1 ||| c\n")
                .find("not contiguous"),
            std::string::npos);
  EXPECT_NE(err("0 ||| a ||| x ||| a\n").find("bad number"), std::string::npos);
  EXPECT_NE(err("0 ||| a ||| ||| a\n").find("no features"), std::string::npos);
  EXPECT_NE(err("0 ||| a\n").find("line 1"), std::string::npos);
}

TEST(Docs, ParsesFixture) {
  DocHeader h;
  const auto res = parse_docs(kData + "/tiny.docs", &h);
  EXPECT_EQ(h.classes, 3u);
  EXPECT_EQ(h.vocab, 10u);
  ASSERT_EQ(res.items.size(), 3u);
  const auto& d0 = res.items[0];
  EXPECT_EQ(d0.size(), 3u);
  EXPECT_EQ(d0.dim(), 30u);
  EXPECT_EQ(d0.candidate(1).features[13], 2.5);
  EXPECT_EQ(Feedback::loss(d0, 0), 0.0);
  EXPECT_EQ(Feedback::loss(res.items[1], 2), 0.0);
  EXPECT_EQ(l0_norm(res.items[2].candidate(0).features), 0u);
  EXPECT_EQ(res.items[2].id(), "2");
}

TEST(Docs, DuplicateIndexKeepsLastValue) {
  std::stringstream in("classes=2 vocab=4\n1\t2:1.0 2:3.0\n");
  const auto res = parse_docs(in);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_EQ(res.items[0].candidate(0).features[2], 3.0);
}

TEST(Docs, Errors) {
  auto err = [](const std::string& text) {
    std::stringstream in(text);
    return error_of([&] { parse_docs(in); });
  };
  EXPECT_NE(err("").find("missing header"), std::string::npos);
  EXPECT_NE(err("vocab=3 classes=2\n").find("header"), std::string::npos);
  EXPECT_NE(err("classes=1 vocab=3\n").find("2 classes"), std::string::npos);
  EXPECT_NE(err("classes=2 vocab=3\n2\t0:1\n").find("classes=2"), std::string::npos);
  EXPECT_NE(err("classes=2 vocab=3\n0\t3:1\n").find("vocab=3"), std::string::npos);
  EXPECT_NE(err("classes=2 vocab=3\n0\t1-1\n").find("i:v"), std::string::npos);
  EXPECT_NE(err("classes=2 vocab=3\n0\t1:nan\n").find("line 2"), std::string::npos);
}

TEST(RunLog, RoundTripIsBitwise) {
  RunLog log;
  log.rows.push_back({1, 0.1, 0.1, 5, std::nullopt});
  log.rows.push_back({2, 1.0 / 3.0, (0.1 + 1.0 / 3.0) / 2, 7, 0.123456789012345678});
  log.rows.push_back({3, 1e-300, 5e-301, 0, 0.0});
  std::stringstream ss;
  write_runlog(log, ss);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kRunLogHeader);
  EXPECT_EQ(read_runlog(ss), log);
  std::stringstream bad("iter,loss\n");
  EXPECT_THROW(read_runlog(bad), DataError);
  std::stringstream short_row(std::string(kRunLogHeader) + "\n1,0.5,0.5\n");
  EXPECT_THROW(read_runlog(short_row), DataError);
}

TEST(Checkpoint, RoundTrip) {
  const auto w = SparseVector::from_pairs(100, {{3, 0.1}, {50, -1.0 / 7.0}, {99, 1e10}});
  std::stringstream ss;
  write_checkpoint(w, ss);
  EXPECT_EQ(read_checkpoint(ss), w);
  std::stringstream two("dim=3\n0:1\n1:1\n");
  EXPECT_THROW(read_checkpoint(two), DataError);
}

TEST(Features, RoundTripAndDuplicates) {
  FeatureIndex fi;
  fi.intern("w0|dog|OB");
  fi.intern("p0|NN|BI");
  fi.freeze();
  std::stringstream ss;
  write_features(fi, ss);
  const auto back = read_features(ss);
  EXPECT_EQ(back.names(), fi.names());
  EXPECT_TRUE(back.frozen());
  std::stringstream dup("a\nb\na\n");
  EXPECT_THROW(read_features(dup), DataError);
}
