#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "szo/chunking.hpp"
#include "szo/data_io.hpp"
#include "szo/synth_data.hpp"

using namespace szo;

// Learners can only reach hidden losses and gold tags through the feedback
// channels.
template <class T>
concept ExposesLosses = requires(const T& i) { i.losses_; } || requires(const T& i) { i.loss(0); };
template <class T>
concept ExposesGold = requires(const T& s) { s.gold_; } || requires(const T& s) { s.gold(); };
static_assert(!ExposesLosses<Instance>);
static_assert(!ExposesGold<SequenceInstance>);

namespace {

SequenceInstance sentence(std::vector<std::pair<std::string, std::string>> words,
                          std::string tags) {
  std::vector<Token> toks;
  std::vector<Chunk> gold;
  for (std::size_t i = 0; i < words.size(); ++i) {
    toks.push_back({words[i].first, words[i].second});
    gold.push_back(chunk_from_char(tags[i]));
  }
  return SequenceInstance(std::move(toks), std::move(gold));
}

// Every valid BIO sequence of length L with its score under w.
std::vector<ScoredPath> brute_force(const ChunkFeatures& feats, std::span<const double> w,
                                    std::size_t L) {
  std::vector<ScoredPath> all;
  std::size_t total = 1;
  for (std::size_t i = 0; i < L; ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<Chunk> y(L);
    std::size_t c = code;
    for (std::size_t i = L; i-- > 0;) {
      y[i] = static_cast<Chunk>(c % 3);
      c /= 3;
    }
    if (!valid_bio(y)) continue;
    const auto phi = feats.phi(y, static_cast<Index>(w.size()));
    all.push_back({y, dot(w, phi)});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.labels < b.labels;
  });
  return all;
}

}  // namespace

TEST(ChunkFeatures, GoldenNamesForTheBigDog) {
  const auto s = sentence({{"the", "DT"}, {"big", "JJ"}, {"dog", "NN"}}, "BII");
  std::ifstream in(SZO_TEST_DATA_DIR "/../golden/the_big_dog.features");
  ASSERT_TRUE(in);
  std::multiset<std::string> golden;
  for (std::string line; std::getline(in, line);) golden.insert(line);
  ASSERT_EQ(golden.size(), 23u);

  std::multiset<std::string> fired;
  const std::vector<Chunk> y{Chunk::B, Chunk::I, Chunk::I};
  Chunk prev = Chunk::O;
  for (std::size_t i = 0; i < 3; ++i) {
    for (auto& n : chunk_feature_names(s.tokens(), i, state_of(prev, y[i]))) fired.insert(n);
    prev = y[i];
  }
  EXPECT_EQ(fired, golden);

  FeatureIndex reg;
  const auto feats = build_chunking_features(s, reg);
  const auto phi = feats.phi(y, static_cast<Index>(reg.size()));
  EXPECT_EQ(l0_norm(phi), 23u);
  std::multiset<std::string> from_phi;
  for (Index i : phi.indices()) {
    EXPECT_EQ(phi[i], 1.0);
    from_phi.insert(reg.name(i));
  }
  EXPECT_EQ(from_phi, golden);
}

TEST(ChunkFeatures, FrozenRegistrySkipsUnseenNames) {
  FeatureIndex reg;
  build_chunking_features(sentence({{"a", "DT"}, {"cat", "NN"}}, "BI"), reg);
  reg.freeze();
  const auto before = reg.size();
  const auto feats = build_chunking_features(sentence({{"a", "DT"}, {"zebra", "NN"}}, "BI"), reg);
  EXPECT_EQ(reg.size(), before);
  for (std::size_t i = 0; i < 2; ++i) {
    for (int s = 0; s < kNumStates; ++s) {
      for (Index f : feats.at(i, s)) EXPECT_LT(f, before);
    }
  }
}

TEST(SequenceInstance, RejectsInvalidGold) {
  EXPECT_THROW(sentence({{"a", "DT"}}, "I"), DataError);
  EXPECT_THROW(SequenceInstance({{"a", "DT"}}, {}), DataError);
}

TEST(Decoding, ZeroWeightsGiveAllOutside) {
  const auto s = sentence({{"x", "A"}, {"y", "B"}, {"z", "C"}, {"q", "D"}}, "BIOB");
  FeatureIndex reg;
  const auto feats = build_chunking_features(s, reg);
  const std::vector<double> w(reg.size(), 0.0);
  const auto best = viterbi_decode(w, feats);
  EXPECT_EQ(to_string(best.labels), "OOOO");
  EXPECT_EQ(best.score, 0.0);
  const auto kb = kbest_decode(w, feats, 3);
  ASSERT_EQ(kb.size(), 3u);
  EXPECT_EQ(to_string(kb[0].labels), "OOOO");
  EXPECT_EQ(to_string(kb[1].labels), "OOOB");
  EXPECT_EQ(to_string(kb[2].labels), "OOBO");
}

TEST(Decoding, SingleStrongFeatureDecidesTheChunk) {
  const auto s = sentence({{"the", "DT"}, {"dog", "NN"}}, "OB");
  FeatureIndex reg;
  const auto feats = build_chunking_features(s, reg);
  std::vector<double> w(reg.size(), 0.0);
  w[reg.find("w0|dog|OB")] = 10.0;
  const auto best = viterbi_decode(w, feats);
  EXPECT_EQ(to_string(best.labels), "OB");
  EXPECT_EQ(best.score, 10.0);
}

TEST(Decoding, MatchesBruteForceOnRandomModels) {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> len(1, 6);
  const std::vector<std::string> words{"a", "b", "c", "d"}, tags{"X", "Y", "Z"};
  for (int rep = 0; rep < 200; ++rep) {
    const auto L = static_cast<std::size_t>(len(gen));
    std::vector<Token> toks;
    for (std::size_t i = 0; i < L; ++i) toks.push_back({words[gen() % 4], tags[gen() % 3]});
    const SequenceInstance s(toks, std::vector<Chunk>(L, Chunk::O));
    FeatureIndex reg;
    const auto feats = build_chunking_features(s, reg);
    std::vector<double> w(reg.size());
    for (auto& v : w) v = g(gen);
    const auto oracle = brute_force(feats, w, L);

    const auto best = viterbi_decode(w, feats);
    EXPECT_EQ(best.labels, oracle[0].labels);
    EXPECT_NEAR(best.score, oracle[0].score, 1e-9);

    for (std::size_t k : {std::size_t{1}, std::size_t{5}, oracle.size() + 3}) {
      const auto kb = kbest_decode(w, feats, k);
      ASSERT_EQ(kb.size(), std::min(k, oracle.size()));
      for (std::size_t j = 0; j < kb.size(); ++j) {
        EXPECT_NEAR(kb[j].score, oracle[j].score, 1e-9);
        EXPECT_TRUE(valid_bio(kb[j].labels));
      }
      std::set<std::vector<Chunk>> distinct;
      for (const auto& p : kb) distinct.insert(p.labels);
      EXPECT_EQ(distinct.size(), kb.size());
    }
  }
}

TEST(Decoding, CandidateInstanceCarriesHiddenF1Loss) {
  const auto s = sentence({{"the", "DT"}, {"big", "JJ"}, {"dog", "NN"}}, "BII");
  FeatureIndex reg;
  const auto feats = build_chunking_features(s, reg);
  std::vector<double> w(reg.size(), 0.0);
  const auto inst = as_candidate_instance(s, feats, w, static_cast<Index>(reg.size()), 20);
  ASSERT_EQ(inst.size(), 13u);  // every valid BIO sequence of length 3
  bool found_gold = false;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const std::string& y = inst.candidate(i).output;
    std::vector<Chunk> labels;
    for (char c : y) labels.push_back(chunk_from_char(c));
    EXPECT_DOUBLE_EQ(Feedback::loss(inst, i), 1.0 - chunk_f1(labels, SequenceFeedback::gold(s)));
    found_gold = found_gold || y == "BII";
  }
  EXPECT_TRUE(found_gold);
  EXPECT_EQ(Feedback::loss(inst, 0), 1.0);  // all-O predicts no chunks
}

TEST(ChunkingProblem, ActiveSetIsATinyFractionOfTheFeatureSpace) {
  std::stringstream ss;
  write_synthetic_chunking(ss, 200, 5);
  auto parsed = parse_conll(ss, ParseMode::kStrict);
  ASSERT_TRUE(parsed.warnings.empty());
  const ChunkingProblem prob(parsed.items, {}, 20, ObjectiveSpec{});
  const std::vector<double> w(prob.dimension(), 0.0);
  const RngStream root(1, streams::kData);
  for (std::uint64_t k = 0; k < 50; ++k) {
    RngStream r = root.substream(k);
    const auto q = prob.draw(w, r);
    EXPECT_LT(static_cast<double>(q.active_set().size()), 0.05 * prob.dimension());
  }
  EXPECT_TRUE(prob.features()->frozen());
  EXPECT_FALSE(prob.has_dev());
}

TEST(ChunkingProblem, Errors) {
  const auto s = sentence({{"a", "DT"}}, "B");
  EXPECT_THROW(ChunkingProblem({}, {}, 5, ObjectiveSpec{}), DataError);
  EXPECT_THROW(ChunkingProblem({s}, {}, 0, ObjectiveSpec{}), ConfigError);
  EXPECT_THROW(ChunkingProblem({s}, {}, 5, ObjectiveSpec{ObjectiveKind::kSynthetic, 1.0}),
               ConfigError);
  FeatureIndex open;
  const std::vector<double> w;
  EXPECT_THROW(evaluate_chunking(w, open, std::span<const SequenceInstance>(&s, 1)), ConfigError);
}

TEST(ChunkingProblem, DevEvaluationScoresViterbiOutput) {
  const auto s = sentence({{"the", "DT"}, {"dog", "NN"}}, "BI");
  const ChunkingProblem prob({s}, {s}, 5, ObjectiveSpec{});
  std::vector<double> w(prob.dimension(), 0.0);
  EXPECT_EQ(prob.evaluate(w), 0.0);
  w[prob.features()->find("w0|the|OB")] = 1.0;
  w[prob.features()->find("w0|dog|BI")] = 1.0;
  EXPECT_EQ(prob.evaluate(w), 1.0);
  auto reg = FeatureIndex::from_names(prob.features()->names());
  EXPECT_EQ(evaluate_chunking(w, reg, std::span<const SequenceInstance>(&s, 1)), 1.0);
}
