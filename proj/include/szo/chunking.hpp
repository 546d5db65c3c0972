#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "szo/errors.hpp"
#include "szo/instance.hpp"
#include "szo/metrics.hpp"
#include "szo/objectives.hpp"
#include "szo/optimizer.hpp"
#include "szo/rng.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

struct Token {
  std::string word;
  std::string pos;

  friend bool operator==(const Token&, const Token&) = default;
};

class SequenceInstance;

/// Evaluation-side access to gold chunk tags.
struct SequenceFeedback {
  static std::span<const Chunk> gold(const SequenceInstance& seq);
};

/// A tagged sentence. The gold tags are hidden from learners.
class SequenceInstance {
 public:
  SequenceInstance(std::vector<Token> tokens, std::vector<Chunk> gold)
      : tokens_(std::move(tokens)), gold_(std::move(gold)) {
    if (tokens_.size() != gold_.size()) throw DataError("sentence: token/tag count mismatch");
    if (!valid_bio(gold_)) throw DataError("sentence: gold tags are not a valid BIO sequence");
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<Token>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const SequenceInstance&, const SequenceInstance&) = default;

 private:
  friend struct SequenceFeedback;
  std::vector<Token> tokens_;
  std::vector<Chunk> gold_;
};

inline std::span<const Chunk> SequenceFeedback::gold(const SequenceInstance& seq) {
  return seq.gold_;
}

// ---------------------------------------------------------------------------
// Label-bigram states. Position i carries the state (c_{i-1}, c_i) with
// c_{-1} = O; states are ordered lexicographically with O < B < I.

inline constexpr int kNumLabels = 3;
inline constexpr int kNumStates = 9;

constexpr int state_of(Chunk prev, Chunk cur) noexcept {
  return kNumLabels * static_cast<int>(prev) + static_cast<int>(cur);
}
constexpr Chunk state_prev(int s) noexcept { return static_cast<Chunk>(s / kNumLabels); }
constexpr Chunk state_cur(int s) noexcept { return static_cast<Chunk>(s % kNumLabels); }
/// (O, I) is the only state that breaks BIO validity.
constexpr bool valid_state(int s) noexcept { return s != state_of(Chunk::O, Chunk::I); }

inline std::string state_label(int s) {
  return {to_char(state_prev(s)), to_char(state_cur(s))};
}

// ---------------------------------------------------------------------------
// Feature templates: label bigram conjoined with
//   POS unigrams at i-2..i+2, POS bigram (i-1, i), POS trigram (i-2, i-1, i),
//   word unigrams at i-2..i+2, word bigram (i-1, i).
// Templates reaching outside the sentence do not fire. Names are
// `template|context|labels`, e.g. `w0|dog|OB`.

inline std::vector<std::pair<std::string, std::string>> observation_contexts(
    std::span<const Token> tokens, std::size_t i) {
  std::vector<std::pair<std::string, std::string>> ctx;
  const auto L = static_cast<long>(tokens.size());
  const auto at = [&](long o) { return static_cast<long>(i) + o; };
  const auto in = [&](long o) { return at(o) >= 0 && at(o) < L; };
  static constexpr std::array<std::pair<long, const char*>, 5> kOffsets = {
      {{-2, "-2"}, {-1, "-1"}, {0, "0"}, {1, "+1"}, {2, "+2"}}};
  for (const auto& [o, tag] : kOffsets) {
    if (in(o)) ctx.emplace_back(std::string("p") + tag, tokens[at(o)].pos);
  }
  if (in(-1)) ctx.emplace_back("p-1,0", tokens[at(-1)].pos + "_" + tokens[i].pos);
  if (in(-2)) {
    ctx.emplace_back("p-2,-1,0",
                     tokens[at(-2)].pos + "_" + tokens[at(-1)].pos + "_" + tokens[i].pos);
  }
  for (const auto& [o, tag] : kOffsets) {
    if (in(o)) ctx.emplace_back(std::string("w") + tag, tokens[at(o)].word);
  }
  if (in(-1)) ctx.emplace_back("w-1,0", tokens[at(-1)].word + "_" + tokens[i].word);
  return ctx;
}

/// Feature names firing at position i under `state`.
inline std::vector<std::string> chunk_feature_names(std::span<const Token> tokens, std::size_t i,
                                                    int state) {
  std::vector<std::string> names;
  const std::string labels = state_label(state);
  for (const auto& [tmpl, ctx] : observation_contexts(tokens, i)) {
    names.push_back(tmpl + "|" + ctx + "|" + labels);
  }
  return names;
}

/// Feature ids per (position, state) for one sentence.
class ChunkFeatures {
 public:
  std::size_t length() const noexcept { return length_; }

  std::span<const Index> at(std::size_t i, int state) const {
    const std::size_t k = i * kNumStates + static_cast<std::size_t>(state);
    return std::span<const Index>(ids_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
  }

  /// phi(x, y) for a full label sequence: indicator counts.
  SparseVector phi(std::span<const Chunk> labels, Index dim) const {
    std::vector<std::pair<Index, double>> pairs;
    Chunk prev = Chunk::O;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (Index f : at(i, state_of(prev, labels[i]))) pairs.emplace_back(f, 1.0);
      prev = labels[i];
    }
    return SparseVector::from_pairs(dim, std::move(pairs));
  }

 private:
  friend ChunkFeatures build_chunking_features(const SequenceInstance&, FeatureIndex&);
  std::size_t length_ = 0;
  std::vector<std::uint32_t> offsets_;
  std::vector<Index> ids_;
};

/// Extracts feature ids for every position and valid state. A building
/// registry grows; a frozen registry skips unseen names.
inline ChunkFeatures build_chunking_features(const SequenceInstance& seq, FeatureIndex& registry) {
  ChunkFeatures f;
  f.length_ = seq.size();
  f.offsets_.reserve(seq.size() * kNumStates + 1);
  f.offsets_.push_back(0);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto ctx = observation_contexts(seq.tokens(), i);
    for (int s = 0; s < kNumStates; ++s) {
      if (valid_state(s) && (i > 0 || state_prev(s) == Chunk::O)) {
        const std::string labels = state_label(s);
        for (const auto& [tmpl, c] : ctx) {
          const Index id = registry.intern(tmpl + "|" + c + "|" + labels);
          if (id != FeatureIndex::kMissing) f.ids_.push_back(id);
        }
      }
      f.offsets_.push_back(static_cast<std::uint32_t>(f.ids_.size()));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Decoding

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-position state scores; unreachable states hold -inf.
struct EmissionTable {
  std::size_t length = 0;
  std::vector<double> scores;  // length * kNumStates

  double operator()(std::size_t i, int s) const { return scores[i * kNumStates + s]; }
};

template <class Weights>
EmissionTable make_emissions(const ChunkFeatures& feats, const Weights& w) {
  EmissionTable t;
  t.length = feats.length();
  t.scores.assign(t.length * kNumStates, kNegInf);
  for (std::size_t i = 0; i < t.length; ++i) {
    for (int s = 0; s < kNumStates; ++s) {
      if (!valid_state(s) || (i == 0 && state_prev(s) != Chunk::O)) continue;
      double sum = 0.0;
      for (Index f : feats.at(i, s)) sum += w[f];
      t.scores[i * kNumStates + s] = sum;
    }
  }
  return t;
}

struct ScoredPath {
  std::vector<Chunk> labels;
  double score = 0.0;
};

/// Exact argmax over valid BIO sequences. Among equal scores the
/// lexicographically smallest label sequence (O < B < I) wins.
inline ScoredPath viterbi_decode(const EmissionTable& e) {
  const std::size_t L = e.length;
  if (L == 0) return {};
  std::vector<std::array<double, kNumLabels>> best(L);
  std::vector<std::array<int, kNumLabels>> back(L);
  std::array<int, kNumLabels> rank{};  // lexicographic rank of the best prefix ending in c
  for (int c = 0; c < kNumLabels; ++c) {
    best[0][c] = e(0, state_of(Chunk::O, static_cast<Chunk>(c)));
    back[0][c] = -1;
    rank[c] = c;
  }
  for (std::size_t i = 1; i < L; ++i) {
    for (int c = 0; c < kNumLabels; ++c) {
      double bs = kNegInf;
      int bp = -1;
      for (int p = 0; p < kNumLabels; ++p) {
        if (best[i - 1][p] == kNegInf) continue;
        const double em = e(i, state_of(static_cast<Chunk>(p), static_cast<Chunk>(c)));
        if (em == kNegInf) continue;
        const double sc = best[i - 1][p] + em;
        if (bp < 0 || sc > bs || (sc == bs && rank[p] < rank[bp])) {
          bs = sc;
          bp = p;
        }
      }
      best[i][c] = bs;
      back[i][c] = bp;
    }
    std::array<int, kNumLabels> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const int ra = back[i][a] < 0 ? kNumLabels : rank[back[i][a]];
      const int rb = back[i][b] < 0 ? kNumLabels : rank[back[i][b]];
      return std::tie(ra, a) < std::tie(rb, b);
    });
    std::array<int, kNumLabels> next{};
    for (int r = 0; r < kNumLabels; ++r) next[order[r]] = r;
    rank = next;
  }
  int c = -1;
  for (int x = 0; x < kNumLabels; ++x) {
    if (best[L - 1][x] == kNegInf) continue;
    if (c < 0 || best[L - 1][x] > best[L - 1][c] ||
        (best[L - 1][x] == best[L - 1][c] && rank[x] < rank[c])) {
      c = x;
    }
  }
  ScoredPath path;
  path.score = best[L - 1][c];
  path.labels.resize(L);
  for (std::size_t i = L; i-- > 0;) {
    path.labels[i] = static_cast<Chunk>(c);
    c = back[i][c];
  }
  return path;
}

/// Exact top-k valid BIO sequences, ordered by score descending and then
/// lexicographically ascending.
inline std::vector<ScoredPath> kbest_decode(const EmissionTable& e, std::size_t k) {
  if (k < 1) throw ConfigError("kbest_decode: k must be >= 1");
  const std::size_t L = e.length;
  if (L == 0) return {ScoredPath{}};

  struct Entry {
    double score;
    int parent_label;  // -1 at position 0
    std::uint32_t parent_entry;
    std::uint32_t rank;  // lexicographic rank among all kept prefixes at this position
  };
  // lists[i][c]: kept prefixes ending at position i with label c
  std::vector<std::array<std::vector<Entry>, kNumLabels>> lists(L);
  for (int c = 0; c < kNumLabels; ++c) {
    const double s = e(0, state_of(Chunk::O, static_cast<Chunk>(c)));
    if (s != kNegInf) lists[0][c].push_back({s, -1, 0, static_cast<std::uint32_t>(c)});
  }
  for (std::size_t i = 1; i < L; ++i) {
    for (int c = 0; c < kNumLabels; ++c) {
      std::vector<Entry> cand;
      for (int p = 0; p < kNumLabels; ++p) {
        const double em = e(i, state_of(static_cast<Chunk>(p), static_cast<Chunk>(c)));
        if (em == kNegInf) continue;
        const auto& prev = lists[i - 1][p];
        for (std::uint32_t j = 0; j < prev.size(); ++j) {
          cand.push_back({prev[j].score + em, p, j, prev[j].rank});
        }
      }
      // `rank` temporarily holds the parent's rank.
      std::sort(cand.begin(), cand.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.rank < b.rank;
      });
      if (cand.size() > k) cand.resize(k);
      lists[i][c] = std::move(cand);
    }
    // Re-rank all kept prefixes at position i lexicographically by
    // (parent rank, label).
    std::vector<std::tuple<std::uint32_t, int, std::uint32_t>> keys;
    for (int c = 0; c < kNumLabels; ++c) {
      for (std::uint32_t j = 0; j < lists[i][c].size(); ++j) {
        keys.emplace_back(lists[i][c][j].rank, c, j);
      }
    }
    std::sort(keys.begin(), keys.end());
    for (std::uint32_t r = 0; r < keys.size(); ++r) {
      lists[i][std::get<1>(keys[r])][std::get<2>(keys[r])].rank = r;
    }
  }

  std::vector<std::pair<int, std::uint32_t>> finals;
  for (int c = 0; c < kNumLabels; ++c) {
    for (std::uint32_t j = 0; j < lists[L - 1][c].size(); ++j) finals.emplace_back(c, j);
  }
  std::sort(finals.begin(), finals.end(), [&](const auto& a, const auto& b) {
    const Entry& x = lists[L - 1][a.first][a.second];
    const Entry& y = lists[L - 1][b.first][b.second];
    if (x.score != y.score) return x.score > y.score;
    return x.rank < y.rank;
  });
  if (finals.size() > k) finals.resize(k);

  std::vector<ScoredPath> out;
  out.reserve(finals.size());
  for (auto [c, j] : finals) {
    ScoredPath p;
    p.score = lists[L - 1][c][j].score;
    p.labels.resize(L);
    for (std::size_t i = L; i-- > 0;) {
      const Entry& en = lists[i][c][j];
      p.labels[i] = static_cast<Chunk>(c);
      c = en.parent_label;
      j = en.parent_entry;
    }
    out.push_back(std::move(p));
  }
  return out;
}

template <class Weights>
ScoredPath viterbi_decode(const Weights& w, const ChunkFeatures& feats) {
  return viterbi_decode(make_emissions(feats, w));
}

template <class Weights>
std::vector<ScoredPath> kbest_decode(const Weights& w, const ChunkFeatures& feats, std::size_t k) {
  return kbest_decode(make_emissions(feats, w), k);
}

/// k-best candidates under w as a bandit Instance with hidden loss 1 - F1.
template <class Weights>
Instance as_candidate_instance(const SequenceInstance& seq, const ChunkFeatures& feats,
                               const Weights& w, Index dim, std::size_t k,
                               std::string id = "") {
  const auto paths = kbest_decode(w, feats, k);
  std::vector<Candidate> cands;
  std::vector<double> losses;
  cands.reserve(paths.size());
  losses.reserve(paths.size());
  const auto gold = SequenceFeedback::gold(seq);
  for (const auto& p : paths) {
    cands.push_back({to_string(p.labels), feats.phi(p.labels, dim)});
    losses.push_back(1.0 - chunk_f1(p.labels, gold));
  }
  return Instance(std::move(id), std::move(cands), std::move(losses));
}

// ---------------------------------------------------------------------------

/// Sequence labeling as a bandit problem: each query re-decodes the k-best
/// list of a sampled sentence under the current iterate.
class ChunkingProblem {
 public:
  struct Query {
    Instance inst;
    const ObjectiveSpec* objective;

    const ActiveSet& active_set() const noexcept { return inst.active_set(); }
    const Instance& instance() const noexcept { return inst; }
    double loss(std::span<const double> w, const SparseVector& u, double s) const {
      return candidate_loss(*objective, candidate_scores(w, inst, &u, s), inst);
    }
  };

  /// Builds the feature space from `train` and freezes it.
  ChunkingProblem(std::vector<SequenceInstance> train, std::vector<SequenceInstance> dev,
                  std::size_t k, ObjectiveSpec objective)
      : registry_(std::make_shared<FeatureIndex>()),
        train_(std::move(train)),
        dev_(std::move(dev)),
        k_(k),
        objective_(objective) {
    if (train_.empty()) throw DataError("chunking: training set is empty");
    if (k_ < 1) throw ConfigError("--k: k-best size must be >= 1");
    if (objective_.kind == ObjectiveKind::kSynthetic) {
      throw ConfigError("chunking needs the map or annealed objective");
    }
    train_feats_.reserve(train_.size());
    for (const auto& s : train_) train_feats_.push_back(build_chunking_features(s, *registry_));
    registry_->freeze();
    dev_feats_.reserve(dev_.size());
    for (const auto& s : dev_) dev_feats_.push_back(build_chunking_features(s, *registry_));
  }

  std::shared_ptr<const FeatureIndex> features() const noexcept { return registry_; }
  Index dimension() const noexcept { return static_cast<Index>(registry_->size()); }
  const std::vector<SequenceInstance>& train() const noexcept { return train_; }
  const std::vector<ChunkFeatures>& train_features() const noexcept { return train_feats_; }

  Query draw(std::span<const double> w, RngStream& rng) const {
    const std::size_t i = rng.uniform_index(train_.size());
    return Query{as_candidate_instance(train_[i], train_feats_[i], w, dimension(), k_,
                                       std::to_string(i)),
                 &objective_};
  }

  bool has_dev() const noexcept { return !dev_.empty(); }
  bool higher_is_better() const noexcept { return true; }

  /// Corpus chunk F1 of Viterbi output on the dev set.
  double evaluate(std::span<const double> w) const {
    std::vector<std::vector<Chunk>> pred, gold;
    for (std::size_t i = 0; i < dev_.size(); ++i) {
      pred.push_back(viterbi_decode(w, dev_feats_[i]).labels);
      const auto g = SequenceFeedback::gold(dev_[i]);
      gold.emplace_back(g.begin(), g.end());
    }
    return corpus_chunk_f1(pred, gold);
  }

 private:
  std::shared_ptr<FeatureIndex> registry_;
  std::vector<SequenceInstance> train_;
  std::vector<SequenceInstance> dev_;
  std::vector<ChunkFeatures> train_feats_;
  std::vector<ChunkFeatures> dev_feats_;
  std::size_t k_;
  ObjectiveSpec objective_;
};

/// Corpus F1 of Viterbi output for sentences under a frozen registry.
template <class Weights>
double evaluate_chunking(const Weights& w, FeatureIndex& frozen_registry,
                         std::span<const SequenceInstance> sentences) {
  if (!frozen_registry.frozen()) throw ConfigError("evaluate_chunking: registry must be frozen");
  std::vector<std::vector<Chunk>> pred, gold;
  for (const auto& s : sentences) {
    pred.push_back(viterbi_decode(w, build_chunking_features(s, frozen_registry)).labels);
    const auto g = SequenceFeedback::gold(s);
    gold.emplace_back(g.begin(), g.end());
  }
  return corpus_chunk_f1(pred, gold);
}

}  // namespace szo
