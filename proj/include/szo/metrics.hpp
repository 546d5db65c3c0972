#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "szo/errors.hpp"

namespace szo {

/// Chunk tags for the NP task. Order O < B < I defines tie-breaking.
enum class Chunk : std::uint8_t { O = 0, B = 1, I = 2 };

inline char to_char(Chunk c) { return "OBI"[static_cast<int>(c)]; }

inline Chunk chunk_from_char(char c) {
  switch (c) {
    case 'O': return Chunk::O;
    case 'B': return Chunk::B;
    case 'I': return Chunk::I;
    default: throw std::invalid_argument(std::string("bad chunk tag `") + c + "`");
  }
}

inline std::string to_string(std::span<const Chunk> tags) {
  std::string s;
  s.reserve(tags.size());
  for (Chunk c : tags) s.push_back(to_char(c));
  return s;
}

/// I may not follow O (or start a sentence).
inline bool valid_bio(std::span<const Chunk> tags) {
  Chunk prev = Chunk::O;
  for (Chunk c : tags) {
    if (c == Chunk::I && prev == Chunk::O) return false;
    prev = c;
  }
  return true;
}

struct ChunkSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string type = "NP";

  friend auto operator<=>(const ChunkSpan&, const ChunkSpan&) = default;
};

inline std::vector<ChunkSpan> chunk_spans(std::span<const Chunk> tags) {
  std::vector<ChunkSpan> spans;
  for (std::size_t i = 0; i < tags.size();) {
    if (tags[i] == Chunk::O) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == Chunk::I) ++j;
    spans.push_back({i, j, "NP"});
    i = j;
  }
  return spans;
}

/// Span-level F1 over exact matches; 1.0 when neither side has a span.
inline double chunk_f1(std::span<const Chunk> pred, std::span<const Chunk> gold) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument("chunk_f1: length mismatch (" + std::to_string(pred.size()) +
                                " vs " + std::to_string(gold.size()) + ")");
  }
  const auto ps = chunk_spans(pred);
  const auto gs = chunk_spans(gold);
  if (ps.empty() && gs.empty()) return 1.0;
  const std::set<ChunkSpan> gold_set(gs.begin(), gs.end());
  std::size_t correct = 0;
  for (const auto& s : ps) correct += gold_set.count(s);
  if (correct == 0) return 0.0;
  const double p = static_cast<double>(correct) / static_cast<double>(ps.size());
  const double r = static_cast<double>(correct) / static_cast<double>(gs.size());
  return 2.0 * p * r / (p + r);
}

/// Corpus-level F1 over pooled span counts.
inline double corpus_chunk_f1(std::span<const std::vector<Chunk>> pred,
                              std::span<const std::vector<Chunk>> gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("corpus_chunk_f1: size mismatch");
  std::size_t np = 0, ng = 0, correct = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size()) throw std::invalid_argument("chunk_f1: length mismatch");
    const auto ps = chunk_spans(pred[s]);
    const auto gs = chunk_spans(gold[s]);
    const std::set<ChunkSpan> gold_set(gs.begin(), gs.end());
    for (const auto& x : ps) correct += gold_set.count(x);
    np += ps.size();
    ng += gs.size();
  }
  if (np == 0 && ng == 0) return 1.0;
  if (correct == 0) return 0.0;
  const double p = static_cast<double>(correct) / static_cast<double>(np);
  const double r = static_cast<double>(correct) / static_cast<double>(ng);
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// BLEU

inline constexpr int kBleuOrder = 4;

struct NGramStats {
  std::array<std::size_t, kBleuOrder> matches{};  // clipped
  std::array<std::size_t, kBleuOrder> totals{};   // hypothesis n-gram counts
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  NGramStats& operator+=(const NGramStats& o) {
    for (int n = 0; n < kBleuOrder; ++n) {
      matches[n] += o.matches[n];
      totals[n] += o.totals[n];
    }
    hyp_len += o.hyp_len;
    ref_len += o.ref_len;
    return *this;
  }
};

inline NGramStats ngram_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  NGramStats st;
  st.hyp_len = hyp.size();
  st.ref_len = ref.size();
  for (int n = 1; n <= kBleuOrder; ++n) {
    std::map<std::vector<std::string>, std::size_t> ref_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i) {
      ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
    }
    std::map<std::vector<std::string>, std::size_t> hyp_counts;
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
      ++hyp_counts[std::vector<std::string>(hyp.begin() + i, hyp.begin() + i + n)];
    }
    std::size_t m = 0, t = 0;
    for (const auto& [g, c] : hyp_counts) {
      t += c;
      auto it = ref_counts.find(g);
      if (it != ref_counts.end()) m += std::min(c, it->second);
    }
    st.matches[n - 1] = m;
    st.totals[n - 1] = t;
  }
  return st;
}

inline double brevity_penalty(double hyp_len, double ref_len) {
  return std::exp(std::min(0.0, 1.0 - ref_len / hyp_len));
}

/// Sentence BLEU where a zero clipped match count is replaced by 0.01. An
/// order with no hypothesis n-grams at all contributes 0.01 as well.
inline double sentence_bleu_smoothed(std::span<const std::string> hyp,
                                     std::span<const std::string> ref) {
  if (ref.empty()) throw std::invalid_argument("sentence_bleu_smoothed: empty reference");
  if (hyp.empty()) return 0.0;
  const NGramStats st = ngram_stats(hyp, ref);
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    const double m = st.matches[n] == 0 ? 0.01 : static_cast<double>(st.matches[n]);
    const double t = st.totals[n] == 0 ? 1.0 : static_cast<double>(st.totals[n]);
    log_sum += std::log(m / t);
  }
  const double bleu = std::exp(log_sum / kBleuOrder) *
                      brevity_penalty(static_cast<double>(st.hyp_len), static_cast<double>(st.ref_len));
  return std::min(1.0, bleu);
}

/// Unsmoothed BLEU from aggregated statistics.
inline double bleu_from_stats(const NGramStats& st) {
  if (st.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (st.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
  }
  return std::exp(log_sum / kBleuOrder) *
         brevity_penalty(static_cast<double>(st.hyp_len), static_cast<double>(st.ref_len));
}

using TokenPair = std::pair<std::vector<std::string>, std::vector<std::string>>;

/// Corpus BLEU (n = 1..4) over summed counts, corpus brevity penalty.
inline double corpus_bleu(std::span<const TokenPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  NGramStats total;
  for (const auto& [hyp, ref] : pairs) {
    if (ref.empty()) throw std::invalid_argument("corpus_bleu: empty reference");
    total += ngram_stats(hyp, ref);
  }
  return bleu_from_stats(total);
}

// ---------------------------------------------------------------------------
// Multiclass

inline double zero_one_loss(std::size_t pred, std::size_t gold) { return pred == gold ? 0.0 : 1.0; }

inline double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> gold) {
  if (pred.size() != gold.size() || pred.empty()) {
    throw std::invalid_argument("accuracy: need equal, non-empty label lists");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) loss += zero_one_loss(pred[i], gold[i]);
  return 1.0 - loss / static_cast<double>(pred.size());
}

}  // namespace szo
