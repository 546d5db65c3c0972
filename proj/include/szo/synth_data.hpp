#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "szo/errors.hpp"
#include "szo/rng.hpp"

// Deterministic miniature corpora in the data_io formats: a chunking corpus
// from a small POS grammar, n-best lists from corrupted references, and
// tf-idf style topic documents.

namespace szo {

namespace synth {

inline constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo",
                                             "ze", "ba", "do", "fi", "gu", "pe", "ro", "xi"};

/// Pronounceable pseudo-word for (class tag, index); distinct per pair.
inline std::string pseudo_word(const std::string& tag, std::uint64_t index) {
  std::string w;
  std::uint64_t x = index;
  do {
    w += kSyllables[x % 16];
    x /= 16;
  } while (x > 0);
  std::string prefix;
  for (char c : tag) prefix += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return w + (prefix.empty() ? "" : "-" + prefix);
}

/// Skewed index in [0, n): frequent words are reused often.
inline std::uint64_t skewed_index(RngStream& rng, std::uint64_t n) {
  const double u = rng.uniform();
  return std::min<std::uint64_t>(n - 1, static_cast<std::uint64_t>(std::floor(n * u * u * u)));
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct TaggedToken {
  std::string word, pos, chunk;
};

class SentenceGrammar {
 public:
  explicit SentenceGrammar(RngStream& rng) : rng_(rng) {}

  std::vector<TaggedToken> sentence() {
    out_.clear();
    clause();
    if (chance(0.2)) {
      emit(",", ",", "O");
      emit(pick_closed({"and", "but", "or"}), "CC", "O");
      clause();
    }
    emit(".", ".", "O");
    return out_;
  }

 private:
  bool chance(double p) { return rng_.uniform() <= p; }

  std::string pick_closed(std::initializer_list<const char*> words) {
    const auto i = rng_.uniform_index(words.size());
    return *(words.begin() + i);
  }

  std::string open_word(const std::string& pos, std::uint64_t vocab) {
    return pseudo_word(pos, skewed_index(rng_, vocab));
  }

  void emit(std::string w, std::string pos, std::string chunk) {
    out_.push_back({std::move(w), std::move(pos), std::move(chunk)});
  }

  void phrase(std::vector<std::pair<std::string, std::string>> words, const std::string& type) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      emit(words[i].first, words[i].second, (i == 0 ? "B-" : "I-") + type);
    }
  }

  void noun_phrase() {
    std::vector<std::pair<std::string, std::string>> np;
    const double r = rng_.uniform();
    if (r < 0.15) {
      np.emplace_back(pick_closed({"he", "she", "it", "they", "we"}), "PRP");
    } else if (r < 0.3) {
      np.emplace_back(open_word("NNP", 300), "NNP");
      if (chance(0.4)) np.emplace_back(open_word("NNP", 300), "NNP");
    } else {
      if (chance(0.7)) np.emplace_back(pick_closed({"the", "a", "this", "some", "every"}), "DT");
      if (chance(0.1)) np.emplace_back(std::to_string(2 + rng_.uniform_index(98)), "CD");
      while (chance(0.35) && np.size() < 5) np.emplace_back(open_word("JJ", 400), "JJ");
      const bool plural = chance(0.35);
      if (chance(0.25)) np.emplace_back(open_word("NN", 1200), "NN");
      np.emplace_back(open_word(plural ? "NNS" : "NN", 1200), plural ? "NNS" : "NN");
    }
    phrase(std::move(np), "NP");
  }

  void verb_phrase() {
    std::vector<std::pair<std::string, std::string>> vp;
    if (chance(0.2)) {
      vp.emplace_back(pick_closed({"will", "can", "may", "should"}), "MD");
      vp.emplace_back(open_word("VB", 500), "VB");
    } else {
      const bool past = chance(0.5);
      vp.emplace_back(open_word(past ? "VBD" : "VBZ", 500), past ? "VBD" : "VBZ");
    }
    phrase(std::move(vp), "VP");
  }

  void clause() {
    noun_phrase();
    if (chance(0.15)) emit(open_word("RB", 100), "RB", "B-ADVP");
    verb_phrase();
    if (chance(0.6)) {
      noun_phrase();
      if (chance(0.1)) noun_phrase();
    }
    for (int i = 0; i < 2; ++i) {
      if (!chance(0.4)) break;
      emit(pick_closed({"in", "on", "with", "of", "for", "from"}), "IN", "B-PP");
      noun_phrase();
    }
  }

  RngStream& rng_;
  std::vector<TaggedToken> out_;
};

}  // namespace synth

inline void write_synthetic_chunking(std::ostream& out, std::size_t sentences, std::uint64_t seed) {
  const RngStream root(seed, streams::kSynthetic);
  for (std::size_t s = 0; s < sentences; ++s) {
    RngStream rng = root.substream(s);
    synth::SentenceGrammar g(rng);
    for (const auto& t : g.sentence()) out << t.word << ' ' << t.pos << ' ' << t.chunk << '\n';
    out << '\n';
  }
}

inline constexpr std::size_t kNBestFeatures = 14;

/// Hypotheses are the reference with random substitutions, deletions and
/// insertions. Features 0..3 are noisy quality signals (edit rate, length
/// mismatch, word count, substitution rate); 4..13 are mostly noise.
inline void write_synthetic_nbest(std::ostream& out, std::size_t ids, std::uint64_t seed,
                                  std::size_t candidates = 10) {
  if (candidates == 0) throw ConfigError("--candidates: must be >= 1");
  const RngStream root(seed, streams::kSynthetic + 1);
  for (std::size_t id = 0; id < ids; ++id) {
    RngStream rng = root.substream(id);
    const std::size_t len = 8 + rng.uniform_index(13);
    std::vector<std::string> ref;
    for (std::size_t i = 0; i < len; ++i) ref.push_back(synth::pseudo_word("", synth::skewed_index(rng, 600)));
    std::string ref_line;
    for (const auto& t : ref) ref_line += (ref_line.empty() ? "" : " ") + t;

    for (std::size_t c = 0; c < candidates; ++c) {
      const double sub = 0.5 * rng.uniform(), del = 0.2 * rng.uniform(), ins = 0.2 * rng.uniform();
      std::vector<std::string> hyp;
      std::size_t n_sub = 0, n_del = 0, n_ins = 0;
      for (const auto& t : ref) {
        if (rng.uniform() <= del) {
          ++n_del;
          continue;
        }
        if (rng.uniform() <= sub) {
          ++n_sub;
          hyp.push_back(synth::pseudo_word("", synth::skewed_index(rng, 600)));
        } else {
          hyp.push_back(t);
        }
        if (rng.uniform() <= ins) {
          ++n_ins;
          hyp.push_back(synth::pseudo_word("", synth::skewed_index(rng, 600)));
        }
      }
      if (hyp.empty()) hyp.push_back(ref.front());
      const double L = static_cast<double>(len);
      std::vector<double> f(kNBestFeatures);
      f[0] = -static_cast<double>(n_sub + n_del + n_ins) / L + 0.15 * rng.normal();
      f[1] = -std::abs(static_cast<double>(hyp.size()) - L) / L + 0.1 * rng.normal();
      f[2] = static_cast<double>(hyp.size()) / 10.0;
      f[3] = -static_cast<double>(n_sub) / L + 0.3 * rng.normal();
      for (std::size_t k = 4; k < kNBestFeatures; ++k) f[k] = rng.normal() + 0.1 * f[0];

      out << id << " |||";
      for (const auto& t : hyp) out << ' ' << t;
      out << " |||";
      for (double v : f) out << ' ' << synth::fixed6(v);
      if (c == 0) out << " ||| " << ref_line;
      out << '\n';
    }
  }
}

/// Topic documents: class c owns a block of the first half of the
/// vocabulary, the second half is shared background. Weights are
/// (1 + log tf) * idf, L2-normalized.
inline void write_synthetic_docs(std::ostream& out, std::size_t docs, std::uint64_t seed,
                                 std::size_t classes = 4, std::size_t vocab = 2000) {
  if (classes < 2) throw ConfigError("--classes: need at least 2");
  if (vocab < 2 * classes) throw ConfigError("--vocab: too small for the number of classes");
  out << "classes=" << classes << " vocab=" << vocab << '\n';
  const RngStream root(seed, streams::kSynthetic + 2);
  const std::size_t topic = vocab / 2 / classes;
  const std::size_t background = vocab - topic * classes;
  for (std::size_t d = 0; d < docs; ++d) {
    RngStream rng = root.substream(d);
    const std::size_t cls = rng.uniform_index(classes);
    const std::size_t len = 20 + rng.uniform_index(41);
    std::map<std::size_t, int> tf;
    for (std::size_t t = 0; t < len; ++t) {
      const double r = rng.uniform();
      std::size_t idx;
      if (r <= 0.3) {
        idx = cls * topic + synth::skewed_index(rng, topic);
      } else if (r <= 0.4) {
        idx = rng.uniform_index(classes) * topic + synth::skewed_index(rng, topic);
      } else {
        idx = topic * classes + synth::skewed_index(rng, background);
      }
      ++tf[idx];
    }
    std::vector<std::pair<std::size_t, double>> w;
    double norm = 0.0;
    for (const auto& [i, c] : tf) {
      const double idf = std::log(static_cast<double>(vocab) / (1.0 + static_cast<double>(i % 97)));
      const double v = (1.0 + std::log(static_cast<double>(c))) * std::max(0.1, idf);
      w.emplace_back(i, v);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    out << cls << '\t';
    for (std::size_t k = 0; k < w.size(); ++k) {
      out << (k ? " " : "") << w[k].first << ':' << synth::fixed6(w[k].second / norm);
    }
    out << '\n';
  }
}

}  // namespace szo
