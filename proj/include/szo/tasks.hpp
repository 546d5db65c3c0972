#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "szo/errors.hpp"
#include "szo/instance.hpp"
#include "szo/metrics.hpp"
#include "szo/objectives.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

/// Multiclass classification as a degenerate structured task: candidate c
/// carries the document vector in feature block c (offset c * vocab), and
/// the hidden loss is the 0/1 loss against `gold`.
inline Instance multiclass_instance(const SparseVector& doc, std::size_t num_classes,
                                   std::size_t gold, std::string id = "") {
  if (num_classes < 2) throw ConfigError("multiclass_instance: need at least 2 classes");
  if (gold >= num_classes) throw DataError("multiclass_instance: gold class out of range");
  const std::uint64_t dim = std::uint64_t{doc.dim()} * num_classes;
  if (dim > kMaxDim) throw DataError("multiclass_instance: feature space too large");
  std::vector<Candidate> cands;
  std::vector<double> losses;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<Index> idx(doc.indices().begin(), doc.indices().end());
    const auto offset = static_cast<Index>(c * doc.dim());
    for (Index& i : idx) i += offset;
    cands.push_back({std::to_string(c),
                     SparseVector::from_sorted(static_cast<Index>(dim), idx, doc.values())});
    losses.push_back(zero_one_loss(c, gold));
  }
  return Instance(std::move(id), std::move(cands), std::move(losses));
}

/// Index of the MAP candidate for each instance.
template <class Weights>
std::vector<std::size_t> map_predictions(const Weights& w, std::span<const Instance> insts) {
  std::vector<std::size_t> out;
  out.reserve(insts.size());
  for (const auto& inst : insts) out.push_back(map_argmax(candidate_scores(w, inst)));
  return out;
}

/// Accuracy of MAP predictions (classes are candidate indices).
template <class Weights>
double multiclass_accuracy(const Weights& w, std::span<const Instance> insts) {
  if (insts.empty()) throw DataError("multiclass_accuracy: empty set");
  double correct = 0.0;
  for (const auto& inst : insts) {
    correct += 1.0 - Feedback::loss(inst, map_argmax(candidate_scores(w, inst)));
  }
  return correct / static_cast<double>(insts.size());
}

/// Splits on single spaces, dropping empty tokens.
inline std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Corpus BLEU of MAP-selected hypotheses against per-instance references.
template <class Weights>
double rerank_bleu(const Weights& w, std::span<const Instance> insts,
                   std::span<const std::vector<std::string>> refs) {
  if (insts.size() != refs.size() || insts.empty()) {
    throw DataError("rerank_bleu: need one reference per instance");
  }
  std::vector<TokenPair> pairs;
  pairs.reserve(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const auto best = map_argmax(candidate_scores(w, insts[i]));
    pairs.emplace_back(tokenize(insts[i].candidate(best).output), refs[i]);
  }
  return corpus_bleu(pairs);
}

}  // namespace szo
