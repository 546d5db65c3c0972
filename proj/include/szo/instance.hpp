#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "szo/errors.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

/// Feature name -> index registry. Grows while building, read-only once frozen.
class FeatureIndex {
 public:
  static constexpr Index kMissing = ~Index{0};

  /// Index of `name`, registering it while the registry is still building.
  /// Unknown names map to kMissing once frozen.
  Index intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    if (frozen_) return kMissing;
    const auto id = static_cast<Index>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
  }

  Index find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    return it == ids_.end() ? kMissing : it->second;
  }

  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(Index i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  static FeatureIndex from_names(std::vector<std::string> names) {
    FeatureIndex fi;
    for (auto& n : names) {
      if (fi.find(n) != kMissing) throw DataError("feature registry: duplicate name `" + n + "`");
      fi.intern(n);
    }
    fi.freeze();
    return fi;
  }

 private:
  bool frozen_ = false;
  std::vector<std::string> names_;
  std::unordered_map<std::string, Index> ids_;
};

/// Linear scorer w^T phi over a frozen feature space.
class LinearModel {
 public:
  LinearModel(SparseVector weights, std::shared_ptr<const FeatureIndex> features)
      : weights_(std::move(weights)), features_(std::move(features)) {
    if (!features_ || !features_->frozen()) {
      throw ConfigError("LinearModel: feature registry must be frozen before scoring");
    }
    if (features_->size() != weights_.dim()) {
      throw ConfigError("LinearModel: weight dimension does not match feature registry");
    }
  }

  /// Model over an anonymous feature space (e.g. dense reranking features).
  explicit LinearModel(SparseVector weights) : weights_(std::move(weights)) {}

  const SparseVector& weights() const noexcept { return weights_; }
  const FeatureIndex* features() const noexcept { return features_.get(); }
  Index dim() const noexcept { return weights_.dim(); }
  double operator[](Index i) const { return weights_[i]; }
  double score(const SparseVector& phi) const { return dot(weights_, phi); }

 private:
  SparseVector weights_;
  std::shared_ptr<const FeatureIndex> features_;
};

/// One candidate output as seen by a learner: a label and its features.
struct Candidate {
  std::string output;
  SparseVector features;
};

class Instance;

/// Bandit feedback channel. The only route by which a task loss leaves an
/// Instance.
struct Feedback {
  static double loss(const Instance& inst, std::size_t candidate);
};

/// A bandit example: input id, candidate outputs with features, and hidden
/// per-candidate losses in [0, 1].
class Instance {
 public:
  Instance(std::string id, std::vector<Candidate> candidates, std::vector<double> losses)
      : id_(std::move(id)), candidates_(std::move(candidates)), losses_(std::move(losses)) {
    if (candidates_.empty()) throw DataError("instance `" + id_ + "`: no candidates");
    if (losses_.size() != candidates_.size()) {
      throw DataError("instance `" + id_ + "`: loss count does not match candidates");
    }
    const Index dim = candidates_.front().features.dim();
    std::vector<const SparseVector*> supports;
    supports.reserve(candidates_.size());
    for (const auto& c : candidates_) {
      if (c.features.dim() != dim) {
        throw DataError("instance `" + id_ + "`: candidate feature dimensions differ");
      }
      supports.push_back(&c.features);
    }
    for (double l : losses_) {
      if (!(l >= 0.0 && l <= 1.0)) {
        throw DataError("instance `" + id_ + "`: loss outside [0, 1]");
      }
    }
    active_ = ActiveSet::support_union(dim, supports);
  }

  const std::string& id() const noexcept { return id_; }
  std::size_t size() const noexcept { return candidates_.size(); }
  Index dim() const noexcept { return candidates_.front().features.dim(); }
  const std::vector<Candidate>& candidates() const noexcept { return candidates_; }
  const Candidate& candidate(std::size_t i) const { return candidates_.at(i); }
  /// Union of the candidate feature supports.
  const ActiveSet& active_set() const noexcept { return active_; }

 private:
  friend struct Feedback;

  std::string id_;
  std::vector<Candidate> candidates_;
  std::vector<double> losses_;
  ActiveSet active_;
};

inline double Feedback::loss(const Instance& inst, std::size_t candidate) {
  return inst.losses_.at(candidate);
}

/// Clamps a task loss into [0, 1]; returns true when clamping changed it.
inline bool clamp_loss(double& loss) {
  if (std::isnan(loss)) throw DataError("task loss is NaN");
  const double c = std::min(1.0, std::max(0.0, loss));
  const bool changed = c != loss;
  loss = c;
  return changed;
}

}  // namespace szo
