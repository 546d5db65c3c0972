#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "szo/errors.hpp"
#include "szo/instance.hpp"
#include "szo/perturbation.hpp"
#include "szo/rng.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

// ---------------------------------------------------------------------------
// Candidate-set criteria

enum class ObjectiveKind { kMapLoss, kAnnealedLoss, kSynthetic };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kMapLoss;
  /// Softmax temperature for the annealed criterion; +inf is the MAP limit.
  double gamma = std::numeric_limits<double>::infinity();
};

inline double score(std::span<const double> w, const SparseVector& phi) { return dot(w, phi); }
inline double score(const SparseVector& w, const SparseVector& phi) { return dot(w, phi); }
inline double score(const LinearModel& m, const SparseVector& phi) { return m.score(phi); }

/// Candidate scores under w + scale * shift (shift may be null).
template <class Weights>
std::vector<double> candidate_scores(const Weights& w, const Instance& inst,
                                     const SparseVector* shift = nullptr, double scale = 0.0) {
  std::vector<double> s;
  s.reserve(inst.size());
  for (const auto& c : inst.candidates()) {
    double v = score(w, c.features);
    if (shift != nullptr && scale != 0.0) v += scale * dot(*shift, c.features);
    s.push_back(v);
  }
  return s;
}

/// Highest score; ties go to the lowest candidate index.
inline std::size_t map_argmax(std::span<const double> scores) {
  if (scores.empty()) throw DataError("argmax over an empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

inline double map_loss_from_scores(std::span<const double> scores, const Instance& inst) {
  return Feedback::loss(inst, map_argmax(scores));
}

/// Softmax(gamma * scores) weights, computed with max subtraction.
inline std::vector<double> softmax(std::span<const double> scores, double gamma) {
  std::vector<double> p(scores.size(), 0.0);
  if (scores.empty()) return p;
  if (std::isinf(gamma)) {
    p[map_argmax(scores)] = 1.0;
    return p;
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = gamma == 0.0 ? 1.0 : std::exp(gamma * (scores[i] - mx));
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

inline double annealed_loss_from_scores(std::span<const double> scores, const Instance& inst,
                                        double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("annealed_loss: gamma must be >= 0");
  if (std::isinf(gamma)) return map_loss_from_scores(scores, inst);
  const auto p = softmax(scores, gamma);
  double lo = 1.0, hi = 0.0, e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = Feedback::loss(inst, i);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    e += p[i] * d;
  }
  return std::clamp(e, lo, hi);
}

/// Task loss of the MAP prediction.
template <class Weights>
double map_loss(const Weights& w, const Instance& inst) {
  return map_loss_from_scores(candidate_scores(w, inst), inst);
}

/// Expected task loss under the temperature-gamma softmax over candidates.
template <class Weights>
double annealed_loss(const Weights& w, const Instance& inst, double gamma) {
  return annealed_loss_from_scores(candidate_scores(w, inst), inst, gamma);
}

inline double candidate_loss(const ObjectiveSpec& spec, std::span<const double> scores,
                             const Instance& inst) {
  switch (spec.kind) {
    case ObjectiveKind::kMapLoss:
      return map_loss_from_scores(scores, inst);
    case ObjectiveKind::kAnnealedLoss:
      return annealed_loss_from_scores(scores, inst, spec.gamma);
    case ObjectiveKind::kSynthetic:
      break;
  }
  throw ConfigError("candidate_loss: synthetic objective has no candidate set");
}

// ---------------------------------------------------------------------------
// Gaussian smoothing

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Running mean/variance (Welford). A constant stream has a mean equal to the
/// constant bitwise.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const noexcept {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Monte Carlo estimate of f_mu(w) = E_u[F(w + mu u)] with u sparse Gaussian
/// on `active`. `eval(u, scale)` must return F(w + scale * u) for the bound
/// (w, x).
template <class Eval>
MeanEstimate smoothed_value(const Eval& eval, double mu, const ActiveSet& active,
                            std::size_t num_samples, RngStream& rng) {
  if (!(mu > 0.0)) throw ConfigError("smoothed_value: mu must be positive");
  RunningStats st;
  for (std::size_t s = 0; s < num_samples; ++s) {
    const Perturbation p = sample_sparse_gaussian(active, rng);
    st.add(eval(p.vector, mu));
  }
  return {st.mean(), st.std_error()};
}

// ---------------------------------------------------------------------------
// Synthetic functions with known Lipschitz constant and lower bound

enum class SyntheticKind { kL1Well, kSmoothBowl, kNonconvexRipple };

/// How each sample's active coordinates are chosen. kFixed: one set A shared
/// by every sample. kScattered: sample x draws its own n_bar-subset A_x.
enum class SupportLayout { kFixed, kScattered };

inline std::string_view to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kL1Well: return "l1_well";
    case SyntheticKind::kSmoothBowl: return "smooth_bowl";
    case SyntheticKind::kNonconvexRipple: return "nonconvex_ripple";
  }
  return "?";
}

inline SyntheticKind parse_synthetic_kind(std::string_view id) {
  if (id == "l1_well") return SyntheticKind::kL1Well;
  if (id == "smooth_bowl") return SyntheticKind::kSmoothBowl;
  if (id == "nonconvex_ripple") return SyntheticKind::kNonconvexRipple;
  throw ConfigError("unknown synthetic function `" + std::string(id) + "`");
}

inline SupportLayout parse_support_layout(std::string_view s) {
  if (s == "fixed") return SupportLayout::kFixed;
  if (s == "scattered") return SupportLayout::kScattered;
  throw ConfigError("unknown support layout `" + std::string(s) + "`");
}

/// Stochastic test function F(w, x) over R^n where only n_bar coordinates
/// influence each sample:
///
///   l1_well          ||w_A - c_x||_1                           L0 = sqrt(n_bar), f* = 0
///   smooth_bowl      sqrt(1 + ||w_A - c_x||^2) - 1             L0 = 1,           f* = 0
///   nonconvex_ripple ||w_A - c_x||_1 + 0.1 sum_A sin(w_i)      L0 = 1.1 sqrt(n_bar),
///                                                              f* = -0.1 n_bar
///
/// c_x = c + 0.1 * xi_x with a shared center c ~ N(0, I) and per-sample
/// jitter xi_x ~ N(0, I), all derived from the seed by hashing.
class SyntheticFunction {
 public:
  using Sample = std::uint64_t;

  static constexpr double kJitter = 0.1;
  static constexpr double kRipple = 0.1;

  SyntheticFunction(SyntheticKind kind, Index n, Index n_bar, std::uint64_t seed,
                    SupportLayout layout = SupportLayout::kFixed)
      : kind_(kind), n_(n), n_bar_(n_bar), seed_(seed), layout_(layout) {
    if (n == 0) throw ConfigError("synthetic function: n must be positive");
    if (n_bar == 0 || n_bar > n) throw ConfigError("synthetic function: need 1 <= n_bar <= n");
    fixed_ = draw_subset(detail::splitmix64(seed ^ 0xA11CEull));
    center_.resize(n);
    for (Index i = 0; i < n; ++i) center_[i] = keyed_normal(seed, 0xCE17E5ull, i);
  }

  SyntheticKind kind() const noexcept { return kind_; }
  SupportLayout layout() const noexcept { return layout_; }
  Index dimension() const noexcept { return n_; }
  Index active_dim() const noexcept { return n_bar_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool smooth() const noexcept { return kind_ == SyntheticKind::kSmoothBowl; }

  double lipschitz() const noexcept {
    const double r = std::sqrt(static_cast<double>(n_bar_));
    switch (kind_) {
      case SyntheticKind::kL1Well: return r;
      case SyntheticKind::kSmoothBowl: return 1.0;
      case SyntheticKind::kNonconvexRipple: return (1.0 + kRipple) * r;
    }
    return r;
  }

  /// Lower bound f* with F(w, x) >= f* for all w, x.
  double lower_bound() const noexcept {
    return kind_ == SyntheticKind::kNonconvexRipple ? -kRipple * n_bar_ : 0.0;
  }

  ActiveSet active_set(Sample x) const {
    if (layout_ == SupportLayout::kFixed) return fixed_;
    return draw_subset(detail::splitmix64(x ^ detail::splitmix64(seed_ + 0x5CA7ull)));
  }

  double offset(Sample x, Index i) const {
    return center_.at(i) + kJitter * keyed_normal(seed_ ^ 0x0FF5E7ull, x, i);
  }

  double center(Index i) const { return center_.at(i); }

  /// F(w + scale * shift, x); `w` is anything indexable by coordinate.
  template <class Weights>
  double value(const Weights& w, Sample x, const SparseVector* shift = nullptr,
               double scale = 0.0) const {
    const ActiveSet a = active_set(x);
    return value_on(a, w, x, shift, scale);
  }

  template <class Weights>
  double value_on(const ActiveSet& a, const Weights& w, Sample x, const SparseVector* shift,
                  double scale) const {
    const auto idx = a.indices();
    std::span<const Index> si;
    std::span<const double> sv;
    if (shift != nullptr && scale != 0.0) {
      si = shift->indices();
      sv = shift->values();
    }
    std::size_t j = 0;
    double abs_sum = 0.0, sq_sum = 0.0, sin_sum = 0.0;
    for (Index i : idx) {
      double wi = w[i];
      while (j < si.size() && si[j] < i) ++j;
      if (j < si.size() && si[j] == i) wi += scale * sv[j];
      const double z = wi - offset(x, i);
      abs_sum += std::abs(z);
      sq_sum += z * z;
      sin_sum += std::sin(wi);
    }
    switch (kind_) {
      case SyntheticKind::kL1Well: return abs_sum;
      case SyntheticKind::kSmoothBowl: return std::sqrt(1.0 + sq_sum) - 1.0;
      case SyntheticKind::kNonconvexRipple:
        return std::max(lower_bound(), abs_sum + kRipple * sin_sum);
    }
    return abs_sum;
  }

 private:
  // Floyd's sampling of n_bar distinct coordinates.
  ActiveSet draw_subset(std::uint64_t key) const {
    if (n_bar_ == n_) return ActiveSet::all(n_);
    RngStream rng(seed_, key);
    std::vector<Index> chosen;
    chosen.reserve(n_bar_);
    for (Index j = n_ - n_bar_; j < n_; ++j) {
      const auto t = static_cast<Index>(rng.uniform_index(std::uint64_t{j} + 1));
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
        chosen.push_back(t);
      } else {
        chosen.push_back(j);
      }
    }
    return ActiveSet(n_, std::move(chosen));
  }

  SyntheticKind kind_;
  Index n_;
  Index n_bar_;
  std::uint64_t seed_;
  SupportLayout layout_;
  ActiveSet fixed_;
  std::vector<double> center_;
};

inline SyntheticFunction make_synthetic(std::string_view id, Index n, Index n_bar,
                                        std::uint64_t seed,
                                        SupportLayout layout = SupportLayout::kFixed) {
  return SyntheticFunction(parse_synthetic_kind(id), n, n_bar, seed, layout);
}

}  // namespace szo
