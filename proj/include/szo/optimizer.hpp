#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "szo/errors.hpp"
#include "szo/estimators.hpp"
#include "szo/instance.hpp"
#include "szo/objectives.hpp"
#include "szo/perturbation.hpp"
#include "szo/rng.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

enum class PerturbationMode { kAll, kSparse };

inline std::string_view to_string(PerturbationMode m) {
  return m == PerturbationMode::kAll ? "all" : "sparse";
}

inline PerturbationMode parse_perturbation_mode(std::string_view s) {
  if (s == "all" || s == "ALL") return PerturbationMode::kAll;
  if (s == "sparse" || s == "SPARSE") return PerturbationMode::kSparse;
  throw ConfigError("unknown perturbation mode `" + std::string(s) + "`");
}

struct RunConfig {
  UpdateRule rule = UpdateRule::kTwoPoint;
  double mu = 0.01;
  double h = 0.01;  // constant learning rate
  std::uint64_t max_iters = 1000;
  std::uint64_t eval_every = 1000;
  std::uint64_t seed = 1;
  PerturbationMode mode = PerturbationMode::kSparse;
  ObjectiveSpec objective;

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("--h: learning rate must be > 0");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("--mu: smoothing must be > 0");
    if (max_iters < 1) throw ConfigError("--iters: need at least one iteration");
    if (eval_every < 1) throw ConfigError("--eval-every: must be >= 1");
    if (objective.kind == ObjectiveKind::kAnnealedLoss && !(objective.gamma >= 0.0)) {
      throw ConfigError("--gamma: temperature must be >= 0");
    }
  }
};

/// Per-step query bound to a drawn sample x_k.
template <class Q>
concept BanditQuery = requires(const Q& q, std::span<const double> w, const SparseVector& u,
                               double s) {
  { q.active_set() } -> std::convertible_to<const ActiveSet&>;
  { q.loss(w, u, s) } -> std::convertible_to<double>;
};

/// Query that exposes an explicit candidate list (needed by the SFO rule).
template <class Q>
concept CandidateQuery = BanditQuery<Q> && requires(const Q& q) {
  { q.instance() } -> std::convertible_to<const Instance&>;
};

/// A stochastic objective that hands out per-step queries and can score the
/// unperturbed iterate on held-out data.
template <class P>
concept BanditProblem = requires(const P& p, std::span<const double> w, RngStream& rng) {
  { p.dimension() } -> std::convertible_to<Index>;
  { p.draw(w, rng) } -> BanditQuery;
  { p.has_dev() } -> std::convertible_to<bool>;
  { p.evaluate(w) } -> std::convertible_to<double>;
  { p.higher_is_better() } -> std::convertible_to<bool>;
};

struct OptimizerState {
  std::vector<double> w;
  std::uint64_t k = 0;
  BaselineState baseline;
  double cumulative_loss = 0.0;

  explicit OptimizerState(Index dim) : w(dim, 0.0) {}

  SparseVector weights() const { return SparseVector::from_dense(w); }
};

/// What one step did; exposed to hooks (step size and ||delta||^2 feed the
/// convergence-bound checks).
struct StepInfo {
  std::uint64_t k = 0;  // iterations completed, including this one
  double loss = 0.0;    // observed (perturbed) loss
  double avg_cum_loss = 0.0;
  std::size_t nbar = 0;
  double h = 0.0;
  double delta_norm_sq = 0.0;
};

struct LogRow {
  std::uint64_t iter = 0;
  double loss = 0.0;
  double avg_cum_loss = 0.0;
  std::uint64_t nbar = 0;
  std::optional<double> dev_metric;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

struct RunLog {
  std::vector<LogRow> rows;

  friend bool operator==(const RunLog&, const RunLog&) = default;
};

/// Mean of the first t observed losses.
inline double avg_cumulative_loss(const RunLog& log, std::uint64_t t) {
  if (t < 1 || t > log.rows.size()) {
    throw std::out_of_range("avg_cumulative_loss: t outside [1, " +
                            std::to_string(log.rows.size()) + "]");
  }
  double sum = 0.0;
  for (std::uint64_t i = 0; i < t; ++i) sum += log.rows[i].loss;
  return sum / static_cast<double>(t);
}

/// One SZO-SP iteration (or one SFO iteration) on `query`; updates `state`
/// in place.
template <BanditQuery Query>
StepInfo step(OptimizerState& state, const Query& query, const RunConfig& config) {
  const Index dim = static_cast<Index>(state.w.size());
  const std::span<const double> w(state.w);
  RuleOutput out;
  std::size_t nbar = 0;

  if (config.rule == UpdateRule::kSfo) {
    if constexpr (CandidateQuery<Query>) {
      RngStream rng = RngStream(config.seed, streams::kPolicy).substream(state.k);
      out = sfo_delta(w, query.instance(), rng);
      nbar = query.active_set().size();
    } else {
      throw ConfigError("--rule sfo needs a task with explicit candidate outputs");
    }
  } else {
    RngStream rng = RngStream(config.seed, streams::kPerturbation).substream(state.k);
    const Perturbation pert = config.mode == PerturbationMode::kSparse
                                  ? sample_sparse_gaussian(query.active_set(), rng)
                                  : sample_sparse_gaussian(ActiveSet::all(dim), rng);
    nbar = pert.effective_dim;
    auto eval = [&](const SparseVector& u, double s) { return query.loss(w, u, s); };
    switch (config.rule) {
      case UpdateRule::kTwoPoint:
        out = two_point_delta(eval, pert, config.mu);
        break;
      case UpdateRule::kFunctionComparison:
        out = function_comparison_delta(eval, pert, config.mu);
        break;
      case UpdateRule::kBaselineComparison:
        out = baseline_comparison_delta(eval, pert, config.mu, state.baseline);
        break;
      case UpdateRule::kSfo:
        break;
    }
  }

  const double dn = l2_norm_sq(out.delta);
  if (!std::isfinite(dn) || !std::isfinite(out.observed_loss)) {
    throw NumericalError("non-finite update at iteration " + std::to_string(state.k + 1) +
                         " (loss=" + format_double(out.observed_loss) +
                         ", ||delta||^2=" + format_double(dn) + ")");
  }
  axpy_inplace(-config.h, out.delta, state.w);
  state.cumulative_loss += out.observed_loss;
  ++state.k;
  return {state.k, out.observed_loss, state.cumulative_loss / static_cast<double>(state.k), nbar,
          config.h, dn};
}

struct RunHooks {
  std::function<void(std::span<const double> w0)> on_start;
  /// Called after every step; returning false stops the run early.
  std::function<bool(const StepInfo&, std::span<const double> w)> on_step;
};

struct RunResult {
  RunLog log;
  SparseVector final_weights;
  std::optional<SparseVector> best_checkpoint;
  std::optional<std::uint64_t> best_iter;
  std::optional<double> best_dev;
  std::vector<std::string> warnings;
};

/// Runs the training loop with periodic dev evaluation of the unperturbed
/// iterate and keeps the best checkpoint (earliest on ties).
template <BanditProblem Problem>
RunResult run(const RunConfig& config, const Problem& problem, const RunHooks& hooks = {}) {
  config.validate();
  OptimizerState state(problem.dimension());
  RunResult result;
  const bool dev = problem.has_dev();
  if (!dev) result.warnings.emplace_back("empty dev set: no checkpoint selection");
  if (hooks.on_start) hooks.on_start(state.w);

  result.log.rows.reserve(config.max_iters);
  while (state.k < config.max_iters) {
    RngStream data = RngStream(config.seed, streams::kData).substream(state.k);
    const auto query = problem.draw(std::span<const double>(state.w), data);
    const StepInfo info = step(state, query, config);
    LogRow row{info.k, info.loss, info.avg_cum_loss, info.nbar, std::nullopt};
    if (dev && (info.k % config.eval_every == 0 || info.k == config.max_iters)) {
      const double m = problem.evaluate(std::span<const double>(state.w));
      row.dev_metric = m;
      const bool better = !result.best_dev ||
                          (problem.higher_is_better() ? m > *result.best_dev : m < *result.best_dev);
      if (better) {
        result.best_dev = m;
        result.best_iter = info.k;
        result.best_checkpoint = state.weights();
      }
    }
    result.log.rows.push_back(row);
    if (hooks.on_step && !hooks.on_step(info, state.w)) break;
  }
  result.final_weights = state.weights();
  return result;
}

// ---------------------------------------------------------------------------
// Problems over synthetic functions and fixed candidate lists

/// Bandit problem over a SyntheticFunction; x_k is a fresh 64-bit sample id.
class SyntheticProblem {
 public:
  struct Query {
    const SyntheticFunction* f;
    SyntheticFunction::Sample x;
    ActiveSet active;

    const ActiveSet& active_set() const noexcept { return active; }
    double loss(std::span<const double> w, const SparseVector& u, double s) const {
      return f->value_on(active, w, x, &u, s);
    }
  };

  explicit SyntheticProblem(SyntheticFunction f, std::size_t dev_samples = 200,
                            std::uint64_t dev_seed = 0xDE7ull)
      : f_(std::move(f)) {
    RngStream rng(dev_seed, streams::kSynthetic);
    dev_.reserve(dev_samples);
    for (std::size_t i = 0; i < dev_samples; ++i) dev_.push_back(rng.next_u64());
  }

  const SyntheticFunction& function() const noexcept { return f_; }
  Index dimension() const noexcept { return f_.dimension(); }

  Query draw(std::span<const double>, RngStream& rng) const {
    const auto x = rng.next_u64();
    return Query{&f_, x, f_.active_set(x)};
  }

  bool has_dev() const noexcept { return !dev_.empty(); }
  bool higher_is_better() const noexcept { return false; }

  /// Mean unperturbed loss over the held-out sample ids.
  double evaluate(std::span<const double> w) const {
    double s = 0.0;
    for (auto x : dev_) s += f_.value(w, x);
    return dev_.empty() ? 0.0 : s / static_cast<double>(dev_.size());
  }

 private:
  SyntheticFunction f_;
  std::vector<SyntheticFunction::Sample> dev_;
};

/// Bandit problem over fixed candidate lists (reranking, multiclass).
class InstanceProblem {
 public:
  using DevMetric = std::function<double(std::span<const double>)>;

  struct Query {
    const Instance* inst;
    const ObjectiveSpec* objective;

    const ActiveSet& active_set() const noexcept { return inst->active_set(); }
    const Instance& instance() const noexcept { return *inst; }
    double loss(std::span<const double> w, const SparseVector& u, double s) const {
      return candidate_loss(*objective, candidate_scores(w, *inst, &u, s), *inst);
    }
  };

  InstanceProblem(std::vector<Instance> train, ObjectiveSpec objective, DevMetric dev_metric = {},
                  bool higher_is_better = true)
      : train_(std::move(train)),
        objective_(objective),
        dev_metric_(std::move(dev_metric)),
        higher_is_better_(higher_is_better) {
    if (train_.empty()) throw DataError("training set is empty");
    if (objective_.kind == ObjectiveKind::kSynthetic) {
      throw ConfigError("candidate tasks need the map or annealed objective");
    }
    dim_ = train_.front().dim();
    for (const auto& i : train_) {
      if (i.dim() != dim_) throw DataError("training instances disagree on feature dimension");
    }
  }

  Index dimension() const noexcept { return dim_; }
  const std::vector<Instance>& train() const noexcept { return train_; }

  Query draw(std::span<const double>, RngStream& rng) const {
    return Query{&train_[rng.uniform_index(train_.size())], &objective_};
  }

  bool has_dev() const noexcept { return static_cast<bool>(dev_metric_); }
  bool higher_is_better() const noexcept { return higher_is_better_; }
  double evaluate(std::span<const double> w) const { return dev_metric_(w); }

 private:
  std::vector<Instance> train_;
  ObjectiveSpec objective_;
  DevMetric dev_metric_;
  bool higher_is_better_;
  Index dim_ = 0;
};

}  // namespace szo
