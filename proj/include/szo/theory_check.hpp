#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "szo/errors.hpp"
#include "szo/objectives.hpp"
#include "szo/optimizer.hpp"
#include "szo/perturbation.hpp"
#include "szo/rng.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

/// Anything that behaves like SyntheticFunction for the checks below.
template <class F>
concept SmoothableFunction = requires(const F& f, std::span<const double> w, std::uint64_t x,
                                      const ActiveSet& a, const SparseVector* u) {
  { f.dimension() } -> std::convertible_to<Index>;
  { f.active_set(x) } -> std::convertible_to<ActiveSet>;
  { f.value_on(a, w, x, u, 1.0) } -> std::convertible_to<double>;
};

struct BoundReport {
  std::string check;
  double lhs = 0.0;
  double lhs_stderr = 0.0;
  double rhs = 0.0;
  bool pass = false;
  std::optional<double> expected;  // closed-form value of lhs, when known
  std::optional<bool> consistent;  // |lhs - expected| <= 3 stderr
  std::map<std::string, double> params;

  void settle() {
    pass = lhs <= rhs + 3.0 * lhs_stderr;
    if (expected) consistent = std::abs(lhs - *expected) <= 3.0 * lhs_stderr;
  }
};

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["check"] = r.check;
  j["lhs"] = r.lhs;
  j["lhs_stderr"] = r.lhs_stderr;
  j["rhs"] = r.rhs;
  j["pass"] = r.pass;
  if (r.expected) j["expected"] = *r.expected;
  if (r.consistent) j["consistent"] = *r.consistent;
  j["params"] = r.params;
  return j;
}

// ---------------------------------------------------------------------------
// Second moments of the sparse Gaussian

inline constexpr std::size_t kMinBoundSamples = 100'000;

/// E||u||^p on d coordinates against (p + d)^{p/2}.
inline BoundReport moment_bound_check(std::size_t d, int p, std::size_t samples, RngStream& rng) {
  if (p != 2 && p != 4) throw ConfigError("--p: moment order must be 2 or 4");
  if (samples < kMinBoundSamples) throw ConfigError("--samples: need at least 100000 samples");
  if (d > kMaxDim) throw ConfigError("--dims: dimension too large");
  BoundReport r;
  r.check = "lemma2";
  const double dd = static_cast<double>(d);
  r.rhs = std::pow(p + dd, p / 2.0);
  r.expected = p == 2 ? dd : dd * dd + 2.0 * dd;
  if (d > 0) {
    const auto m = moment_statistics(ActiveSet::all(static_cast<Index>(d)), p, samples, rng);
    r.lhs = m.mean;
    r.lhs_stderr = m.std_error;
  }
  r.params = {{"d", dd}, {"p", static_cast<double>(p)}, {"samples", static_cast<double>(samples)}};
  r.settle();
  return r;
}

// ---------------------------------------------------------------------------
// Smoothed gradient

/// Unbiased Monte Carlo estimate of ||grad f_mu(w)||^2 from `samples`
/// two-point estimates s_i: (||sum s_i||^2 - sum ||s_i||^2) / (B (B - 1)).
/// The standard error is a delete-one-batch jackknife over 20 batches.
template <SmoothableFunction F>
MeanEstimate smoothed_gradient_norm_sq(const F& f, std::span<const double> w, double mu,
                                       std::size_t samples, RngStream& rng) {
  if (!(mu > 0.0)) throw ConfigError("--mu: smoothing must be > 0");
  if (samples < 40) throw ConfigError("gradient estimate: need at least 40 samples");
  constexpr std::size_t kBatches = 20;
  const Index n = f.dimension();
  std::vector<double> total(n, 0.0);
  std::vector<std::vector<std::pair<Index, double>>> batch_sum(kBatches);
  std::vector<double> batch_q(kBatches, 0.0);
  std::vector<std::size_t> batch_n(kBatches, 0);
  std::vector<double> scratch(n, 0.0);
  std::vector<Index> touched;
  double q_total = 0.0;

  for (std::size_t b = 0; b < kBatches; ++b) {
    const std::size_t lo = samples * b / kBatches, hi = samples * (b + 1) / kBatches;
    touched.clear();
    for (std::size_t s = lo; s < hi; ++s) {
      const auto x = rng.next_u64();
      const ActiveSet a = f.active_set(x);
      const Perturbation p = sample_sparse_gaussian(a, rng);
      const double diff =
          (f.value_on(a, w, x, &p.vector, mu) - f.value_on(a, w, x, nullptr, 0.0)) / mu;
      double sq = 0.0;
      for (std::size_t k = 0; k < p.vector.nnz(); ++k) {
        const Index i = p.vector.indices()[k];
        const double v = diff * p.vector.values()[k];
        if (scratch[i] == 0.0) touched.push_back(i);
        scratch[i] += v;
        sq += v * v;
      }
      batch_q[b] += sq;
    }
    batch_n[b] = hi - lo;
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (Index i : touched) {
      batch_sum[b].emplace_back(i, scratch[i]);
      total[i] += scratch[i];
      scratch[i] = 0.0;
    }
    q_total += batch_q[b];
  }

  auto u_stat = [](double s_sq, double q, double count) {
    return (s_sq - q) / (count * (count - 1.0));
  };
  double total_sq = 0.0;
  for (double t : total) total_sq += t * t;
  const double full = u_stat(total_sq, q_total, static_cast<double>(samples));

  std::vector<double> loo(kBatches);
  for (std::size_t b = 0; b < kBatches; ++b) {
    // ||T - S_b||^2 = ||T||^2 - 2 T.S_b + ||S_b||^2
    double cross = 0.0, own = 0.0;
    for (const auto& [i, v] : batch_sum[b]) {
      cross += total[i] * v;
      own += v * v;
    }
    loo[b] = u_stat(total_sq - 2.0 * cross + own, q_total - batch_q[b],
                    static_cast<double>(samples - batch_n[b]));
  }
  double mean_loo = 0.0;
  for (double v : loo) mean_loo += v;
  mean_loo /= kBatches;
  double var = 0.0;
  for (double v : loo) var += (v - mean_loo) * (v - mean_loo);
  var *= static_cast<double>(kBatches - 1) / kBatches;
  return {full, std::sqrt(var)};
}

/// Monte Carlo f_mu(w) = E_x E_u F(w + mu u, x).
template <SmoothableFunction F>
MeanEstimate smoothed_function_value(const F& f, std::span<const double> w, double mu,
                                     std::size_t samples, RngStream& rng) {
  RunningStats st;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto x = rng.next_u64();
    const ActiveSet a = f.active_set(x);
    const Perturbation p = sample_sparse_gaussian(a, rng);
    st.add(f.value_on(a, w, x, &p.vector, mu));
  }
  return {st.mean(), st.std_error()};
}

// ---------------------------------------------------------------------------
// Estimator bias

struct BiasReport {
  std::vector<Index> coords;
  std::vector<double> estimator_mean, estimator_stderr;
  std::vector<double> fd_mean, fd_stderr;
  std::vector<double> z;
  double max_abs_z = 0.0;
  double threshold = 4.0;
  bool pass = false;
  std::map<std::string, double> params;
};

inline nlohmann::json to_json(const BiasReport& r) {
  nlohmann::json j;
  j["check"] = "lemma1";
  j["max_abs_z"] = r.max_abs_z;
  j["threshold"] = r.threshold;
  j["pass"] = r.pass;
  j["coords"] = r.coords;
  j["estimator_mean"] = r.estimator_mean;
  j["fd_mean"] = r.fd_mean;
  j["z"] = r.z;
  j["params"] = r.params;
  return j;
}

/// Compares the mean two-point estimate with central finite differences of
/// Monte Carlo f_mu (common random numbers across the two sides), one
/// coordinate at a time. Each side gets `samples` fresh draws.
template <SmoothableFunction F>
BiasReport estimator_bias_check(const F& f, std::span<const double> w, double mu,
                                std::size_t samples, RngStream& rng, double fd_step = 1e-3,
                                std::span<const Index> coords = {}, double threshold = 4.0) {
  if (samples < kMinBoundSamples) throw ConfigError("--samples: need at least 100000 samples");
  if (!(mu > 0.0)) throw ConfigError("--mu: smoothing must be > 0");
  const Index n = f.dimension();
  if (w.size() != n) throw ConfigError("estimator_bias_check: iterate has the wrong dimension");
  BiasReport r;
  r.threshold = threshold;
  if (coords.empty()) {
    for (Index i = 0; i < n; ++i) r.coords.push_back(i);
  } else {
    r.coords.assign(coords.begin(), coords.end());
  }
  const std::size_t m = r.coords.size();
  std::vector<std::size_t> slot(n, m);
  for (std::size_t c = 0; c < m; ++c) slot.at(r.coords[c]) = c;

  std::vector<RunningStats> est(m);
  {
    RngStream s = rng.substream(0);
    std::vector<double> sample(m, 0.0);
    for (std::size_t t = 0; t < samples; ++t) {
      const auto x = s.next_u64();
      const ActiveSet a = f.active_set(x);
      const Perturbation p = sample_sparse_gaussian(a, s);
      const double diff = (f.value_on(a, w, x, &p.vector, mu) - f.value_on(a, w, x, nullptr, 0.0)) / mu;
      std::fill(sample.begin(), sample.end(), 0.0);
      for (std::size_t k = 0; k < p.vector.nnz(); ++k) {
        const std::size_t c = slot[p.vector.indices()[k]];
        if (c < m) sample[c] = diff * p.vector.values()[k];
      }
      for (std::size_t c = 0; c < m; ++c) est[c].add(sample[c]);
    }
  }

  std::vector<double> wp(w.begin(), w.end());
  for (std::size_t c = 0; c < m; ++c) {
    const Index i = r.coords[c];
    RngStream s = rng.substream(1 + c);
    RunningStats fd;
    for (std::size_t t = 0; t < samples; ++t) {
      const auto x = s.next_u64();
      const ActiveSet a = f.active_set(x);
      const Perturbation p = sample_sparse_gaussian(a, s);
      wp[i] = w[i] + fd_step;
      const double up = f.value_on(a, std::span<const double>(wp), x, &p.vector, mu);
      wp[i] = w[i] - fd_step;
      const double down = f.value_on(a, std::span<const double>(wp), x, &p.vector, mu);
      wp[i] = w[i];
      fd.add((up - down) / (2.0 * fd_step));
    }
    const double se = std::hypot(est[c].std_error(), fd.std_error());
    const double gap = est[c].mean() - fd.mean();
    const double z = se > 0.0 ? gap / se
                     : gap == 0.0 ? 0.0
                                  : std::copysign(std::numeric_limits<double>::infinity(), gap);
    r.estimator_mean.push_back(est[c].mean());
    r.estimator_stderr.push_back(est[c].std_error());
    r.fd_mean.push_back(fd.mean());
    r.fd_stderr.push_back(fd.std_error());
    r.z.push_back(z);
    r.max_abs_z = std::max(r.max_abs_z, std::abs(z));
  }
  r.pass = r.max_abs_z < threshold;
  r.params = {{"n", static_cast<double>(n)},
              {"mu", mu},
              {"samples", static_cast<double>(samples)},
              {"fd_step", fd_step}};
  return r;
}

// ---------------------------------------------------------------------------
// Second moment of the estimator

/// Sample mean of ||s_mu(w)||^2 against L0^2 (n_bar + 4)^2.
template <SmoothableFunction F>
BoundReport second_moment_check(const F& f, std::span<const double> w, double mu,
                                std::size_t samples, double lipschitz, std::size_t n_bar,
                                RngStream& rng) {
  if (samples < kMinBoundSamples) throw ConfigError("--samples: need at least 100000 samples");
  if (!(mu > 0.0)) throw ConfigError("--mu: smoothing must be > 0");
  RunningStats st;
  for (std::size_t t = 0; t < samples; ++t) {
    const auto x = rng.next_u64();
    const ActiveSet a = f.active_set(x);
    const Perturbation p = sample_sparse_gaussian(a, rng);
    const double diff = (f.value_on(a, w, x, &p.vector, mu) - f.value_on(a, w, x, nullptr, 0.0)) / mu;
    st.add(diff * diff * l2_norm_sq(p.vector));
  }
  BoundReport r;
  r.check = "second_moment";
  r.lhs = st.mean();
  r.lhs_stderr = st.std_error();
  const double nb = static_cast<double>(n_bar);
  r.rhs = lipschitz * lipschitz * (nb + 4.0) * (nb + 4.0);
  r.params = {{"n", static_cast<double>(f.dimension())},
              {"n_bar", nb},
              {"mu", mu},
              {"L0", lipschitz},
              {"samples", static_cast<double>(samples)}};
  r.settle();
  return r;
}

// ---------------------------------------------------------------------------
// Convergence bound of the smoothed gradient

/// (1/S_N) ((f_mu(w0) - f*) + 1/2 L1 (n_bar + 4)^2 L0^2 sum h_k^2)
inline double theorem1_rhs(double f_mu_w0, double f_star, double l0, double l1, double n_bar,
                           std::span<const double> steps) {
  if (steps.empty()) throw ConfigError("theorem1_rhs: no step sizes");
  double s = 0.0, s2 = 0.0;
  for (double h : steps) {
    if (!(h > 0.0)) throw ConfigError("--h: step sizes must be > 0");
    s += h;
    s2 += h * h;
  }
  return ((f_mu_w0 - f_star) + 0.5 * l1 * (n_bar + 4.0) * (n_bar + 4.0) * l0 * l0 * s2) / s;
}

/// Smoothness proxy L1 = sqrt(n_bar) / mu * L0.
inline double l1_proxy(double n_bar, double mu, double l0) { return std::sqrt(n_bar) / mu * l0; }

/// Records a thinned subsequence of iterates (every m-th, m = max(1, N/50))
/// through the optimizer hooks, then scores them against the bound.
class Theorem1Tracker {
 public:
  explicit Theorem1Tracker(std::uint64_t planned_iters)
      : n_(planned_iters), every_(std::max<std::uint64_t>(1, planned_iters / 50)) {}

  std::uint64_t thinning() const noexcept { return every_; }

  RunHooks hooks() {
    RunHooks h;
    h.on_start = [this](std::span<const double> w0) {
      iterates_.clear();
      steps_.clear();
      iterates_.push_back({0, std::vector<double>(w0.begin(), w0.end())});
    };
    h.on_step = [this](const StepInfo& info, std::span<const double> w) {
      if (!(info.h > 0.0)) throw ConfigError("--h: step sizes must be > 0");
      steps_.push_back(info.h);
      if (info.k % every_ == 0) iterates_.push_back({info.k, std::vector<double>(w.begin(), w.end())});
      return true;
    };
    return h;
  }

  std::size_t recorded() const noexcept { return iterates_.size(); }

  template <SmoothableFunction F>
  BoundReport report(const F& f, double lipschitz, double f_star, std::size_t n_bar, double mu,
                     std::size_t grad_samples, RngStream& rng) const {
    if (iterates_.empty() || steps_.empty()) {
      throw ConfigError("theorem1 check: no iterates recorded (run hooks not attached)");
    }
    if (grad_samples < 10'000) throw ConfigError("--grad-samples: need at least 10000 samples");
    // Iterate w_k leaves with step h_k; the last iterate reuses the last step.
    std::vector<double> h_all(steps_);
    h_all.push_back(steps_.back());

    double num = 0.0, den = 0.0, var = 0.0;
    for (std::size_t j = 0; j < iterates_.size(); ++j) {
      const auto& [k, w] = iterates_[j];
      RngStream s = rng.substream(k);
      const auto g = smoothed_gradient_norm_sq(f, std::span<const double>(w), mu, grad_samples, s);
      const double hk = h_all[k];
      num += hk * g.mean;
      den += hk;
      var += hk * hk * g.std_error * g.std_error;
    }
    RngStream s0 = rng.substream(~std::uint64_t{0});
    const auto f0 = smoothed_function_value(f, std::span<const double>(iterates_.front().second), mu,
                                            grad_samples, s0);
    const double nb = static_cast<double>(n_bar);
    const double l1 = l1_proxy(nb, mu, lipschitz);

    BoundReport r;
    r.check = "theorem1";
    r.lhs = num / den;
    r.lhs_stderr = std::sqrt(var) / den;
    r.rhs = theorem1_rhs(f0.mean, f_star, lipschitz, l1, nb, h_all);
    r.params = {{"n", static_cast<double>(f.dimension())},
                {"n_bar", nb},
                {"mu", mu},
                {"h", steps_.front()},
                {"N", static_cast<double>(steps_.size())},
                {"L0", lipschitz},
                {"L1", l1},
                {"f_mu_w0", f0.mean},
                {"f_star", f_star},
                {"thinning", static_cast<double>(every_)}};
    r.settle();
    return r;
  }

 private:
  std::uint64_t n_;
  std::uint64_t every_;
  std::vector<std::pair<std::uint64_t, std::vector<double>>> iterates_;
  std::vector<double> steps_;
};

// ---------------------------------------------------------------------------
// Step size and iteration complexity

/// Bound minimized over h: L0 R / ((N+1) h) + (h / alpha) n_bar (n_bar+4)^2 L0^4.
inline double corollary_bound(double h, double alpha, double radius, double n_bar, double l0,
                              std::uint64_t n_iters) {
  const double np1 = static_cast<double>(n_iters) + 1.0;
  return l0 * radius / (np1 * h) + h / alpha * n_bar * (n_bar + 4.0) * (n_bar + 4.0) * std::pow(l0, 4);
}

/// h* = sqrt(alpha R / (n_bar (n_bar+4)^2 L0^3 (N+1))).
inline double optimal_step_size(double alpha, double radius, double n_bar, double l0,
                                std::uint64_t n_iters) {
  if (!(alpha > 0.0) || !(radius > 0.0) || !(n_bar > 0.0) || !(l0 > 0.0)) {
    throw ConfigError("optimal_step_size: alpha, R, n_bar and L0 must be positive");
  }
  const double np1 = static_cast<double>(n_iters) + 1.0;
  return std::sqrt(alpha * radius / (n_bar * (n_bar + 4.0) * (n_bar + 4.0) * std::pow(l0, 3) * np1));
}

struct SweepCell {
  Index n_bar = 0;
  std::uint64_t seed = 0;
  std::uint64_t iterations = 0;  // first checked iterate with ||grad f_mu||^2 <= eps
  bool censored = false;         // cap reached without hitting eps
  double final_grad_sq = 0.0;    // estimate at the stopping iterate
};

struct SweepRow {
  Index n_bar = 0;
  std::vector<SweepCell> cells;
  double median = 0.0;
  std::uint64_t min = 0, max = 0;
};

struct SweepResult {
  Index n = 0;
  double epsilon = 0.0;
  std::uint64_t cap = 0;
  std::vector<SweepRow> rows;
};

inline nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json j;
  j["check"] = "sweep";
  j["n"] = r.n;
  j["epsilon"] = r.epsilon;
  j["cap"] = r.cap;
  for (const auto& row : r.rows) {
    nlohmann::json jr;
    jr["n_bar"] = row.n_bar;
    jr["median"] = row.median;
    jr["min"] = row.min;
    jr["max"] = row.max;
    for (const auto& c : row.cells) {
      jr["cells"].push_back({{"seed", c.seed},
                             {"iterations", c.iterations},
                             {"censored", c.censored},
                             {"final_grad_sq", c.final_grad_sq}});
    }
    j["rows"].push_back(jr);
  }
  return j;
}

struct SweepOptions {
  SyntheticKind kind = SyntheticKind::kL1Well;
  SupportLayout layout = SupportLayout::kFixed;
  std::uint64_t cap = 20'000;       // iteration cap per cell
  std::size_t grad_samples = 10'000;
  std::uint64_t check_every = 0;    // 0: max(1, cap / 50)
  unsigned threads = 0;             // 0: SZO_THREADS or hardware concurrency
};

/// Worker count: explicit request, else SZO_THREADS, else the hardware,
/// never more than `jobs`.
inline unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned t = requested;
  if (t == 0) {
    if (const char* env = std::getenv("SZO_THREADS")) t = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  }
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(t, jobs)));
}

/// Runs fn(i) for i in [0, jobs) on a small thread pool; rethrows the first
/// exception.
template <class Fn>
void parallel_for(std::size_t jobs, unsigned threads, const Fn& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  const unsigned t = worker_count(threads, jobs);
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Runs one cell; eps <= 0 means run to the cap and only report the final
/// gradient estimate.
inline SweepCell run_sweep_cell(Index n, Index n_bar, std::uint64_t seed, double eps,
                                const RunConfig& base, const SweepOptions& opt) {
  SyntheticFunction f(opt.kind, n, n_bar, seed, opt.layout);
  SyntheticProblem problem(f, 0);
  RunConfig cfg = base;
  cfg.seed = seed;
  cfg.max_iters = opt.cap;
  cfg.eval_every = opt.cap;
  const std::uint64_t every = opt.check_every ? opt.check_every : std::max<std::uint64_t>(1, opt.cap / 50);
  const RngStream check(seed, streams::kCheck);

  SweepCell cell{n_bar, seed, opt.cap, true, 0.0};
  auto probe = [&](std::uint64_t k, std::span<const double> w) {
    RngStream s = check.substream(k);
    cell.final_grad_sq = smoothed_gradient_norm_sq(f, w, cfg.mu, opt.grad_samples, s).mean;
    if (eps > 0.0 && cell.final_grad_sq <= eps) {
      cell.iterations = k;
      cell.censored = false;
      return false;
    }
    return true;
  };
  bool stopped_at_start = false;
  RunHooks hooks;
  hooks.on_start = [&](std::span<const double> w0) { stopped_at_start = eps > 0.0 && !probe(0, w0); };
  hooks.on_step = [&](const StepInfo& info, std::span<const double> w) {
    if (stopped_at_start) return false;
    if (info.k % every == 0 || info.k == cfg.max_iters) return probe(info.k, w);
    return true;
  };
  run(cfg, problem, hooks);
  return cell;
}

}  // namespace detail

/// Iterations until the MC estimate of ||grad f_mu||^2 falls to epsilon, per
/// n_bar and seed. With epsilon unset, epsilon is the median over seeds of the
/// estimate the largest n_bar reaches at the cap.
inline SweepResult complexity_sweep(Index n, std::span<const Index> n_bar_list,
                                    std::optional<double> epsilon,
                                    std::span<const std::uint64_t> seeds, const RunConfig& base,
                                    const SweepOptions& opt = {}) {
  if (n_bar_list.empty()) throw ConfigError("--nbar: need at least one value");
  if (seeds.size() < 3) throw ConfigError("--seeds: need at least 3 seeds");
  for (Index nb : n_bar_list) {
    if (nb == 0 || nb > n) {
      throw ConfigError("--nbar: " + std::to_string(nb) + " must lie in [1, n=" + std::to_string(n) + "]");
    }
  }
  if (epsilon && !(*epsilon > 0.0)) throw ConfigError("--epsilon: must be > 0");
  if (opt.cap < 1) throw ConfigError("--cap: must be >= 1");
  base.validate();

  SweepResult res;
  res.n = n;
  res.cap = opt.cap;
  if (epsilon) {
    res.epsilon = *epsilon;
  } else {
    const Index top = *std::max_element(n_bar_list.begin(), n_bar_list.end());
    std::vector<double> finals(seeds.size());
    parallel_for(seeds.size(), opt.threads, [&](std::size_t i) {
      finals[i] = detail::run_sweep_cell(n, top, seeds[i], 0.0, base, opt).final_grad_sq;
    });
    res.epsilon = detail::median(finals);
  }

  const std::size_t per = seeds.size();
  std::vector<SweepCell> cells(n_bar_list.size() * per);
  parallel_for(cells.size(), opt.threads, [&](std::size_t i) {
    cells[i] = detail::run_sweep_cell(n, n_bar_list[i / per], seeds[i % per], res.epsilon, base, opt);
  });
  for (std::size_t r = 0; r < n_bar_list.size(); ++r) {
    SweepRow row;
    row.n_bar = n_bar_list[r];
    std::vector<double> its;
    for (std::size_t s = 0; s < per; ++s) {
      row.cells.push_back(cells[r * per + s]);
      its.push_back(static_cast<double>(cells[r * per + s].iterations));
    }
    row.median = detail::median(its);
    row.min = static_cast<std::uint64_t>(*std::min_element(its.begin(), its.end()));
    row.max = static_cast<std::uint64_t>(*std::max_element(its.begin(), its.end()));
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace szo
