#include <gtest/gtest.h>

#include <cmath>

#include "szo/theory_check.hpp"

using namespace szo;

namespace {

// F(w, x) = c . w + b on every coordinate; grad f_mu = c for all mu.
struct LinearFunction {
  std::vector<double> c;
  double b = 0.0;

  Index dimension() const { return static_cast<Index>(c.size()); }
  ActiveSet active_set(std::uint64_t) const { return ActiveSet::all(dimension()); }
  double value_on(const ActiveSet&, std::span<const double> w, std::uint64_t, const SparseVector* u,
                  double s) const {
    double v = b;
    for (Index i = 0; i < dimension(); ++i) v += c[i] * (w[i] + (u ? s * (*u)[i] : 0.0));
    return v;
  }
};

// F(w, x) = ||w_A||^2 / 2 on a fixed subset; grad f_mu = w_A.
struct HalfSquare {
  Index n;
  ActiveSet a;

  Index dimension() const { return n; }
  ActiveSet active_set(std::uint64_t) const { return a; }
  double value_on(const ActiveSet& act, std::span<const double> w, std::uint64_t,
                  const SparseVector* u, double s) const {
    double v = 0.0;
    for (Index i : act.indices()) {
      const double z = w[i] + (u ? s * (*u)[i] : 0.0);
      v += 0.5 * z * z;
    }
    return v;
  }
};

static_assert(SmoothableFunction<LinearFunction>);
static_assert(SmoothableFunction<SyntheticFunction>);

template <class F>
std::string config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(MomentBound, ClosedFormsAndBounds) {
  RngStream rng(1, streams::kCheck);
  const auto m2 = moment_bound_check(10, 2, kMinBoundSamples, rng);
  EXPECT_EQ(m2.rhs, 12.0);
  EXPECT_EQ(m2.expected, 10.0);
  EXPECT_TRUE(m2.pass);
  EXPECT_TRUE(m2.consistent.value());
  const auto m4 = moment_bound_check(10, 4, kMinBoundSamples, rng);
  EXPECT_EQ(m4.rhs, 196.0);
  EXPECT_EQ(m4.expected, 120.0);
  EXPECT_TRUE(m4.pass);
  EXPECT_TRUE(m4.consistent.value());
  const auto zero = moment_bound_check(0, 4, kMinBoundSamples, rng);
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_TRUE(zero.pass);
  const auto j = to_json(m2);
  EXPECT_EQ(j["check"], "lemma2");
  EXPECT_EQ(j["params"]["d"], 10.0);
}

TEST(MomentBound, RejectsBadArguments) {
  RngStream rng(1, streams::kCheck);
  EXPECT_NE(config_error([&] { moment_bound_check(3, 3, kMinBoundSamples, rng); }).find("--p"),
            std::string::npos);
  EXPECT_NE(config_error([&] { moment_bound_check(3, 2, 10, rng); }).find("--samples"),
            std::string::npos);
}

TEST(BoundReport, SettleUsesThreeStandardErrors) {
  BoundReport r;
  r.lhs = 1.2;
  r.lhs_stderr = 0.1;
  r.rhs = 1.0;
  r.expected = 0.95;
  r.settle();
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.consistent.value());
  r.lhs = 1.31;
  r.settle();
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.consistent.value());
}

TEST(GradientNorm, UnbiasedOnLinearAndQuadratic) {
  const LinearFunction lin{{1.0, -2.0, 0.5}, 3.0};
  const std::vector<double> w{0.3, 0.1, -0.7};
  RngStream rng(2, streams::kCheck);
  const auto g = smoothed_gradient_norm_sq(lin, w, 0.1, 200000, rng);
  EXPECT_LE(std::abs(g.mean - 5.25), 4.0 * g.std_error);
  EXPECT_GT(g.std_error, 0.0);

  const HalfSquare q{6, ActiveSet(6, {0, 2, 5})};
  const std::vector<double> v{1.0, 9.0, -0.5, 9.0, 9.0, 2.0};
  const auto h = smoothed_gradient_norm_sq(q, v, 0.05, 200000, rng);
  EXPECT_LE(std::abs(h.mean - 5.25), 4.0 * h.std_error);
  EXPECT_THROW(smoothed_gradient_norm_sq(q, v, 0.05, 39, rng), ConfigError);
  EXPECT_THROW(smoothed_gradient_norm_sq(q, v, 0.0, 100, rng), ConfigError);
}

TEST(GradientNorm, ZeroAtTheMinimumOfASmoothFunction) {
  const HalfSquare q{4, ActiveSet::all(4)};
  const std::vector<double> w(4, 0.0);
  RngStream rng(3, streams::kCheck);
  const auto g = smoothed_gradient_norm_sq(q, w, 0.1, 100000, rng);
  EXPECT_LE(std::abs(g.mean), 4.0 * g.std_error);
}

TEST(EstimatorBias, PassesOnLinearAndConstantFunctions) {
  const LinearFunction lin{{1.0, -2.0, 0.5, 0.0}, 0.0};
  const std::vector<double> w{0.5, 0.5, 0.5, 0.5};
  RngStream rng(4, streams::kCheck);
  const auto r = estimator_bias_check(lin, w, 0.1, kMinBoundSamples, rng);
  ASSERT_EQ(r.coords.size(), 4u);
  EXPECT_TRUE(r.pass);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(r.fd_mean[c], lin.c[c], 1e-9);

  const LinearFunction constant{{0.0, 0.0}, 0.7};
  const std::vector<double> v{1.0, -1.0};
  const auto z = estimator_bias_check(constant, v, 0.1, kMinBoundSamples, rng);
  EXPECT_EQ(z.max_abs_z, 0.0);
  EXPECT_TRUE(z.pass);
  EXPECT_EQ(to_json(z)["check"], "lemma1");
}

TEST(EstimatorBias, SelectedCoordinatesAndErrors) {
  const auto f = make_synthetic("smooth_bowl", 12, 4, 2);
  const std::vector<double> w(12, 0.2);
  const std::vector<Index> coords{1, 5};
  RngStream rng(5, streams::kCheck);
  const auto r = estimator_bias_check(f, w, 0.2, kMinBoundSamples, rng, 1e-3, coords);
  EXPECT_EQ(r.coords, coords);
  EXPECT_EQ(r.z.size(), 2u);
  EXPECT_THROW(estimator_bias_check(f, w, 0.2, 1000, rng), ConfigError);
  const std::vector<double> wrong(3, 0.0);
  EXPECT_THROW(estimator_bias_check(f, wrong, 0.2, kMinBoundSamples, rng), ConfigError);
}

TEST(SecondMoment, HoldsOnSyntheticFunctions) {
  for (const char* id : {"l1_well", "smooth_bowl", "nonconvex_ripple"}) {
    const auto f = make_synthetic(id, 30, 6, 1);
    std::vector<double> w(30, 0.4);
    RngStream rng(6, streams::kCheck);
    const auto r = second_moment_check(f, w, 0.05, kMinBoundSamples, f.lipschitz(), 6, rng);
    EXPECT_DOUBLE_EQ(r.rhs, f.lipschitz() * f.lipschitz() * 100.0) << id;
    EXPECT_TRUE(r.pass) << id;
  }
}

TEST(Theorem1, RightHandSideExample) {
  const std::vector<double> steps{0.1, 0.1};
  EXPECT_DOUBLE_EQ(theorem1_rhs(1.0, 0.0, 1.0, 2.0, 1.0, steps), 7.5);
  EXPECT_THROW(theorem1_rhs(1.0, 0.0, 1.0, 1.0, 1.0, std::vector<double>{}), ConfigError);
  EXPECT_THROW(theorem1_rhs(1.0, 0.0, 1.0, 1.0, 1.0, std::vector<double>{0.1, 0.0}), ConfigError);
  EXPECT_DOUBLE_EQ(l1_proxy(4.0, 0.5, 3.0), 12.0);
}

TEST(Theorem1, TrackerRecordsThinnedIterates) {
  const auto f = make_synthetic("l1_well", 20, 4, 3);
  const SyntheticProblem prob(f, 0);
  RunConfig cfg;
  cfg.h = 1e-3;
  cfg.mu = 0.1;
  cfg.max_iters = 500;
  cfg.eval_every = 500;
  cfg.objective.kind = ObjectiveKind::kSynthetic;
  Theorem1Tracker tracker(cfg.max_iters);
  EXPECT_EQ(tracker.thinning(), 10u);
  RngStream rng(7, streams::kCheck);
  EXPECT_NE(config_error([&] { tracker.report(f, f.lipschitz(), 0.0, 4, 0.1, 10000, rng); })
                .find("hooks"),
            std::string::npos);
  run(cfg, prob, tracker.hooks());
  EXPECT_EQ(tracker.recorded(), 51u);
  EXPECT_THROW(tracker.report(f, f.lipschitz(), 0.0, 4, 0.1, 100, rng), ConfigError);
  const auto r = tracker.report(f, f.lipschitz(), f.lower_bound(), 4, 0.1, 10000, rng);
  EXPECT_EQ(r.check, "theorem1");
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.params.at("N"), 500.0);
}

TEST(Corollary, OptimalStepSizeExamples) {
  EXPECT_DOUBLE_EQ(optimal_step_size(1, 1, 1, 1, 0), 0.2);
  EXPECT_DOUBLE_EQ(optimal_step_size(4, 1, 1, 1, 0), 0.4);
  EXPECT_DOUBLE_EQ(optimal_step_size(1, 1, 1, 1, 3), 0.1);
  EXPECT_THROW(optimal_step_size(0, 1, 1, 1, 0), ConfigError);
  EXPECT_THROW(optimal_step_size(1, 1, 1, -1, 0), ConfigError);
}

TEST(Corollary, OptimalStepMinimizesTheBound) {
  for (double nb : {1.0, 4.0, 16.0, 64.0}) {
    for (std::uint64_t N : {0ull, 100ull, 100000ull}) {
      const double a = 0.7, R = 2.5, L = 1.3;
      const double h = optimal_step_size(a, R, nb, L, N);
      const double best = corollary_bound(h, a, R, nb, L, N);
      const double closed =
          2.0 * std::sqrt(L * R / (N + 1.0) * nb * (nb + 4) * (nb + 4) * std::pow(L, 4) / a);
      EXPECT_NEAR(best, closed, 1e-12 * closed);
      for (double f : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) {
        EXPECT_GT(corollary_bound(h * f, a, R, nb, L, N), best);
      }
    }
  }
}

TEST(Sweep, StructureAndDeterminism) {
  RunConfig base;
  base.h = 0.01;
  base.mu = 0.05;
  base.objective.kind = ObjectiveKind::kSynthetic;
  const std::vector<Index> nbars{2, 4};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  SweepOptions opt;
  opt.cap = 300;
  opt.threads = 1;
  const auto a = complexity_sweep(16, nbars, std::nullopt, seeds, base, opt);
  EXPECT_GT(a.epsilon, 0.0);
  ASSERT_EQ(a.rows.size(), 2u);
  for (const auto& row : a.rows) {
    ASSERT_EQ(row.cells.size(), 3u);
    EXPECT_LE(row.min, row.median);
    EXPECT_LE(row.median, row.max);
    for (const auto& c : row.cells) {
      EXPECT_LE(c.iterations, opt.cap);
      if (!c.censored) {
        EXPECT_LE(c.final_grad_sq, a.epsilon);
      }
    }
  }
  opt.threads = 3;
  const auto b = complexity_sweep(16, nbars, std::nullopt, seeds, base, opt);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(to_json(a)["rows"].size(), 2u);
}

TEST(Sweep, RejectsBadArguments) {
  RunConfig base;
  base.objective.kind = ObjectiveKind::kSynthetic;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const std::vector<Index> too_big{20};
  EXPECT_NE(config_error([&] { complexity_sweep(10, too_big, 1.0, seeds, base); }).find("--nbar"),
            std::string::npos);
  const std::vector<Index> ok{2};
  const std::vector<std::uint64_t> two{1, 2};
  EXPECT_NE(config_error([&] { complexity_sweep(10, ok, 1.0, two, base); }).find("--seeds"),
            std::string::npos);
  EXPECT_NE(config_error([&] { complexity_sweep(10, ok, -1.0, seeds, base); }).find("--epsilon"),
            std::string::npos);
}

TEST(Parallel, WorkerCountAndErrors) {
  EXPECT_EQ(worker_count(4, 2), 2u);
  EXPECT_EQ(worker_count(4, 0), 1u);
  EXPECT_EQ(worker_count(1, 10), 1u);
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 2, [](std::size_t i) {
                 if (i == 5) throw DataError("boom");
               }),
               DataError);
  EXPECT_EQ(detail::median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(detail::median({4.0, 1.0, 2.0, 3.0}), 2.5);
}
