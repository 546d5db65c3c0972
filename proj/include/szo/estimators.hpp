#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "szo/errors.hpp"
#include "szo/instance.hpp"
#include "szo/objectives.hpp"
#include "szo/perturbation.hpp"
#include "szo/rng.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

enum class UpdateRule { kTwoPoint, kFunctionComparison, kBaselineComparison, kSfo };

inline std::string_view to_string(UpdateRule r) {
  switch (r) {
    case UpdateRule::kTwoPoint: return "two-point";
    case UpdateRule::kFunctionComparison: return "func-cmp";
    case UpdateRule::kBaselineComparison: return "baseline";
    case UpdateRule::kSfo: return "sfo";
  }
  return "?";
}

inline UpdateRule parse_update_rule(std::string_view s) {
  if (s == "two-point" || s == "two_point") return UpdateRule::kTwoPoint;
  if (s == "func-cmp" || s == "function_comparison") return UpdateRule::kFunctionComparison;
  if (s == "baseline" || s == "baseline_comparison") return UpdateRule::kBaselineComparison;
  if (s == "sfo") return UpdateRule::kSfo;
  throw ConfigError("unknown update rule `" + std::string(s) + "`");
}

/// Running mean Y_k of the perturbed values observed so far.
struct BaselineState {
  std::uint64_t count = 0;
  double mean = 0.0;

  BaselineState observe(double v) const noexcept {
    BaselineState next{count + 1, mean};
    next.mean += (v - mean) / static_cast<double>(next.count);
    return next;
  }
};

/// Output of one update rule. The optimizer applies w <- w - h * delta.
struct RuleOutput {
  SparseVector delta;
  double observed_loss = 0.0;  // F(w + mu u, x), or the sampled loss for SFO
};

// `eval(u, scale)` returns F(w + scale * u, x) for the bound iterate and
// sample; scale = 0 with an empty u yields the unperturbed value.

/// s_mu(w) = (F(w + mu u) - F(w)) / mu * u
template <class Eval>
RuleOutput two_point_delta(const Eval& eval, const Perturbation& pert, double mu) {
  if (!(mu > 0.0)) throw ConfigError("two_point_delta: mu must be positive");
  const double perturbed = eval(pert.vector, mu);
  const double base = eval(pert.vector, 0.0);
  return {pert.vector.scaled((perturbed - base) / mu), perturbed};
}

/// -u / mu when the perturbed point is strictly better, else zero.
template <class Eval>
RuleOutput function_comparison_delta(const Eval& eval, const Perturbation& pert, double mu) {
  if (!(mu > 0.0)) throw ConfigError("function_comparison_delta: mu must be positive");
  const double perturbed = eval(pert.vector, mu);
  const double base = eval(pert.vector, 0.0);
  if (perturbed < base) return {pert.vector.scaled(-1.0 / mu), perturbed};
  return {SparseVector(pert.vector.dim()), perturbed};
}

/// (F(w + mu u) - Y_k) / mu * u, with Y_k including the current observation.
template <class Eval>
RuleOutput baseline_comparison_delta(const Eval& eval, const Perturbation& pert, double mu,
                                     BaselineState& state) {
  if (!(mu > 0.0)) throw ConfigError("baseline_comparison_delta: mu must be positive");
  const double perturbed = eval(pert.vector, mu);
  state = state.observe(perturbed);
  return {pert.vector.scaled((perturbed - state.mean) / mu), perturbed};
}

/// Score-function gradient Delta(y) * (phi(y) - E_p[phi]) with y ~ softmax of
/// the candidate scores (temperature 1); E_p[phi] is exact over the list.
template <class Weights>
RuleOutput sfo_delta(const Weights& w, const Instance& inst, RngStream& rng) {
  const auto scores = candidate_scores(w, inst);
  const auto p = softmax(scores, 1.0);
  const double r = rng.uniform();
  std::size_t y = p.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (r <= acc) {
      y = i;
      break;
    }
  }
  const double loss = Feedback::loss(inst, y);
  const Index dim = inst.dim();
  if (loss == 0.0 || inst.size() == 1) return {SparseVector(dim), loss};
  std::vector<std::pair<Index, double>> pairs;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& phi = inst.candidate(i).features;
    const double coef = (i == y ? 1.0 : 0.0) - p[i];
    if (coef == 0.0) continue;
    for (std::size_t k = 0; k < phi.nnz(); ++k) {
      pairs.emplace_back(phi.indices()[k], loss * coef * phi.values()[k]);
    }
  }
  return {SparseVector::from_pairs(dim, std::move(pairs)), loss};
}

}  // namespace szo
