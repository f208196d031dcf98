#ifndef PREFMOD_MODELS_HPP
#define PREFMOD_MODELS_HPP

#include <Eigen/Core>
#include <span>
#include <vector>

#include "prefmod/data.hpp"
#include "prefmod/params.hpp"
#include "prefmod/rng.hpp"

namespace prefmod {

// One utility evaluation point. `context` must already be resolved for the
// candidate (under the Forward policy that means S \ {candidate}); `features`
// points at the d covariate values for (agent, candidate), null when d == 0.
struct UtilityContext {
  int agent = 0;
  int candidate = 0;
  std::span<const int> context;
  std::span<const int> choice_set;
  const double* features = nullptr;
};

// The deterministic part of random utility. Nested models return the same
// value as a linear model here; their scale parameters enter only through the
// choice probabilities.
double representative_utility(const ModelParams& params, const UtilityContext& ctx);

// Log choice probabilities over `choice_set`, aligned with its order.
// `context` is the resolved backward-style context (prior choices); it is
// ignored for non-CDM models and for Forward-policy CDMs, which derive the
// per-candidate context from the choice set itself.
Eigen::VectorXd log_choice_probabilities(const ModelParams& params,
                                         const CovariateTensor& covariates, int agent,
                                         std::span<const int> context,
                                         std::span<const int> choice_set);

Eigen::VectorXd choice_probabilities(const ModelParams& params,
                                     const CovariateTensor& covariates, int agent,
                                     std::span<const int> context,
                                     std::span<const int> choice_set);

// Sum of per-step log choice probabilities after unraveling the ranking under
// `policy`. Always <= 0.
double ranking_log_likelihood(const ModelParams& params, const CovariateTensor& covariates,
                              int agent, std::span<const int> ranking, ContextPolicy policy);

// Sequentially samples a full ranking of the universe: repeated choices from
// the shrinking choice set with the policy-updated context.
std::vector<int> sample_ranking(const ModelParams& params, const CovariateTensor& covariates,
                                int agent, ContextPolicy policy, Rng& rng);

// First `steps` positions only (the tail of the permutation is not drawn).
std::vector<int> sample_partial_ranking(const ModelParams& params,
                                        const CovariateTensor& covariates, int agent,
                                        ContextPolicy policy, int steps, Rng& rng);

// Utilities for every candidate in `choice_set` (same order).
Eigen::VectorXd representative_utilities(const ModelParams& params,
                                         const CovariateTensor& covariates, int agent,
                                         std::span<const int> context,
                                         std::span<const int> choice_set);

}  // namespace prefmod

#endif  // PREFMOD_MODELS_HPP
