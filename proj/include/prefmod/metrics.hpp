#ifndef PREFMOD_METRICS_HPP
#define PREFMOD_METRICS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefmod/data.hpp"
#include "prefmod/models.hpp"
#include "prefmod/params.hpp"

namespace prefmod {

struct RankNllRow {
  int rank = 0;
  double mean_nll = 0.0;
  long count = 0;
};

// Mean nll per rank position (positions without records are omitted). The
// count-weighted average of the rows equals the overall nll.
std::vector<RankNllRow> nll_by_rank(const AnyParams& params, const ChoiceDataset& choices);

// A per-agent metric plus its aggregate. Agents outside the defined set (for
// position metrics, those with k_i < k) carry NaN; `mean` is nullopt when no
// agent qualifies.
struct PerAgentMetric {
  std::vector<double> values;
  std::optional<double> mean;
  long count = 0;
};

// Fraction of households whose k-th choice equals the model's modal
// prediction given their true first k-1 choices. Argmax ties break toward the
// lowest alternative index.
PerAgentMetric accuracy_in_kth_prediction(const AnyParams& params, const RankingDataset& data,
                                          ContextPolicy policy, int k);

// Expected pairwise agreement among `num_samples` sampled k-th choices per
// household, conditioned on the true first k-1 choices.
PerAgentMetric consistency_at_k(const AnyParams& params, const RankingDataset& data,
                                ContextPolicy policy, int k, int num_samples,
                                std::uint64_t seed);

enum class TauWeighting { Unit, Hyperbolic };

// Weighted Kendall rank correlation between two total orders of the same
// universe, in [-1, 1]. Unit weighting gives the classical statistic; the
// hyperbolic scheme weights each pair by the reciprocal rank of its
// higher-ranked element and symmetrizes over the two orders.
double weighted_kendall_tau(std::span<const int> order_a, std::span<const int> order_b,
                            TauWeighting weighting);

struct GroupRow {
  std::string group;
  double mean = 0.0;
  long count = 0;
};

// Per-group means of a per-agent metric, ordered by descending group size.
// Agents with an empty label form an explicit "unlabeled" row.
std::vector<GroupRow> disaggregate(const PerAgentMetric& metric,
                                   const std::vector<std::string>& labels);

// Stratified-aware sequential sampling (rank j draws from the stratum-j
// sub-model).
std::vector<int> sample_ranking_any(const AnyParams& params, const CovariateTensor& covariates,
                                    int agent, ContextPolicy policy, Rng& rng);

ContextPolicy policy_of(const AnyParams& params);

// Mean pairwise weighted tau between full rankings sampled from each pair of
// models (diagonal: within-model pairs), averaged over agents.
struct TauMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};
TauMatrix sampled_tau_matrix(const std::vector<AnyParams>& models,
                             const std::vector<std::string>& names,
                             const RankingDataset& data, int samples_per_agent,
                             std::uint64_t seed, TauWeighting weighting);

}  // namespace prefmod

#endif  // PREFMOD_METRICS_HPP
