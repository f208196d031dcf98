#ifndef PREFMOD_ESTIMATION_HPP
#define PREFMOD_ESTIMATION_HPP

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "prefmod/data.hpp"
#include "prefmod/params.hpp"

namespace prefmod {

// Optimizer and regularization settings. Defaults are the tuned values used
// throughout: Adam(0.001, 0.9, 0.999, 1e-8), l2 = 1e-5, up to 1000 epochs,
// stopping when the absolute objective difference drops below 1e-4.
struct TrainConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l2 = 1e-5;
  double laplacian = 0.0;
  int max_epochs = 1000;
  double tolerance = 1e-4;
  int batch_size = 0;  // 0 = full batch; otherwise mini-batches with per-epoch reshuffling
  std::uint64_t seed = 0;
  int embedding_rank = 10;
  int strata = 1;

  void validate() const;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Linear;
  ContextPolicy policy = ContextPolicy::backward();
  ContextAggregation context_agg = ContextAggregation::Mean;
};

// Mean negative log-likelihood over the choice records.
double nll(const ModelParams& params, const ChoiceDataset& choices);
double nll(const StratifiedParams& params, const ChoiceDataset& choices);
double nll(const AnyParams& params, const ChoiceDataset& choices);

// nll + l2 * ||theta||^2 in optimization coordinates. The stratified form is
// the sum of per-stratum losses (each stratum normalized by its own record
// count, with its own local l2 term) plus the path-graph Laplacian penalty
// taken from the parameters.
double objective(const ModelParams& params, const ChoiceDataset& choices,
                 const TrainConfig& config);
double objective(const StratifiedParams& params, const ChoiceDataset& choices,
                 const TrainConfig& config);

// Analytic gradient of the objective, congruent with flatten(params) (for the
// stratified form, with the concatenation of the per-stratum flattenings).
Eigen::VectorXd gradient(const ModelParams& params, const ChoiceDataset& choices,
                         const TrainConfig& config);
Eigen::VectorXd gradient(const StratifiedParams& params, const ChoiceDataset& choices,
                         const TrainConfig& config);

Eigen::VectorXd flatten_stratified(const StratifiedParams& params);
void unflatten_stratified(const Eigen::VectorXd& flat, StratifiedParams& params);

struct FitResult {
  AnyParams params;
  std::vector<double> trace;  // objective per epoch, evaluated before the update
  bool converged = false;
  int epochs = 0;
  double wall_seconds = 0.0;

  double final_objective() const { return trace.empty() ? 0.0 : trace.back(); }
};

// Fresh parameters per the initialization scheme: fixed effects and linear
// weights at zero, embeddings elementwise uniform in +-0.1/sqrt(r), nest
// scales at 0.5.
ModelParams initial_params(const ModelSpec& spec, const ProgramCatalog& catalog,
                           int num_features, const TrainConfig& config);
// Same, but with an explicit seed for the embedding draw (strata use derived
// per-stratum seeds so joint and per-stratum fits can be started identically).
ModelParams initial_params_seeded(const ModelSpec& spec, const ProgramCatalog& catalog,
                                  int num_features, const TrainConfig& config,
                                  std::uint64_t seed);
StratifiedParams initial_stratified(const ModelSpec& spec, const ProgramCatalog& catalog,
                                    int num_features, const TrainConfig& config);

// First-order training loop. Explodes the rankings under the requested
// policy and runs Adam until max_epochs or convergence. Deterministic under a
// fixed config. `warm_start`, when given, must match the requested model
// shape and replaces the fresh initialization. Aborts with an error if the
// objective turns non-finite.
FitResult fit(const ModelSpec& spec, const RankingDataset& train, const TrainConfig& config,
              const AnyParams* warm_start = nullptr);

// Lists of candidate values per hyperparameter; empty lists fall back to the
// base config's value. Cells are the cartesian product in the order given.
// An embedding rank of 0 stands for the no-context (linear) model.
struct HyperGrid {
  std::vector<double> l2;
  std::vector<int> embedding_rank;
  std::vector<int> strata;
  std::vector<double> laplacian;
};

struct GridCell {
  double l2 = 1e-5;
  int embedding_rank = 10;
  int strata = 1;
  double laplacian = 0.0;
};

struct GridCellResult {
  GridCell cell;
  std::vector<double> fold_nll;
  double mean_validation_nll = 0.0;
};

struct CrossValResult {
  std::vector<GridCellResult> cells;
  int best_index = 0;

  const GridCellResult& best() const { return cells[static_cast<std::size_t>(best_index)]; }
};

// Agents (not records) are partitioned into folds by a seeded shuffle; each
// grid cell reports the mean held-out nll over folds. Ties on the minimum go
// to the earliest cell in grid order.
CrossValResult cross_validate(const ModelSpec& spec, const RankingDataset& dataset,
                              const HyperGrid& grid, int folds, const TrainConfig& base_config);

}  // namespace prefmod

#endif  // PREFMOD_ESTIMATION_HPP
