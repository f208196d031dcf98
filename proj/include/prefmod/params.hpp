#ifndef PREFMOD_PARAMS_HPP
#define PREFMOD_PARAMS_HPP

#include <Eigen/Core>
#include <string>
#include <variant>
#include <vector>

#include "prefmod/catalog.hpp"
#include "prefmod/data.hpp"
#include "prefmod/rng.hpp"

namespace prefmod {

enum class ModelKind { FixedEffect, Linear, CdmLowRank, CdmFull, Nested };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

// How a CDM aggregates the per-item context effects:
//   Mean — divide the summed push/pull terms by |A| (0 on an empty context).
//   Sum  — raw total. The forward/backward parameter bijections are exact in
//          this convention only, so the equivalence tooling uses it.
enum class ContextAggregation { Mean, Sum };

std::string to_string(ContextAggregation agg);
ContextAggregation parse_context_aggregation(const std::string& text);

// Parameters for one model family, tagged by `kind` and bound to the catalog
// they were built against. Blocks that a family does not use stay empty.
// Fixed effects are stored decomposed as school + program-type components; a
// per-alternative view is always computed on the fly, never stored.
//
// `alt_offset` is a per-alternative additive utility attachment produced by
// the forward/backward policy maps (the mapped offsets are generally not
// expressible in the decomposed fixed-effect basis). It is zero elsewhere and
// is not a trainable block.
struct ModelParams {
  ModelKind kind = ModelKind::FixedEffect;
  ProgramCatalog catalog;
  CatalogFingerprint fingerprint;

  Eigen::VectorXd delta_school;   // n_s
  Eigen::VectorXd delta_ptype;    // n_p
  Eigen::VectorXd beta;           // d (absent for FixedEffect)
  Eigen::MatrixXd target_emb;     // m x r   (CdmLowRank)
  Eigen::MatrixXd context_emb;    // m x r   (CdmLowRank)
  Eigen::MatrixXd interaction;    // m x m   (CdmFull; diagonal stored 0, never read)
  Eigen::VectorXd nest_scale;     // K nests (Nested), each in (0, 1]
  Eigen::VectorXd alt_offset;     // m

  ContextPolicy policy = ContextPolicy::backward();
  ContextAggregation context_agg = ContextAggregation::Mean;

  static ModelParams fixed_effect(const ProgramCatalog& catalog);
  static ModelParams linear(const ProgramCatalog& catalog, int num_features);
  static ModelParams cdm_low_rank(const ProgramCatalog& catalog, int num_features, int rank,
                                  ContextPolicy policy,
                                  ContextAggregation agg = ContextAggregation::Mean);
  static ModelParams cdm_full(const ProgramCatalog& catalog, int num_features,
                              ContextPolicy policy,
                              ContextAggregation agg = ContextAggregation::Mean);
  static ModelParams nested(const ProgramCatalog& catalog, int num_features);

  bool is_cdm() const { return kind == ModelKind::CdmLowRank || kind == ModelKind::CdmFull; }
  bool uses_covariates() const { return kind != ModelKind::FixedEffect; }
  int rank() const { return static_cast<int>(target_emb.cols()); }

  void validate() const;
  // Throws when the parameters were built against a different universe.
  void check_compatible(const ProgramCatalog& catalog, int num_features) const;
};

// Number of trainable coordinates (alt_offset excluded).
int param_dim(const ModelParams& params);

// Trainable blocks flattened into optimization coordinates. Nested scales are
// mapped through the logit preimage of the (0,1] sigmoid squash so that the
// optimizer works on unconstrained values; every other block passes through.
Eigen::VectorXd flatten(const ModelParams& params);
void unflatten(const Eigen::VectorXd& flat, ModelParams& params);

double squash_nest_scale(double raw);
double unsquash_nest_scale(double scale);

// K copies of one base model, one per rank stratum, tied together by a
// path-graph penalty on adjacent strata.
struct StratifiedParams {
  double laplacian_gain = 0.0;
  std::vector<ModelParams> strata;

  int num_strata() const { return static_cast<int>(strata.size()); }
  void validate() const;
};

using AnyParams = std::variant<ModelParams, StratifiedParams>;

// Rank positions map onto strata 1..K; positions beyond K share stratum K.
int stratum_of(int rank_pos, int num_strata);

// laplacian_gain * sum_{i=2..K} ||theta_i - theta_{i-1}||^2 over the flattened
// parameter vectors (all trainable blocks, embeddings included).
double laplacian_penalty(const StratifiedParams& params);

const ModelParams& params_for_rank(const AnyParams& params, int rank_pos);
void check_compatible(const AnyParams& params, const ProgramCatalog& catalog, int num_features);

}  // namespace prefmod

#endif  // PREFMOD_PARAMS_HPP
