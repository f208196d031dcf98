#include "prefmod/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prefmod {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::FixedEffect: return "fixed";
    case ModelKind::Linear: return "linear";
    case ModelKind::CdmLowRank: return "cdm";
    case ModelKind::CdmFull: return "cdm-full";
    case ModelKind::Nested: return "nested";
  }
  return "fixed";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "fixed") return ModelKind::FixedEffect;
  if (text == "linear") return ModelKind::Linear;
  if (text == "cdm") return ModelKind::CdmLowRank;
  if (text == "cdm-full") return ModelKind::CdmFull;
  if (text == "nested") return ModelKind::Nested;
  throw std::invalid_argument("unknown model kind '" + text +
                              "' (expected fixed, linear, cdm, cdm-full, or nested)");
}

std::string to_string(ContextAggregation agg) {
  return agg == ContextAggregation::Mean ? "mean" : "sum";
}

ContextAggregation parse_context_aggregation(const std::string& text) {
  if (text == "mean") return ContextAggregation::Mean;
  if (text == "sum") return ContextAggregation::Sum;
  throw std::invalid_argument("unknown context aggregation '" + text + "'");
}

namespace {

ModelParams base_params(ModelKind kind, const ProgramCatalog& catalog, int num_features,
                        int rank) {
  ModelParams p;
  p.kind = kind;
  p.catalog = catalog;
  p.fingerprint = catalog.fingerprint(num_features, rank);
  p.delta_school = Eigen::VectorXd::Zero(catalog.num_schools());
  p.delta_ptype = Eigen::VectorXd::Zero(catalog.num_ptypes());
  p.alt_offset = Eigen::VectorXd::Zero(catalog.num_alternatives());
  if (kind != ModelKind::FixedEffect) p.beta = Eigen::VectorXd::Zero(num_features);
  return p;
}

}  // namespace

ModelParams ModelParams::fixed_effect(const ProgramCatalog& catalog) {
  return base_params(ModelKind::FixedEffect, catalog, 0, 0);
}

ModelParams ModelParams::linear(const ProgramCatalog& catalog, int num_features) {
  return base_params(ModelKind::Linear, catalog, num_features, 0);
}

ModelParams ModelParams::cdm_low_rank(const ProgramCatalog& catalog, int num_features, int rank,
                                      ContextPolicy policy, ContextAggregation agg) {
  if (rank < 1) throw std::invalid_argument("cdm_low_rank: rank must be >= 1");
  ModelParams p = base_params(ModelKind::CdmLowRank, catalog, num_features, rank);
  p.target_emb = Eigen::MatrixXd::Zero(catalog.num_alternatives(), rank);
  p.context_emb = Eigen::MatrixXd::Zero(catalog.num_alternatives(), rank);
  p.policy = policy;
  p.context_agg = agg;
  return p;
}

ModelParams ModelParams::cdm_full(const ProgramCatalog& catalog, int num_features,
                                  ContextPolicy policy, ContextAggregation agg) {
  ModelParams p = base_params(ModelKind::CdmFull, catalog, num_features, 0);
  p.interaction =
      Eigen::MatrixXd::Zero(catalog.num_alternatives(), catalog.num_alternatives());
  p.policy = policy;
  p.context_agg = agg;
  return p;
}

ModelParams ModelParams::nested(const ProgramCatalog& catalog, int num_features) {
  ModelParams p = base_params(ModelKind::Nested, catalog, num_features, 0);
  p.nest_scale = Eigen::VectorXd::Ones(catalog.num_nests());
  return p;
}

void ModelParams::validate() const {
  const auto& fp = fingerprint;
  if (catalog.num_alternatives() != fp.num_alternatives ||
      catalog.num_schools() != fp.num_schools || catalog.num_ptypes() != fp.num_ptypes ||
      catalog.nest_hash() != fp.nest_hash) {
    throw std::invalid_argument("params: fingerprint does not describe the bound catalog");
  }
  if (delta_school.size() != fp.num_schools || delta_ptype.size() != fp.num_ptypes) {
    throw std::invalid_argument("params: fixed-effect block sizes do not match fingerprint");
  }
  if (alt_offset.size() != fp.num_alternatives) {
    throw std::invalid_argument("params: offset vector size does not match universe");
  }
  if (kind == ModelKind::FixedEffect) {
    if (beta.size() != 0) throw std::invalid_argument("params: fixed-effect model carries beta");
  } else if (beta.size() != fp.num_features) {
    throw std::invalid_argument("params: beta size does not match feature count");
  }
  if (kind == ModelKind::CdmLowRank) {
    if (fp.rank < 1) throw std::invalid_argument("params: low-rank model needs rank >= 1");
    if (target_emb.rows() != fp.num_alternatives || context_emb.rows() != fp.num_alternatives ||
        target_emb.cols() != fp.rank || context_emb.cols() != fp.rank) {
      throw std::invalid_argument("params: embedding shapes do not match m x r");
    }
  }
  if (kind == ModelKind::CdmFull) {
    if (interaction.rows() != fp.num_alternatives || interaction.cols() != fp.num_alternatives) {
      throw std::invalid_argument("params: interaction matrix is not m x m");
    }
  }
  if (kind == ModelKind::Nested) {
    for (Eigen::Index i = 0; i < nest_scale.size(); ++i) {
      const double lambda = nest_scale[i];
      if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("params: nest scale outside (0, 1]");
      }
    }
  }
  if (is_cdm() && policy.kind == ContextPolicy::Kind::TopK && policy.k < 0) {
    throw std::invalid_argument("params: negative top-k context length");
  }
}

void ModelParams::check_compatible(const ProgramCatalog& data_catalog, int num_features) const {
  const CatalogFingerprint fp = data_catalog.fingerprint(num_features, fingerprint.rank);
  const bool features_ok =
      kind == ModelKind::FixedEffect || fingerprint.num_features == num_features;
  if (fp.num_alternatives != fingerprint.num_alternatives ||
      fp.num_schools != fingerprint.num_schools || fp.num_ptypes != fingerprint.num_ptypes ||
      fp.nest_hash != fingerprint.nest_hash || !features_ok) {
    throw std::invalid_argument(
        "params: catalog fingerprint mismatch; refusing to evaluate against data the "
        "parameters were not built for");
  }
}

double squash_nest_scale(double raw) { return 1.0 / (1.0 + std::exp(-raw)); }

double unsquash_nest_scale(double scale) {
  // Clamp so a scale of exactly 1 stays finite in optimization coordinates.
  const double s = std::clamp(scale, 1e-12, 1.0 - 1e-13);
  return std::log(s / (1.0 - s));
}

int param_dim(const ModelParams& p) {
  int dim = static_cast<int>(p.delta_school.size() + p.delta_ptype.size() + p.beta.size());
  if (p.kind == ModelKind::CdmLowRank) {
    dim += static_cast<int>(p.target_emb.size() + p.context_emb.size());
  } else if (p.kind == ModelKind::CdmFull) {
    const int m = static_cast<int>(p.interaction.rows());
    dim += m * (m - 1);  // diagonal is not a parameter
  } else if (p.kind == ModelKind::Nested) {
    dim += static_cast<int>(p.nest_scale.size());
  }
  return dim;
}

Eigen::VectorXd flatten(const ModelParams& p) {
  Eigen::VectorXd flat(param_dim(p));
  Eigen::Index at = 0;
  flat.segment(at, p.delta_school.size()) = p.delta_school;
  at += p.delta_school.size();
  flat.segment(at, p.delta_ptype.size()) = p.delta_ptype;
  at += p.delta_ptype.size();
  flat.segment(at, p.beta.size()) = p.beta;
  at += p.beta.size();
  if (p.kind == ModelKind::CdmLowRank) {
    const int m = static_cast<int>(p.target_emb.rows());
    const int r = static_cast<int>(p.target_emb.cols());
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < r; ++c) flat[at++] = p.target_emb(j, c);
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < r; ++c) flat[at++] = p.context_emb(j, c);
  } else if (p.kind == ModelKind::CdmFull) {
    const int m = static_cast<int>(p.interaction.rows());
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l)
        if (l != j) flat[at++] = p.interaction(j, l);
  } else if (p.kind == ModelKind::Nested) {
    for (Eigen::Index i = 0; i < p.nest_scale.size(); ++i) {
      flat[at++] = unsquash_nest_scale(p.nest_scale[i]);
    }
  }
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, ModelParams& p) {
  if (flat.size() != param_dim(p)) {
    throw std::invalid_argument("unflatten: coordinate vector has wrong dimension");
  }
  Eigen::Index at = 0;
  p.delta_school = flat.segment(at, p.delta_school.size());
  at += p.delta_school.size();
  p.delta_ptype = flat.segment(at, p.delta_ptype.size());
  at += p.delta_ptype.size();
  p.beta = flat.segment(at, p.beta.size());
  at += p.beta.size();
  if (p.kind == ModelKind::CdmLowRank) {
    const int m = static_cast<int>(p.target_emb.rows());
    const int r = static_cast<int>(p.target_emb.cols());
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < r; ++c) p.target_emb(j, c) = flat[at++];
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < r; ++c) p.context_emb(j, c) = flat[at++];
  } else if (p.kind == ModelKind::CdmFull) {
    const int m = static_cast<int>(p.interaction.rows());
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l)
        if (l != j) p.interaction(j, l) = flat[at++];
  } else if (p.kind == ModelKind::Nested) {
    for (Eigen::Index i = 0; i < p.nest_scale.size(); ++i) {
      p.nest_scale[i] = squash_nest_scale(flat[at++]);
    }
  }
}

void StratifiedParams::validate() const {
  if (strata.empty()) throw std::invalid_argument("stratified: need at least one stratum");
  if (laplacian_gain < 0.0) throw std::invalid_argument("stratified: negative laplacian gain");
  const ModelParams& first = strata.front();
  for (const ModelParams& s : strata) {
    s.validate();
    if (s.kind != first.kind || !(s.fingerprint == first.fingerprint) ||
        s.policy != first.policy || s.context_agg != first.context_agg) {
      throw std::invalid_argument("stratified: strata must share variant, shape, and policy");
    }
  }
}

int stratum_of(int rank_pos, int num_strata) {
  if (rank_pos < 1) throw std::invalid_argument("stratum_of: rank positions start at 1");
  return std::min(rank_pos, num_strata);
}

double laplacian_penalty(const StratifiedParams& params) {
  params.validate();
  double total = 0.0;
  Eigen::VectorXd prev = flatten(params.strata.front());
  for (std::size_t i = 1; i < params.strata.size(); ++i) {
    Eigen::VectorXd cur = flatten(params.strata[i]);
    if (cur.size() != prev.size()) {
      throw std::invalid_argument("laplacian_penalty: stratum shape mismatch");
    }
    total += (cur - prev).squaredNorm();
    prev = std::move(cur);
  }
  return params.laplacian_gain * total;
}

const ModelParams& params_for_rank(const AnyParams& params, int rank_pos) {
  if (const auto* base = std::get_if<ModelParams>(&params)) return *base;
  const auto& strat = std::get<StratifiedParams>(params);
  return strat.strata[static_cast<std::size_t>(stratum_of(rank_pos, strat.num_strata()) - 1)];
}

void check_compatible(const AnyParams& params, const ProgramCatalog& catalog, int num_features) {
  if (const auto* base = std::get_if<ModelParams>(&params)) {
    base->check_compatible(catalog, num_features);
  } else {
    for (const auto& s : std::get<StratifiedParams>(params).strata) {
      s.check_compatible(catalog, num_features);
    }
  }
}

}  // namespace prefmod
