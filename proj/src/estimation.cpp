#include "prefmod/estimation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "prefmod/models.hpp"
#include "prefmod/rng.hpp"

namespace prefmod {

void TrainConfig::validate() const {
  if (step_size <= 0.0) throw std::invalid_argument("config: step size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("config: moment decays must lie in [0, 1)");
  }
  if (adam_epsilon <= 0.0) throw std::invalid_argument("config: numerical epsilon must be positive");
  if (l2 < 0.0 || laplacian < 0.0) throw std::invalid_argument("config: gains must be >= 0");
  if (max_epochs < 1) throw std::invalid_argument("config: need at least one epoch");
  if (tolerance <= 0.0) throw std::invalid_argument("config: tolerance must be positive");
  if (batch_size < 0) throw std::invalid_argument("config: negative batch size");
  if (embedding_rank < 0) throw std::invalid_argument("config: negative embedding rank");
  if (strata < 1) throw std::invalid_argument("config: need at least one stratum");
}

namespace {

struct Layout {
  int school = 0;
  int ptype = 0;
  int beta = 0;
  int t = 0;
  int c = 0;
  int u = 0;
  int nest = 0;
  int dim = 0;
  int m = 0;
  int r = 0;
};

Layout layout_of(const ModelParams& p) {
  Layout lay;
  lay.m = p.catalog.num_alternatives();
  lay.r = p.rank();
  lay.school = 0;
  lay.ptype = lay.school + p.catalog.num_schools();
  lay.beta = lay.ptype + p.catalog.num_ptypes();
  const int after_linear = lay.beta + static_cast<int>(p.beta.size());
  lay.t = after_linear;
  lay.c = after_linear + lay.m * lay.r;
  lay.u = after_linear;
  lay.nest = after_linear;
  lay.dim = param_dim(p);
  return lay;
}

// Position of u_{jl} in the flattened off-diagonal, row-major layout.
inline int u_index(const Layout& lay, int j, int l) {
  return lay.u + j * (lay.m - 1) + (l < j ? l : l - 1);
}

double ctx_coef(ContextAggregation agg, std::size_t context_size) {
  if (context_size == 0) return 0.0;
  return agg == ContextAggregation::Mean ? 1.0 / static_cast<double>(context_size) : 1.0;
}

int chosen_index(const ChoiceRecord& rec) {
  const auto it = std::lower_bound(rec.choice_set.begin(), rec.choice_set.end(), rec.chosen);
  if (it == rec.choice_set.end() || *it != rec.chosen) {
    throw std::invalid_argument("choices: chosen item missing from its choice set");
  }
  return static_cast<int>(it - rec.choice_set.begin());
}

// Adds weight * d(log P(chosen))/d(theta) into `grad` (when non-null) and
// returns log P(chosen). `grad` spans the flattening of `p` alone.
double record_logprob_grad(const ModelParams& p, const CovariateTensor& X,
                           const ChoiceRecord& rec, const Layout& lay, double weight,
                           double* grad) {
  const int n = static_cast<int>(rec.choice_set.size());
  const int c_idx = chosen_index(rec);
  const Eigen::VectorXd v =
      representative_utilities(p, X, rec.agent, rec.context, rec.choice_set);

  Eigen::VectorXd dv(n);  // d logP / dV per candidate
  double logp = 0.0;

  if (p.kind != ModelKind::Nested) {
    const double mx = v.maxCoeff();
    const double lse = mx + std::log((v.array() - mx).exp().sum());
    logp = v[c_idx] - lse;
    if (grad == nullptr) return logp;
    dv = -(v.array() - lse).exp();
    dv[c_idx] += 1.0;
  } else {
    // Two-level closed form: within-nest distribution q times nest share Q.
    const int num_nests = p.catalog.num_nests();
    std::vector<int> slot_of_nest(static_cast<std::size_t>(num_nests), -1);
    std::vector<int> nests;
    std::vector<std::vector<int>> members;
    for (int idx = 0; idx < n; ++idx) {
      const int nest = p.catalog.nest_of(rec.choice_set[static_cast<std::size_t>(idx)]);
      if (slot_of_nest[static_cast<std::size_t>(nest)] < 0) {
        slot_of_nest[static_cast<std::size_t>(nest)] = static_cast<int>(nests.size());
        nests.push_back(nest);
        members.emplace_back();
      }
      members[static_cast<std::size_t>(slot_of_nest[static_cast<std::size_t>(nest)])]
          .push_back(idx);
    }
    const std::size_t slots = nests.size();
    std::vector<double> lse(slots), z(slots);
    Eigen::VectorXd q(n);
    for (std::size_t s = 0; s < slots; ++s) {
      const double lambda = p.nest_scale[nests[s]];
      double mx = -std::numeric_limits<double>::infinity();
      for (int idx : members[s]) mx = std::max(mx, v[idx] / lambda);
      double acc = 0.0;
      for (int idx : members[s]) acc += std::exp(v[idx] / lambda - mx);
      lse[s] = mx + std::log(acc);
      z[s] = lambda * lse[s];
      for (int idx : members[s]) q[idx] = std::exp(v[idx] / lambda - lse[s]);
    }
    double zmax = -std::numeric_limits<double>::infinity();
    for (double zz : z) zmax = std::max(zmax, zz);
    double zacc = 0.0;
    for (double zz : z) zacc += std::exp(zz - zmax);
    const double log_denom = zmax + std::log(zacc);

    const int b =
        slot_of_nest[static_cast<std::size_t>(p.catalog.nest_of(rec.chosen))];
    const double lambda_b = p.nest_scale[nests[static_cast<std::size_t>(b)]];
    logp = v[c_idx] / lambda_b - lse[static_cast<std::size_t>(b)] +
           z[static_cast<std::size_t>(b)] - log_denom;
    if (grad == nullptr) return logp;

    std::vector<double> nest_share(slots), vbar(slots);
    for (std::size_t s = 0; s < slots; ++s) {
      nest_share[s] = std::exp(z[s] - log_denom);
      double acc = 0.0;
      for (int idx : members[s]) acc += q[idx] * v[idx];
      vbar[s] = acc;
    }
    for (std::size_t s = 0; s < slots; ++s) {
      const double lambda = p.nest_scale[nests[s]];
      for (int idx : members[s]) {
        const double in_b = (static_cast<int>(s) == b) ? 1.0 : 0.0;
        dv[idx] = (idx == c_idx ? 1.0 / lambda_b : 0.0) - in_b * q[idx] / lambda_b +
                  in_b * q[idx] - q[idx] * nest_share[s];
      }
      // scale parameter gradient, chained through the sigmoid squash
      double dlambda = -nest_share[s] * (lse[s] - vbar[s] / lambda);
      if (static_cast<int>(s) == b) {
        dlambda += (vbar[s] - v[c_idx]) / (lambda_b * lambda_b) + lse[s] - vbar[s] / lambda_b;
      }
      grad[lay.nest + nests[s]] += weight * dlambda * lambda * (1.0 - lambda);
    }
  }

  // Linear blocks.
  for (int idx = 0; idx < n; ++idx) {
    const int j = rec.choice_set[static_cast<std::size_t>(idx)];
    const double g = weight * dv[idx];
    grad[lay.school + p.catalog.school_of(j)] += g;
    grad[lay.ptype + p.catalog.ptype_of(j)] += g;
    if (p.beta.size() > 0) {
      const double* x = X.row(rec.agent, j);
      for (Eigen::Index f = 0; f < p.beta.size(); ++f) grad[lay.beta + f] += g * x[f];
    }
  }
  if (!p.is_cdm()) return logp;

  // Context blocks.
  const bool forward = p.policy.kind == ContextPolicy::Kind::Forward;
  if (p.kind == ModelKind::CdmLowRank) {
    const int r = lay.r;
    if (forward) {
      if (n < 2) return logp;
      const double coef = ctx_coef(p.context_agg, static_cast<std::size_t>(n - 1));
      Eigen::RowVectorXd csum = Eigen::RowVectorXd::Zero(r);
      Eigen::RowVectorXd st = Eigen::RowVectorXd::Zero(r);
      for (int idx = 0; idx < n; ++idx) {
        const int j = rec.choice_set[static_cast<std::size_t>(idx)];
        csum += p.context_emb.row(j);
        st += dv[idx] * p.target_emb.row(j);
      }
      for (int idx = 0; idx < n; ++idx) {
        const int j = rec.choice_set[static_cast<std::size_t>(idx)];
        const Eigen::RowVectorXd tg =
            (weight * dv[idx] * coef) * (csum - p.context_emb.row(j));
        const Eigen::RowVectorXd cg =
            (weight * coef) * (st - dv[idx] * p.target_emb.row(j));
        for (int f = 0; f < r; ++f) {
          grad[lay.t + j * r + f] += tg[f];
          grad[lay.c + j * r + f] += cg[f];
        }
      }
    } else if (!rec.context.empty()) {
      const double coef = ctx_coef(p.context_agg, rec.context.size());
      Eigen::RowVectorXd csum = Eigen::RowVectorXd::Zero(r);
      for (int k : rec.context) csum += p.context_emb.row(k);
      Eigen::RowVectorXd st = Eigen::RowVectorXd::Zero(r);
      for (int idx = 0; idx < n; ++idx) {
        const int j = rec.choice_set[static_cast<std::size_t>(idx)];
        st += dv[idx] * p.target_emb.row(j);
        const double scale = weight * dv[idx] * coef;
        for (int f = 0; f < r; ++f) grad[lay.t + j * r + f] += scale * csum[f];
      }
      for (int k : rec.context) {
        for (int f = 0; f < r; ++f) grad[lay.c + k * r + f] += weight * coef * st[f];
      }
    }
  } else {  // CdmFull
    if (forward) {
      if (n < 2) return logp;
      const double coef = ctx_coef(p.context_agg, static_cast<std::size_t>(n - 1));
      for (int idx = 0; idx < n; ++idx) {
        const int j = rec.choice_set[static_cast<std::size_t>(idx)];
        const double scale = weight * dv[idx] * coef;
        for (int l_idx = 0; l_idx < n; ++l_idx) {
          const int l = rec.choice_set[static_cast<std::size_t>(l_idx)];
          if (l != j) grad[u_index(lay, j, l)] += scale;
        }
      }
    } else if (!rec.context.empty()) {
      const double coef = ctx_coef(p.context_agg, rec.context.size());
      for (int idx = 0; idx < n; ++idx) {
        const int j = rec.choice_set[static_cast<std::size_t>(idx)];
        const double scale = weight * dv[idx] * coef;
        for (int k : rec.context) grad[u_index(lay, j, k)] += scale;
      }
    }
  }
  return logp;
}

void check_policy_match(const ModelParams& p, const ChoiceDataset& choices) {
  if (p.is_cdm() && !(p.policy == choices.policy)) {
    throw std::invalid_argument(
        "choices: dataset was exploded under a different context policy than the parameters");
  }
}

void check_eval_inputs(const ModelParams& p, const ChoiceDataset& choices) {
  if (choices.records.empty()) throw std::invalid_argument("choices: empty dataset");
  p.validate();
  p.check_compatible(choices.catalog, choices.covariates.num_features());
  check_policy_match(p, choices);
}

// Sum of log-probabilities over the listed records; adds the scaled gradient
// of that sum into `grad` when non-null.
double sum_logprob(const ModelParams& p, const ChoiceDataset& choices,
                   const std::vector<int>& record_ids, const Layout& lay, double weight,
                   double* grad) {
  double total = 0.0;
  for (int rid : record_ids) {
    total += record_logprob_grad(p, choices.covariates,
                                 choices.records[static_cast<std::size_t>(rid)], lay, weight,
                                 grad);
  }
  return total;
}

std::vector<int> all_record_ids(const ChoiceDataset& choices) {
  std::vector<int> ids(choices.records.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

// Record ids per stratum (0-based), by rank position with clamping at K.
std::vector<std::vector<int>> stratum_slices(const ChoiceDataset& choices, int num_strata) {
  std::vector<std::vector<int>> slices(static_cast<std::size_t>(num_strata));
  for (std::size_t rid = 0; rid < choices.records.size(); ++rid) {
    const int s = stratum_of(choices.records[rid].rank_pos, num_strata);
    slices[static_cast<std::size_t>(s - 1)].push_back(static_cast<int>(rid));
  }
  return slices;
}

void add_laplacian_gradient(const StratifiedParams& params,
                            const std::vector<Eigen::VectorXd>& flats, double gain,
                            Eigen::VectorXd& grad) {
  const int K = params.num_strata();
  if (K < 2 || gain == 0.0) return;
  const Eigen::Index block = flats.front().size();
  for (int i = 0; i < K; ++i) {
    auto seg = grad.segment(i * block, block);
    if (i >= 1) seg += 2.0 * gain * (flats[static_cast<std::size_t>(i)] -
                                     flats[static_cast<std::size_t>(i - 1)]);
    if (i + 1 < K) seg += 2.0 * gain * (flats[static_cast<std::size_t>(i)] -
                                        flats[static_cast<std::size_t>(i + 1)]);
  }
}

}  // namespace

double nll(const ModelParams& params, const ChoiceDataset& choices) {
  check_eval_inputs(params, choices);
  const Layout lay = layout_of(params);
  double total = 0.0;
  for (const auto& rec : choices.records) {
    total += record_logprob_grad(params, choices.covariates, rec, lay, 0.0, nullptr);
  }
  return -total / static_cast<double>(choices.records.size());
}

double nll(const StratifiedParams& params, const ChoiceDataset& choices) {
  // Mean over records, each scored by its rank stratum's sub-model.
  params.validate();
  if (choices.records.empty()) throw std::invalid_argument("choices: empty dataset");
  const int K = params.num_strata();
  const auto slices = stratum_slices(choices, K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& slice = slices[static_cast<std::size_t>(k)];
    if (slice.empty()) continue;
    const ModelParams& p = params.strata[static_cast<std::size_t>(k)];
    check_eval_inputs(p, choices);
    const Layout lay = layout_of(p);
    total += sum_logprob(p, choices, slice, lay, 0.0, nullptr);
  }
  return -total / static_cast<double>(choices.records.size());
}

double nll(const AnyParams& params, const ChoiceDataset& choices) {
  if (const auto* base = std::get_if<ModelParams>(&params)) return nll(*base, choices);
  return nll(std::get<StratifiedParams>(params), choices);
}

double objective(const ModelParams& params, const ChoiceDataset& choices,
                 const TrainConfig& config) {
  return nll(params, choices) + config.l2 * flatten(params).squaredNorm();
}

double objective(const StratifiedParams& params, const ChoiceDataset& choices,
                 const TrainConfig& config) {
  // Sum of K decoupled losses, each normalized by its own slice size and
  // locally penalized, plus the path-graph term.
  params.validate();
  if (choices.records.empty()) throw std::invalid_argument("choices: empty dataset");
  const int K = params.num_strata();
  const auto slices = stratum_slices(choices, K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const ModelParams& p = params.strata[static_cast<std::size_t>(k)];
    const auto& slice = slices[static_cast<std::size_t>(k)];
    if (!slice.empty()) {
      check_eval_inputs(p, choices);
      const Layout lay = layout_of(p);
      total -= sum_logprob(p, choices, slice, lay, 0.0, nullptr) /
               static_cast<double>(slice.size());
    }
    total += config.l2 * flatten(p).squaredNorm();
  }
  return total + laplacian_penalty(params);
}

Eigen::VectorXd gradient(const ModelParams& params, const ChoiceDataset& choices,
                         const TrainConfig& config) {
  check_eval_inputs(params, choices);
  const Layout lay = layout_of(params);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(lay.dim);
  const double weight = -1.0 / static_cast<double>(choices.records.size());
  for (const auto& rec : choices.records) {
    record_logprob_grad(params, choices.covariates, rec, lay, weight, grad.data());
  }
  grad += 2.0 * config.l2 * flatten(params);
  return grad;
}

Eigen::VectorXd gradient(const StratifiedParams& params, const ChoiceDataset& choices,
                         const TrainConfig& config) {
  params.validate();
  if (choices.records.empty()) throw std::invalid_argument("choices: empty dataset");
  const int K = params.num_strata();
  const auto slices = stratum_slices(choices, K);
  std::vector<Eigen::VectorXd> flats;
  flats.reserve(static_cast<std::size_t>(K));
  for (const auto& s : params.strata) flats.push_back(flatten(s));
  const Eigen::Index block = flats.front().size();

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K) * block);
  for (int k = 0; k < K; ++k) {
    const ModelParams& p = params.strata[static_cast<std::size_t>(k)];
    const Layout lay = layout_of(p);
    const auto& slice = slices[static_cast<std::size_t>(k)];
    double* seg = grad.data() + static_cast<Eigen::Index>(k) * block;
    if (!slice.empty()) {
      check_eval_inputs(p, choices);
      sum_logprob(p, choices, slice, lay, -1.0 / static_cast<double>(slice.size()), seg);
    }
    grad.segment(static_cast<Eigen::Index>(k) * block, block) +=
        2.0 * config.l2 * flats[static_cast<std::size_t>(k)];
  }
  add_laplacian_gradient(params, flats, params.laplacian_gain, grad);
  return grad;
}

Eigen::VectorXd flatten_stratified(const StratifiedParams& params) {
  const Eigen::Index block = flatten(params.strata.front()).size();
  Eigen::VectorXd flat(static_cast<Eigen::Index>(params.num_strata()) * block);
  for (int k = 0; k < params.num_strata(); ++k) {
    flat.segment(static_cast<Eigen::Index>(k) * block, block) =
        flatten(params.strata[static_cast<std::size_t>(k)]);
  }
  return flat;
}

void unflatten_stratified(const Eigen::VectorXd& flat, StratifiedParams& params) {
  const Eigen::Index block = static_cast<Eigen::Index>(param_dim(params.strata.front()));
  if (flat.size() != static_cast<Eigen::Index>(params.num_strata()) * block) {
    throw std::invalid_argument("unflatten: coordinate vector has wrong dimension");
  }
  for (int k = 0; k < params.num_strata(); ++k) {
    Eigen::VectorXd seg = flat.segment(static_cast<Eigen::Index>(k) * block, block);
    unflatten(seg, params.strata[static_cast<std::size_t>(k)]);
  }
}

ModelParams initial_params(const ModelSpec& spec, const ProgramCatalog& catalog,
                           int num_features, const TrainConfig& config) {
  return initial_params_seeded(spec, catalog, num_features, config, config.seed);
}

namespace {

ModelParams make_shell(const ModelSpec& spec, const ProgramCatalog& catalog, int num_features,
                       const TrainConfig& config) {
  switch (spec.kind) {
    case ModelKind::FixedEffect: return ModelParams::fixed_effect(catalog);
    case ModelKind::Linear: return ModelParams::linear(catalog, num_features);
    case ModelKind::CdmLowRank:
      return ModelParams::cdm_low_rank(catalog, num_features, config.embedding_rank,
                                       spec.policy, spec.context_agg);
    case ModelKind::CdmFull:
      return ModelParams::cdm_full(catalog, num_features, spec.policy, spec.context_agg);
    case ModelKind::Nested: return ModelParams::nested(catalog, num_features);
  }
  throw std::invalid_argument("fit: unknown model kind");
}

}  // namespace

ModelParams initial_params_seeded(const ModelSpec& spec, const ProgramCatalog& catalog,
                                  int num_features, const TrainConfig& config,
                                  std::uint64_t seed) {
  ModelParams p = make_shell(spec, catalog, num_features, config);
  if (p.kind == ModelKind::CdmLowRank) {
    Rng rng(mix_seed(seed, 0x1217));
    const double scale = 0.1 / std::sqrt(static_cast<double>(p.rank()));
    for (Eigen::Index i = 0; i < p.target_emb.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.target_emb.cols(); ++j) {
        p.target_emb(i, j) = rng.uniform(-scale, scale);
      }
    }
    for (Eigen::Index i = 0; i < p.context_emb.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.context_emb.cols(); ++j) {
        p.context_emb(i, j) = rng.uniform(-scale, scale);
      }
    }
  } else if (p.kind == ModelKind::Nested) {
    p.nest_scale.setConstant(0.5);
  }
  return p;
}

StratifiedParams initial_stratified(const ModelSpec& spec, const ProgramCatalog& catalog,
                                    int num_features, const TrainConfig& config) {
  StratifiedParams out;
  out.laplacian_gain = config.laplacian;
  out.strata.reserve(static_cast<std::size_t>(config.strata));
  for (int k = 0; k < config.strata; ++k) {
    out.strata.push_back(initial_params_seeded(spec, catalog, num_features, config,
                                               mix_seed(config.seed, static_cast<std::uint64_t>(k))));
  }
  return out;
}

namespace {

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;

  explicit AdamState(Eigen::Index dim)
      : m(Eigen::VectorXd::Zero(dim)), v(Eigen::VectorXd::Zero(dim)) {}

  void step(const TrainConfig& cfg, Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    ++t;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    x.array() -= cfg.step_size * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_epsilon);
  }
};

// Objective and gradient of the full training objective at the current point.
struct Evaluator {
  const ChoiceDataset& choices;
  const TrainConfig& config;
  std::vector<std::vector<int>> slices;  // per stratum (single entry when not stratified)

  double value_and_grad(AnyParams& params, const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    set_coordinates(params, x);
    if (auto* base = std::get_if<ModelParams>(&params)) {
      const Layout lay = layout_of(*base);
      grad.setZero();
      const double weight = -1.0 / static_cast<double>(choices.records.size());
      double sum = 0.0;
      for (const auto& rec : choices.records) {
        sum += record_logprob_grad(*base, choices.covariates, rec, lay, weight, grad.data());
      }
      const Eigen::VectorXd flat = flatten(*base);
      grad += 2.0 * config.l2 * flat;
      return -sum / static_cast<double>(choices.records.size()) +
             config.l2 * flat.squaredNorm();
    }
    auto& strat = std::get<StratifiedParams>(params);
    grad.setZero();
    const int K = strat.num_strata();
    std::vector<Eigen::VectorXd> flats;
    flats.reserve(static_cast<std::size_t>(K));
    for (const auto& s : strat.strata) flats.push_back(flatten(s));
    const Eigen::Index block = flats.front().size();
    double value = 0.0;
    for (int k = 0; k < K; ++k) {
      const ModelParams& p = strat.strata[static_cast<std::size_t>(k)];
      const Layout lay = layout_of(p);
      const auto& slice = slices[static_cast<std::size_t>(k)];
      double* seg = grad.data() + static_cast<Eigen::Index>(k) * block;
      if (!slice.empty()) {
        const double w = -1.0 / static_cast<double>(slice.size());
        value -= sum_logprob(p, choices, slice, lay, w, seg) /
                 static_cast<double>(slice.size());
      }
      grad.segment(static_cast<Eigen::Index>(k) * block, block) +=
          2.0 * config.l2 * flats[static_cast<std::size_t>(k)];
      value += config.l2 * flats[static_cast<std::size_t>(k)].squaredNorm();
    }
    add_laplacian_gradient(strat, flats, strat.laplacian_gain, grad);
    for (int k = 1; k < K; ++k) {
      value += strat.laplacian_gain *
               (flats[static_cast<std::size_t>(k)] - flats[static_cast<std::size_t>(k - 1)])
                   .squaredNorm();
    }
    return value;
  }

  // Gradient over a batch of record ids (stratified: normalized within the
  // batch per stratum), penalties included.
  void batch_grad(AnyParams& params, const Eigen::VectorXd& x,
                  const std::vector<int>& batch, Eigen::VectorXd& grad) {
    set_coordinates(params, x);
    grad.setZero();
    if (auto* base = std::get_if<ModelParams>(&params)) {
      const Layout lay = layout_of(*base);
      const double weight = -1.0 / static_cast<double>(batch.size());
      sum_logprob(*base, choices, batch, lay, weight, grad.data());
      grad += 2.0 * config.l2 * flatten(*base);
      return;
    }
    auto& strat = std::get<StratifiedParams>(params);
    const int K = strat.num_strata();
    std::vector<std::vector<int>> batch_slices(static_cast<std::size_t>(K));
    for (int rid : batch) {
      const int s = stratum_of(choices.records[static_cast<std::size_t>(rid)].rank_pos, K);
      batch_slices[static_cast<std::size_t>(s - 1)].push_back(rid);
    }
    std::vector<Eigen::VectorXd> flats;
    flats.reserve(static_cast<std::size_t>(K));
    for (const auto& s : strat.strata) flats.push_back(flatten(s));
    const Eigen::Index block = flats.front().size();
    for (int k = 0; k < K; ++k) {
      const ModelParams& p = strat.strata[static_cast<std::size_t>(k)];
      const Layout lay = layout_of(p);
      const auto& slice = batch_slices[static_cast<std::size_t>(k)];
      double* seg = grad.data() + static_cast<Eigen::Index>(k) * block;
      if (!slice.empty()) {
        sum_logprob(p, choices, slice, lay, -1.0 / static_cast<double>(slice.size()), seg);
      }
      grad.segment(static_cast<Eigen::Index>(k) * block, block) +=
          2.0 * config.l2 * flats[static_cast<std::size_t>(k)];
    }
    add_laplacian_gradient(strat, flats, strat.laplacian_gain, grad);
  }

  static void set_coordinates(AnyParams& params, const Eigen::VectorXd& x) {
    if (auto* base = std::get_if<ModelParams>(&params)) {
      unflatten(x, *base);
    } else {
      unflatten_stratified(x, std::get<StratifiedParams>(params));
    }
  }
};

}  // namespace

FitResult fit(const ModelSpec& spec, const RankingDataset& train, const TrainConfig& config,
              const AnyParams* warm_start) {
  config.validate();
  if (train.num_agents() == 0) throw std::invalid_argument("fit: empty dataset");
  const auto start_time = std::chrono::steady_clock::now();

  const ChoiceDataset choices = explode_rankings(train, spec.policy);
  const int d = train.covariates.num_features();
  const bool stratified = config.strata > 1;

  AnyParams params;
  if (warm_start != nullptr) {
    params = *warm_start;
    check_compatible(params, train.catalog, d);
    const ModelParams& probe = params_for_rank(params, 1);
    const bool strat_match =
        std::holds_alternative<StratifiedParams>(params)
            ? std::get<StratifiedParams>(params).num_strata() == config.strata
            : config.strata == 1;
    if (probe.kind != spec.kind || !strat_match ||
        (probe.is_cdm() && (!(probe.policy == spec.policy) ||
                            probe.context_agg != spec.context_agg))) {
      throw std::invalid_argument("fit: warm start does not match the requested model spec");
    }
  } else if (stratified) {
    params = initial_stratified(spec, train.catalog, d, config);
  } else {
    params = initial_params(spec, train.catalog, d, config);
  }

  Evaluator eval{choices, config, {}};
  if (stratified || std::holds_alternative<StratifiedParams>(params)) {
    const int K = std::get<StratifiedParams>(params).num_strata();
    eval.slices = stratum_slices(choices, K);
  }

  Eigen::VectorXd x = std::holds_alternative<ModelParams>(params)
                          ? flatten(std::get<ModelParams>(params))
                          : flatten_stratified(std::get<StratifiedParams>(params));
  AdamState adam(x.size());
  Eigen::VectorXd grad(x.size());

  FitResult result;
  result.converged = false;
  double prev = std::numeric_limits<double>::infinity();
  Rng shuffle_rng(mix_seed(config.seed, 0x5u));

  const std::vector<int> everything = all_record_ids(choices);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double value;
    if (config.batch_size == 0) {
      value = eval.value_and_grad(params, x, grad);
    } else {
      // Epoch-start objective; batch updates follow below.
      Eigen::VectorXd dummy(x.size());
      value = eval.value_and_grad(params, x, dummy);
    }
    if (!std::isfinite(value)) {
      throw std::runtime_error("fit: objective became non-finite at epoch " +
                               std::to_string(epoch));
    }
    result.trace.push_back(value);
    if (std::abs(value - prev) < config.tolerance) {
      result.converged = true;
      break;
    }
    prev = value;

    if (config.batch_size == 0) {
      adam.step(config, x, grad);
    } else {
      std::vector<int> order = everything;
      // Fisher-Yates with our own rng for reproducibility.
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(order[i - 1], order[j]);
      }
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end =
            std::min(order.size(), at + static_cast<std::size_t>(config.batch_size));
        const std::vector<int> batch(order.begin() + static_cast<long>(at),
                                     order.begin() + static_cast<long>(end));
        eval.batch_grad(params, x, batch, grad);
        adam.step(config, x, grad);
      }
    }
  }

  Evaluator::set_coordinates(params, x);
  result.params = std::move(params);
  result.epochs = static_cast<int>(result.trace.size());
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

CrossValResult cross_validate(const ModelSpec& spec, const RankingDataset& dataset,
                              const HyperGrid& grid, int folds,
                              const TrainConfig& base_config) {
  base_config.validate();
  if (folds < 2) throw std::invalid_argument("cross_validate: need at least two folds");
  if (dataset.num_agents() < folds) {
    throw std::invalid_argument("cross_validate: fewer agents than folds");
  }
  if (grid.l2.empty() && grid.embedding_rank.empty() && grid.strata.empty() &&
      grid.laplacian.empty()) {
    throw std::invalid_argument("cross_validate: empty grid");
  }

  const std::vector<double> l2s = grid.l2.empty() ? std::vector<double>{base_config.l2} : grid.l2;
  const std::vector<int> ranks = grid.embedding_rank.empty()
                                     ? std::vector<int>{base_config.embedding_rank}
                                     : grid.embedding_rank;
  const std::vector<int> stratas =
      grid.strata.empty() ? std::vector<int>{base_config.strata} : grid.strata;
  const std::vector<double> laps =
      grid.laplacian.empty() ? std::vector<double>{base_config.laplacian} : grid.laplacian;

  // Seeded agent shuffle, then round-robin fold assignment.
  const int n = dataset.num_agents();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng fold_rng(mix_seed(base_config.seed, 0xF01Du));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(fold_rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int pos = 0; pos < n; ++pos) {
    fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos % folds;
  }

  std::vector<RankingDataset> train_parts, val_parts;
  train_parts.reserve(static_cast<std::size_t>(folds));
  val_parts.reserve(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_agents, val_agents;
    for (int i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? val_agents : train_agents).push_back(i);
    }
    train_parts.push_back(dataset.subset_agents(train_agents));
    val_parts.push_back(dataset.subset_agents(val_agents));
  }

  CrossValResult result;
  for (double l2 : l2s) {
    for (int rank : ranks) {
      for (int strata : stratas) {
        for (double lap : laps) {
          GridCellResult cell_result;
          cell_result.cell = GridCell{l2, rank, strata, lap};

          TrainConfig cfg = base_config;
          cfg.l2 = l2;
          cfg.strata = strata;
          cfg.laplacian = lap;
          ModelSpec cell_spec = spec;
          if (spec.kind == ModelKind::CdmLowRank && rank == 0) {
            cell_spec.kind = ModelKind::Linear;  // no-context model
          } else {
            cfg.embedding_rank = rank;
          }

          double total = 0.0;
          for (int f = 0; f < folds; ++f) {
            cfg.seed = mix_seed(base_config.seed, 0xCF00u + static_cast<std::uint64_t>(f));
            const FitResult fitted = fit(cell_spec, train_parts[static_cast<std::size_t>(f)], cfg);
            const ChoiceDataset val =
                explode_rankings(val_parts[static_cast<std::size_t>(f)], cell_spec.policy);
            const double v = nll(fitted.params, val);
            cell_result.fold_nll.push_back(v);
            total += v;
          }
          cell_result.mean_validation_nll = total / static_cast<double>(folds);
          result.cells.push_back(std::move(cell_result));
        }
      }
    }
  }

  result.best_index = 0;
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (result.cells[i].mean_validation_nll <
        result.cells[static_cast<std::size_t>(result.best_index)].mean_validation_nll) {
      result.best_index = static_cast<int>(i);
    }
  }
  return result;
}

}  // namespace prefmod
