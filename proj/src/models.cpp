#include "prefmod/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace prefmod {

namespace {

double ctx_coef(ContextAggregation agg, std::size_t context_size) {
  if (context_size == 0) return 0.0;
  return agg == ContextAggregation::Mean ? 1.0 / static_cast<double>(context_size) : 1.0;
}

// delta_{s(j)} + delta_{p(j)} + offset_j + beta' x_ij
double base_utility(const ModelParams& p, int candidate, const double* features) {
  double v = p.delta_school[p.catalog.school_of(candidate)] +
             p.delta_ptype[p.catalog.ptype_of(candidate)] + p.alt_offset[candidate];
  if (p.beta.size() > 0) {
    if (features == nullptr) {
      throw std::invalid_argument("utility: model expects covariates but none were given");
    }
    for (Eigen::Index f = 0; f < p.beta.size(); ++f) v += p.beta[f] * features[f];
  }
  return v;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  const double lse = mx + std::log((v.array() - mx).exp().sum());
  return v.array() - lse;
}

Eigen::VectorXd nested_log_probs(const ModelParams& p, const Eigen::VectorXd& v,
                                 std::span<const int> choice_set) {
  for (Eigen::Index i = 0; i < p.nest_scale.size(); ++i) {
    if (!(p.nest_scale[i] > 0.0 && p.nest_scale[i] <= 1.0)) {
      throw std::invalid_argument("nested: scale parameter outside (0, 1]");
    }
  }
  const int n = static_cast<int>(choice_set.size());

  // Bucket candidates by nest; only nests intersecting the choice set count.
  std::vector<int> nests;  // distinct nests in first-appearance order
  std::vector<int> nest_slot(static_cast<std::size_t>(p.catalog.num_nests()), -1);
  std::vector<std::vector<int>> members;  // candidate indices per slot
  for (int idx = 0; idx < n; ++idx) {
    const int nest = p.catalog.nest_of(choice_set[static_cast<std::size_t>(idx)]);
    if (nest_slot[static_cast<std::size_t>(nest)] < 0) {
      nest_slot[static_cast<std::size_t>(nest)] = static_cast<int>(nests.size());
      nests.push_back(nest);
      members.emplace_back();
    }
    members[static_cast<std::size_t>(nest_slot[static_cast<std::size_t>(nest)])].push_back(idx);
  }

  // Within-nest log-sum-exp of V/lambda, then a second log-sum-exp of
  // lambda * L over nests.
  const std::size_t num_slots = nests.size();
  std::vector<double> nest_lse(num_slots);
  std::vector<double> nest_z(num_slots);
  for (std::size_t s = 0; s < num_slots; ++s) {
    const double lambda = p.nest_scale[nests[s]];
    double mx = -std::numeric_limits<double>::infinity();
    for (int idx : members[s]) mx = std::max(mx, v[idx] / lambda);
    double acc = 0.0;
    for (int idx : members[s]) acc += std::exp(v[idx] / lambda - mx);
    nest_lse[s] = mx + std::log(acc);
    nest_z[s] = lambda * nest_lse[s];
  }
  double zmax = -std::numeric_limits<double>::infinity();
  for (double z : nest_z) zmax = std::max(zmax, z);
  double zacc = 0.0;
  for (double z : nest_z) zacc += std::exp(z - zmax);
  const double log_denom = zmax + std::log(zacc);

  Eigen::VectorXd out(n);
  for (std::size_t s = 0; s < num_slots; ++s) {
    const double lambda = p.nest_scale[nests[s]];
    for (int idx : members[s]) {
      out[idx] = v[idx] / lambda - nest_lse[s] + nest_z[s] - log_denom;
    }
  }
  return out;
}

}  // namespace

double representative_utility(const ModelParams& params, const UtilityContext& ctx) {
  double v = base_utility(params, ctx.candidate, ctx.features);
  if (ctx.context.empty()) return v;
  const double coef = ctx_coef(params.context_agg, ctx.context.size());
  if (params.kind == ModelKind::CdmLowRank) {
    double dot = 0.0;
    for (int k : ctx.context) {
      dot += params.target_emb.row(ctx.candidate).dot(params.context_emb.row(k));
    }
    v += coef * dot;
  } else if (params.kind == ModelKind::CdmFull) {
    double sum = 0.0;
    for (int k : ctx.context) {
      if (k == ctx.candidate) {
        throw std::invalid_argument("utility: candidate appears in its own context");
      }
      sum += params.interaction(ctx.candidate, k);
    }
    v += coef * sum;
  }
  return v;
}

Eigen::VectorXd representative_utilities(const ModelParams& params,
                                         const CovariateTensor& covariates, int agent,
                                         std::span<const int> context,
                                         std::span<const int> choice_set) {
  const int n = static_cast<int>(choice_set.size());
  Eigen::VectorXd v(n);
  for (int idx = 0; idx < n; ++idx) {
    const int j = choice_set[static_cast<std::size_t>(idx)];
    v[idx] = base_utility(params, j, covariates.row(agent, j));
  }
  if (!params.is_cdm()) return v;

  const bool forward = params.policy.kind == ContextPolicy::Kind::Forward;
  if (params.kind == ModelKind::CdmLowRank) {
    if (forward) {
      if (n >= 2) {
        const double coef = ctx_coef(params.context_agg, static_cast<std::size_t>(n - 1));
        Eigen::RowVectorXd csum = Eigen::RowVectorXd::Zero(params.rank());
        for (int idx = 0; idx < n; ++idx) {
          csum += params.context_emb.row(choice_set[static_cast<std::size_t>(idx)]);
        }
        for (int idx = 0; idx < n; ++idx) {
          const int j = choice_set[static_cast<std::size_t>(idx)];
          v[idx] += coef * params.target_emb.row(j).dot(csum - params.context_emb.row(j));
        }
      }
    } else if (!context.empty()) {
      const double coef = ctx_coef(params.context_agg, context.size());
      Eigen::RowVectorXd csum = Eigen::RowVectorXd::Zero(params.rank());
      for (int k : context) csum += params.context_emb.row(k);
      for (int idx = 0; idx < n; ++idx) {
        const int j = choice_set[static_cast<std::size_t>(idx)];
        v[idx] += coef * params.target_emb.row(j).dot(csum);
      }
    }
  } else {  // CdmFull
    if (forward) {
      if (n >= 2) {
        const double coef = ctx_coef(params.context_agg, static_cast<std::size_t>(n - 1));
        for (int idx = 0; idx < n; ++idx) {
          const int j = choice_set[static_cast<std::size_t>(idx)];
          double sum = 0.0;
          for (int l_idx = 0; l_idx < n; ++l_idx) {
            const int l = choice_set[static_cast<std::size_t>(l_idx)];
            if (l != j) sum += params.interaction(j, l);
          }
          v[idx] += coef * sum;
        }
      }
    } else if (!context.empty()) {
      const double coef = ctx_coef(params.context_agg, context.size());
      for (int idx = 0; idx < n; ++idx) {
        const int j = choice_set[static_cast<std::size_t>(idx)];
        double sum = 0.0;
        for (int k : context) sum += params.interaction(j, k);
        v[idx] += coef * sum;
      }
    }
  }
  return v;
}

Eigen::VectorXd log_choice_probabilities(const ModelParams& params,
                                         const CovariateTensor& covariates, int agent,
                                         std::span<const int> context,
                                         std::span<const int> choice_set) {
  if (choice_set.empty()) throw std::invalid_argument("choice_probabilities: empty choice set");
  const Eigen::VectorXd v =
      representative_utilities(params, covariates, agent, context, choice_set);
  if (params.kind == ModelKind::Nested) return nested_log_probs(params, v, choice_set);
  return log_softmax(v);
}

Eigen::VectorXd choice_probabilities(const ModelParams& params,
                                     const CovariateTensor& covariates, int agent,
                                     std::span<const int> context,
                                     std::span<const int> choice_set) {
  return log_choice_probabilities(params, covariates, agent, context, choice_set)
      .array()
      .exp();
}

namespace {

// Shared driver for likelihood evaluation and sampling: walks the ranking
// process with shrinking choice sets and policy-maintained contexts.
template <typename Step>
void walk_ranking(const ModelParams& params, ContextPolicy policy, int steps, Step&& step) {
  const int m = params.catalog.num_alternatives();
  std::vector<int> choice_set(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) choice_set[static_cast<std::size_t>(j)] = j;
  std::vector<int> context;
  std::vector<int> chosen_so_far;

  for (int pos = 1; pos <= steps; ++pos) {
    context.clear();
    switch (policy.kind) {
      case ContextPolicy::Kind::Backward:
        context = chosen_so_far;
        break;
      case ContextPolicy::Kind::TopK: {
        const int len = std::min<int>(policy.k, static_cast<int>(chosen_so_far.size()));
        context.assign(chosen_so_far.begin(), chosen_so_far.begin() + len);
        break;
      }
      case ContextPolicy::Kind::Forward:
        break;
    }
    const int chosen = step(pos, std::span<const int>(context), std::span<const int>(choice_set));
    chosen_so_far.push_back(chosen);
    choice_set.erase(std::find(choice_set.begin(), choice_set.end(), chosen));
  }
}

}  // namespace

double ranking_log_likelihood(const ModelParams& params, const CovariateTensor& covariates,
                              int agent, std::span<const int> ranking, ContextPolicy policy) {
  double total = 0.0;
  std::size_t at = 0;
  walk_ranking(params, policy, static_cast<int>(ranking.size()),
               [&](int /*pos*/, std::span<const int> context, std::span<const int> choice_set) {
                 const int chosen = ranking[at++];
                 const auto it = std::find(choice_set.begin(), choice_set.end(), chosen);
                 if (it == choice_set.end()) {
                   throw std::invalid_argument("ranking_log_likelihood: invalid ranking");
                 }
                 const Eigen::VectorXd logp =
                     log_choice_probabilities(params, covariates, agent, context, choice_set);
                 total += logp[static_cast<int>(it - choice_set.begin())];
                 return chosen;
               });
  return total;
}

std::vector<int> sample_partial_ranking(const ModelParams& params,
                                        const CovariateTensor& covariates, int agent,
                                        ContextPolicy policy, int steps, Rng& rng) {
  const int m = params.catalog.num_alternatives();
  if (steps < 1 || steps > m) {
    throw std::invalid_argument("sample_ranking: step count outside [1, m]");
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(steps));
  walk_ranking(params, policy, steps,
               [&](int /*pos*/, std::span<const int> context, std::span<const int> choice_set) {
                 const Eigen::VectorXd probs =
                     choice_probabilities(params, covariates, agent, context, choice_set);
                 const int idx = rng.categorical(std::span<const double>(probs.data(),
                                                 static_cast<std::size_t>(probs.size())));
                 const int chosen = choice_set[static_cast<std::size_t>(idx)];
                 out.push_back(chosen);
                 return chosen;
               });
  return out;
}

std::vector<int> sample_ranking(const ModelParams& params, const CovariateTensor& covariates,
                                int agent, ContextPolicy policy, Rng& rng) {
  return sample_partial_ranking(params, covariates, agent, policy,
                                params.catalog.num_alternatives(), rng);
}

}  // namespace prefmod
