#include "prefmod/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "prefmod/models.hpp"

namespace prefmod {

namespace {

ContextPolicy flipped(ContextPolicy policy) {
  switch (policy.kind) {
    case ContextPolicy::Kind::Forward: return ContextPolicy::backward();
    case ContextPolicy::Kind::Backward: return ContextPolicy::forward();
    case ContextPolicy::Kind::TopK:
      throw std::invalid_argument("policy map: parameters must be forward- or backward-dependent");
  }
  return ContextPolicy::backward();
}

void check_map_input(const ModelParams& params, ModelKind expected, const char* name) {
  params.validate();
  if (params.kind != expected) {
    throw std::invalid_argument(std::string(name) + ": wrong parameter variant");
  }
  if (params.context_agg != ContextAggregation::Sum) {
    throw std::invalid_argument(std::string(name) +
                                ": the bijection is exact for sum-aggregated context terms; "
                                "convert the parameters first");
  }
}

}  // namespace

ModelParams map_full(const ModelParams& params) {
  check_map_input(params, ModelKind::CdmFull, "map_full");
  ModelParams out = params;
  out.policy = flipped(params.policy);
  const int m = params.catalog.num_alternatives();
  for (int i = 0; i < m; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) row_sum += params.interaction(i, j);
    }
    out.alt_offset[i] = params.alt_offset[i] + row_sum;
  }
  out.interaction = -params.interaction;
  return out;
}

ModelParams map_lowrank(const ModelParams& params) {
  check_map_input(params, ModelKind::CdmLowRank, "map_lowrank");
  ModelParams out = params;
  out.policy = flipped(params.policy);
  const int m = params.catalog.num_alternatives();
  Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(params.rank());
  for (int j = 0; j < m; ++j) total += params.context_emb.row(j);
  for (int i = 0; i < m; ++i) {
    out.alt_offset[i] = params.alt_offset[i] +
                        params.target_emb.row(i).dot(total - params.context_emb.row(i));
  }
  out.context_emb = -params.context_emb;
  return out;
}

namespace {

double max_param_deviation(const ModelParams& a, const ModelParams& b) {
  double dev = (flatten(a) - flatten(b)).cwiseAbs().maxCoeff();
  dev = std::max(dev, (a.alt_offset - b.alt_offset).cwiseAbs().maxCoeff());
  return dev;
}

// Enumerates every full ranking and compares the per-step probability vectors
// of the forward parameters against the mapped (backward) ones.
double max_prob_deviation(const ModelParams& fwd, const ModelParams& bwd,
                          const CovariateTensor& covariates) {
  const int m = fwd.catalog.num_alternatives();
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  double dev = 0.0;
  do {
    std::vector<int> choice_set(perm.size());
    std::iota(choice_set.begin(), choice_set.end(), 0);
    std::vector<int> context;
    for (int pos = 0; pos < m; ++pos) {
      const Eigen::VectorXd pf =
          choice_probabilities(fwd, covariates, 0, {}, choice_set);
      const Eigen::VectorXd pb =
          choice_probabilities(bwd, covariates, 0, context, choice_set);
      dev = std::max(dev, (pf - pb).cwiseAbs().maxCoeff());
      const int chosen = perm[static_cast<std::size_t>(pos)];
      context.push_back(chosen);
      choice_set.erase(std::find(choice_set.begin(), choice_set.end(), chosen));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return dev;
}

}  // namespace

EquivalenceReport check_equivalence(int num_alternatives, int rank, int samples,
                                    std::uint64_t seed) {
  const int m = num_alternatives;
  if (m < 2) throw std::invalid_argument("check_equivalence: need at least two alternatives");
  // Small dense catalog: two schools, two program types, one nest.
  std::vector<int> school_of(static_cast<std::size_t>(m)), ptype_of(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    school_of[static_cast<std::size_t>(j)] = j % 2;
    ptype_of[static_cast<std::size_t>(j)] = (2 * j) / m;  // first half 0, second half 1
  }
  ProgramCatalog catalog(school_of, ptype_of, std::vector<int>(static_cast<std::size_t>(m), 0));

  const int d = 2;
  Rng rng(mix_seed(seed, 0xEFu));

  EquivalenceReport report;
  for (int sample = 0; sample < samples; ++sample) {
    std::vector<double> x(static_cast<std::size_t>(m) * d);
    for (double& v : x) v = rng.normal01();
    const CovariateTensor covariates(1, m, {"f0", "f1"}, std::move(x));

    ModelParams theta =
        rank > 0
            ? ModelParams::cdm_low_rank(catalog, d, rank, ContextPolicy::forward(),
                                        ContextAggregation::Sum)
            : ModelParams::cdm_full(catalog, d, ContextPolicy::forward(),
                                    ContextAggregation::Sum);
    for (Eigen::Index i = 0; i < theta.delta_school.size(); ++i) {
      theta.delta_school[i] = rng.normal01();
    }
    for (Eigen::Index i = 0; i < theta.delta_ptype.size(); ++i) {
      theta.delta_ptype[i] = rng.normal01();
    }
    for (Eigen::Index i = 0; i < theta.beta.size(); ++i) theta.beta[i] = rng.normal01();
    if (rank > 0) {
      for (Eigen::Index i = 0; i < theta.target_emb.rows(); ++i) {
        for (Eigen::Index j = 0; j < theta.target_emb.cols(); ++j) {
          theta.target_emb(i, j) = rng.normal01();
          theta.context_emb(i, j) = rng.normal01();
        }
      }
    } else {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          if (i != j) theta.interaction(i, j) = rng.normal01();
        }
      }
    }

    const auto map = rank > 0 ? map_lowrank : map_full;
    const ModelParams mapped = map(theta);
    report.max_involution_deviation =
        std::max(report.max_involution_deviation, max_param_deviation(map(mapped), theta));
    report.max_probability_deviation =
        std::max(report.max_probability_deviation, max_prob_deviation(theta, mapped, covariates));
    ++report.configurations_checked;
  }
  return report;
}

}  // namespace prefmod
