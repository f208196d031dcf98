// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 8 drives the CLI binary, whose path arrives as argv[1].

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "fd_check.hpp"
#include "prefmod/equivalence.hpp"
#include "prefmod/estimation.hpp"
#include "prefmod/io.hpp"
#include "prefmod/metrics.hpp"
#include "prefmod/models.hpp"
#include "prefmod/synthetic.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace prefmod;
using prefmod_test::identity_catalog;
using prefmod_test::nested_catalog;
using prefmod_test::random_dataset;
using prefmod_test::randomize_params;
using prefmod_test::small_catalog;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << (detail.str().empty() ? "" : "; ") << what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- criterion 1

void criterion_equivalence(Outcome& out) {
  double worst_prob = 0.0, worst_inv = 0.0;
  for (int m : {3, 4, 5}) {
    const EquivalenceReport full =
        check_equivalence(m, 0, 100, 1000 + static_cast<std::uint64_t>(m));
    const EquivalenceReport low =
        check_equivalence(m, 2, 100, 2000 + static_cast<std::uint64_t>(m));
    worst_prob = std::max({worst_prob, full.max_probability_deviation,
                           low.max_probability_deviation});
    worst_inv = std::max({worst_inv, full.max_involution_deviation,
                          low.max_involution_deviation});
    out.require(full.configurations_checked == 100 && low.configurations_checked == 100,
                "sample count mismatch");
  }
  out.require(worst_prob <= 1e-10, "probability deviation " + fmt(worst_prob) + " > 1e-10");
  out.require(worst_inv <= 1e-12, "involution deviation " + fmt(worst_inv) + " > 1e-12");
  out.detail << "max prob dev " << fmt(worst_prob) << ", max involution dev " << fmt(worst_inv);
}

// ---------------------------------------------------------------- criterion 2

void criterion_gradients(Outcome& out) {
  TrainConfig cfg;
  cfg.l2 = 1e-3;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t seed = 3000 + static_cast<std::uint64_t>(i);
    const int variant = i % 10;
    if (variant == 8 || variant == 9) {
      // Stratified objectives, including the nested squash inside strata.
      RankingDataset ds = random_dataset(8, 6, 2, seed);
      if (variant == 9) ds.catalog = nested_catalog(6, 3);
      const ChoiceDataset choices = explode_rankings(ds, ContextPolicy::backward());
      StratifiedParams strat;
      strat.laplacian_gain = 0.05;
      for (std::uint64_t k = 0; k < 3; ++k) {
        ModelParams p = variant == 9 ? ModelParams::nested(ds.catalog, 2)
                                     : ModelParams::linear(ds.catalog, 2);
        randomize_params(p, seed + 11 * (k + 1));
        strat.strata.push_back(std::move(p));
      }
      worst = std::max(worst, prefmod_test::max_fd_relative_error_strat(strat, choices, cfg));
      continue;
    }

    RankingDataset ds = random_dataset(10, 5, 2, seed);
    ModelParams params;
    ContextPolicy policy = ContextPolicy::backward();
    switch (variant) {
      case 0: params = ModelParams::fixed_effect(ds.catalog); break;
      case 1: params = ModelParams::linear(ds.catalog, 2); break;
      case 2: params = ModelParams::cdm_low_rank(ds.catalog, 2, 2, policy); break;
      case 3:
        policy = ContextPolicy::forward();
        params = ModelParams::cdm_low_rank(ds.catalog, 2, 2, policy);
        break;
      case 4:
        policy = ContextPolicy::top_k(1);
        params = ModelParams::cdm_low_rank(ds.catalog, 2, 2, policy, ContextAggregation::Sum);
        break;
      case 5: params = ModelParams::cdm_full(ds.catalog, 2, policy); break;
      case 6:
        policy = ContextPolicy::forward();
        params = ModelParams::cdm_full(ds.catalog, 2, policy, ContextAggregation::Sum);
        break;
      default:
        ds.catalog = nested_catalog(5, 2);
        params = ModelParams::nested(ds.catalog, 2);
        break;
    }
    randomize_params(params, seed + 7);
    worst = std::max(worst, prefmod_test::max_fd_relative_error(
                                params, explode_rankings(ds, policy), cfg));
  }
  out.require(worst <= 1e-5, "relative error " + fmt(worst) + " > 1e-5");
  out.detail << "20 instances, worst relative error " << fmt(worst);
}

// ---------------------------------------------------------------- criterion 3

void criterion_degeneracies(Outcome& out) {
  const int m = 9;
  const ProgramCatalog catalog = nested_catalog(m, 3);
  const CovariateTensor x = prefmod_test::random_covariates(4, m, 3, 4001);
  ModelParams lin = ModelParams::linear(catalog, 3);
  randomize_params(lin, 4002);

  ModelParams nested = ModelParams::nested(catalog, 3);
  nested.delta_school = lin.delta_school;
  nested.delta_ptype = lin.delta_ptype;
  nested.beta = lin.beta;
  nested.nest_scale.setOnes();

  ModelParams zero_emb = ModelParams::cdm_low_rank(catalog, 3, 4, ContextPolicy::backward());
  zero_emb.delta_school = lin.delta_school;
  zero_emb.delta_ptype = lin.delta_ptype;
  zero_emb.beta = lin.beta;

  ModelParams topk0 = ModelParams::cdm_low_rank(catalog, 3, 4, ContextPolicy::top_k(0));
  randomize_params(topk0, 4003);  // embeddings are irrelevant under an empty context
  topk0.delta_school = lin.delta_school;
  topk0.delta_ptype = lin.delta_ptype;
  topk0.beta = lin.beta;

  double nested_dev = 0.0, zero_dev = 0.0, topk0_dev = 0.0;
  Rng rng(4004);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<int> s, context;
    for (int j = 0; j < m; ++j) (rng.bernoulli(0.6) ? s : context).push_back(j);
    if (s.size() < 2) continue;
    const int agent = rng.uniform_int(0, 3);
    const Eigen::VectorXd base = choice_probabilities(lin, x, agent, {}, s);
    nested_dev = std::max(nested_dev, (choice_probabilities(nested, x, agent, {}, s) - base)
                                          .cwiseAbs()
                                          .maxCoeff());
    zero_dev = std::max(zero_dev, (choice_probabilities(zero_emb, x, agent, context, s) - base)
                                      .cwiseAbs()
                                      .maxCoeff());
    topk0_dev = std::max(topk0_dev, (choice_probabilities(topk0, x, agent, {}, s) - base)
                                        .cwiseAbs()
                                        .maxCoeff());
  }
  out.require(nested_dev <= 1e-12, "nested unit scales vs linear: " + fmt(nested_dev));
  out.require(zero_dev <= 1e-12, "zero embeddings vs linear: " + fmt(zero_dev));
  out.require(topk0_dev <= 1e-12, "top-0 policy vs linear: " + fmt(topk0_dev));

  // K = 1 stratification is exactly the base objective.
  const RankingDataset ds = random_dataset(20, 6, 2, 4005);
  const ChoiceDataset choices = explode_rankings(ds, ContextPolicy::backward());
  ModelParams base = ModelParams::linear(ds.catalog, 2);
  randomize_params(base, 4006);
  StratifiedParams strat;
  strat.laplacian_gain = 0.3;
  strat.strata = {base};
  TrainConfig cfg;
  cfg.l2 = 1e-4;
  const double gap = std::abs(objective(strat, choices, cfg) - objective(base, choices, cfg));
  out.require(gap <= 1e-12, "K=1 stratified vs base objective: " + fmt(gap));
  out.detail << "nested " << fmt(nested_dev) << ", zero-cdm " << fmt(zero_dev) << ", top-0 "
             << fmt(topk0_dev) << ", K=1 gap " << fmt(gap);
}

// ---------------------------------------------------------------- criterion 4

void criterion_recovery(Outcome& out) {
  const int m = 12, d = 5, n = 2000;
  const ProgramCatalog catalog = small_catalog(m);
  const CovariateTensor x = prefmod_test::random_covariates(n, m, d, 5001);

  ModelParams truth = ModelParams::linear(catalog, d);
  Rng truth_rng(5002);
  for (Eigen::Index i = 0; i < truth.delta_school.size(); ++i) {
    truth.delta_school[i] = truth_rng.normal01();
  }
  for (Eigen::Index i = 0; i < truth.delta_ptype.size(); ++i) {
    truth.delta_ptype[i] = truth_rng.normal01();
  }
  for (int i = 0; i < d; ++i) {
    truth.beta[i] = (truth_rng.bernoulli(0.5) ? 1.0 : -1.0) * truth_rng.uniform(0.3, 1.0);
  }

  RankingDataset ds;
  ds.catalog = catalog;
  ds.covariates = x;
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(5003, static_cast<std::uint64_t>(i)));
    ds.rankings.push_back(sample_partial_ranking(truth, x, i, ContextPolicy::backward(), 8, rng));
  }

  ModelSpec spec;
  spec.kind = ModelKind::Linear;
  TrainConfig cfg;
  cfg.step_size = 0.01;
  cfg.max_epochs = 1500;
  cfg.tolerance = 1e-7;
  cfg.seed = 5004;
  const FitResult result = fit(spec, ds, cfg);
  const ModelParams& fitted = std::get<ModelParams>(result.params);

  bool signs_ok = true;
  for (int i = 0; i < d; ++i) {
    if (std::signbit(fitted.beta[i]) != std::signbit(truth.beta[i])) signs_ok = false;
  }
  out.require(signs_ok, "beta sign pattern mismatch");

  double worst_tv = 0.0;
  Rng set_rng(5005);
  int sets = 0;
  while (sets < 100) {
    std::vector<int> s;
    for (int j = 0; j < m; ++j) {
      if (set_rng.bernoulli(0.5)) s.push_back(j);
    }
    if (s.size() < 2) continue;
    ++sets;
    const int agent = set_rng.uniform_int(0, n - 1);
    const Eigen::VectorXd pt = choice_probabilities(truth, x, agent, {}, s);
    const Eigen::VectorXd pf = choice_probabilities(fitted, x, agent, {}, s);
    worst_tv = std::max(worst_tv, 0.5 * (pt - pf).cwiseAbs().sum());
  }
  out.require(worst_tv <= 0.02, "total variation " + fmt(worst_tv) + " > 0.02");
  out.detail << "worst TV " << fmt(worst_tv) << " over 100 sets, epochs " << result.epochs;
}

// ---------------------------------------------------------------- criterion 5

void criterion_qualitative_ordering(Outcome& out) {
  const int seeds = 5;
  std::vector<double> nll_fixed(seeds), nll_linear(seeds), nll_cdm(seeds);
  std::vector<std::vector<double>> nll_topk(4, std::vector<double>(seeds));  // k = 0,1,2,inf

  for (int s = 0; s < seeds; ++s) {
    DistrictSpec dspec;
    dspec.num_agents = 2200;
    dspec.num_alternatives = 12;
    dspec.num_schools = 6;
    dspec.num_ptypes = 3;
    dspec.length_dist = LengthDist::fixed_len(8);
    dspec.seed = 6000 + static_cast<std::uint64_t>(s);
    const District district = generate_district(dspec);

    ModelParams truth =
        make_block_affinity_cdm(district.catalog, 15, 2.5, -0.6, ContextPolicy::backward());
    Rng tr(6100 + static_cast<std::uint64_t>(s));
    for (Eigen::Index i = 0; i < truth.delta_school.size(); ++i) {
      truth.delta_school[i] = 0.8 * tr.normal01();
    }
    for (Eigen::Index i = 0; i < truth.delta_ptype.size(); ++i) {
      truth.delta_ptype[i] = 0.8 * tr.normal01();
    }
    truth.beta[0] = -1.0;  // distance
    truth.beta[5] = 2.5;   // sibling match
    truth.beta[6] = 1.0;   // language match

    const RankingDataset all = sample_dataset(district, AnyParams(truth), dspec.length_dist,
                                              6200 + static_cast<std::uint64_t>(s));
    std::vector<int> train_ids(1500), test_ids(700);
    std::iota(train_ids.begin(), train_ids.end(), 0);
    std::iota(test_ids.begin(), test_ids.end(), 1500);
    const RankingDataset train = all.subset_agents(train_ids);
    const RankingDataset test = all.subset_agents(test_ids);

    TrainConfig cfg;
    cfg.step_size = 0.01;
    cfg.max_epochs = 500;
    cfg.tolerance = 1e-6;
    cfg.seed = 6300 + static_cast<std::uint64_t>(s);

    ModelSpec fixed_spec;
    fixed_spec.kind = ModelKind::FixedEffect;
    const FitResult fixed = fit(fixed_spec, train, cfg);
    nll_fixed[static_cast<std::size_t>(s)] =
        nll(fixed.params, explode_rankings(test, ContextPolicy::backward()));

    ModelSpec lin_spec;
    lin_spec.kind = ModelKind::Linear;
    const FitResult linear = fit(lin_spec, train, cfg);
    nll_linear[static_cast<std::size_t>(s)] =
        nll(linear.params, explode_rankings(test, ContextPolicy::backward()));

    // CDM fits warm-start their linear blocks at the linear solution.
    const ModelParams& lin_params = std::get<ModelParams>(linear.params);
    const auto fit_cdm = [&](ContextPolicy policy) {
      ModelSpec cdm_spec;
      cdm_spec.kind = ModelKind::CdmLowRank;
      cdm_spec.policy = policy;
      TrainConfig cdm_cfg = cfg;
      cdm_cfg.embedding_rank = 3;
      ModelParams warm = initial_params(cdm_spec, train.catalog, 15, cdm_cfg);
      warm.delta_school = lin_params.delta_school;
      warm.delta_ptype = lin_params.delta_ptype;
      warm.beta = lin_params.beta;
      const AnyParams warm_any = warm;
      const FitResult r = fit(cdm_spec, train, cdm_cfg, &warm_any);
      return nll(r.params, explode_rankings(test, policy));
    };

    nll_cdm[static_cast<std::size_t>(s)] = fit_cdm(ContextPolicy::backward());
    nll_topk[0][static_cast<std::size_t>(s)] = fit_cdm(ContextPolicy::top_k(0));
    nll_topk[1][static_cast<std::size_t>(s)] = fit_cdm(ContextPolicy::top_k(1));
    nll_topk[2][static_cast<std::size_t>(s)] = fit_cdm(ContextPolicy::top_k(2));
    nll_topk[3][static_cast<std::size_t>(s)] = nll_cdm[static_cast<std::size_t>(s)];
  }

  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double m_fixed = mean(nll_fixed), m_linear = mean(nll_linear), m_cdm = mean(nll_cdm);
  out.require(m_cdm < m_linear && m_linear < m_fixed,
              "ordering violated: cdm " + fmt(m_cdm) + ", linear " + fmt(m_linear) + ", fixed " +
                  fmt(m_fixed));

  // Monotone trend over k in {0, 1, 2, inf}: each step may only rise by noise
  // (two standard errors of the per-seed differences).
  const char* k_names[] = {"0", "1", "2", "inf"};
  for (int k = 0; k + 1 < 4; ++k) {
    std::vector<double> diffs(seeds);
    for (int s = 0; s < seeds; ++s) {
      diffs[static_cast<std::size_t>(s)] =
          nll_topk[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(s)] -
          nll_topk[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
    }
    const double d_mean = mean(diffs);
    double var = 0.0;
    for (double d : diffs) var += (d - d_mean) * (d - d_mean);
    const double stderr_d = std::sqrt(var / (seeds - 1)) / std::sqrt(static_cast<double>(seeds));
    const double slack = std::max(5e-4, 2.0 * stderr_d);
    out.require(d_mean <= slack, std::string("top-k trend broken at k=") + k_names[k] + "->" +
                                     k_names[k + 1] + ": mean diff " + fmt(d_mean) +
                                     " > slack " + fmt(slack));
  }
  out.detail << "held-out nll: fixed " << fmt(m_fixed) << ", linear " << fmt(m_linear)
             << ", top-k {" << fmt(mean(nll_topk[0])) << ", " << fmt(mean(nll_topk[1])) << ", "
             << fmt(mean(nll_topk[2])) << ", " << fmt(m_cdm) << "}";
}

// ---------------------------------------------------------------- criterion 6

void criterion_stratification_limits(Outcome& out) {
  // (a) With zero Laplacian gain the joint fit decouples into independent
  // per-stratum fits (linear base, matched zero initialization, fixed epochs).
  {
    const int epochs = 150;
    const RankingDataset ds = random_dataset(200, 8, 2, 7001, /*len=*/6);
    ModelSpec spec;
    spec.kind = ModelKind::Linear;
    TrainConfig cfg;
    cfg.strata = 3;
    cfg.laplacian = 0.0;
    cfg.max_epochs = epochs;
    cfg.tolerance = 1e-300;
    cfg.seed = 7002;
    const FitResult joint = fit(spec, ds, cfg);
    const StratifiedParams& strat = std::get<StratifiedParams>(joint.params);

    const ChoiceDataset choices = explode_rankings(ds, ContextPolicy::backward());
    TrainConfig solo_cfg = cfg;
    solo_cfg.strata = 1;
    double worst = 0.0;
    for (int k = 1; k <= 3; ++k) {
      ChoiceDataset slice = choices;
      slice.records.clear();
      for (const auto& rec : choices.records) {
        if (stratum_of(rec.rank_pos, 3) == k) slice.records.push_back(rec);
      }
      // Independent Adam on the slice, mirroring the training protocol.
      ModelParams solo = initial_params(spec, ds.catalog, 2, solo_cfg);
      Eigen::VectorXd x = flatten(solo);
      Eigen::VectorXd m_state = Eigen::VectorXd::Zero(x.size());
      Eigen::VectorXd v_state = Eigen::VectorXd::Zero(x.size());
      for (int t = 1; t <= epochs; ++t) {  // one update per epoch, as in the joint loop
        unflatten(x, solo);
        const Eigen::VectorXd g = gradient(solo, slice, solo_cfg);
        m_state = cfg.beta1 * m_state + (1.0 - cfg.beta1) * g;
        v_state = cfg.beta2 * v_state + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        x.array() -= cfg.step_size * (m_state.array() / bc1) /
                     ((v_state.array() / bc2).sqrt() + cfg.adam_epsilon);
      }
      worst = std::max(worst, (x - flatten(strat.strata[static_cast<std::size_t>(k - 1)]))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    out.require(worst <= 1e-6, "decoupling gap " + fmt(worst) + " > 1e-6");
    out.detail << "decoupling gap " << fmt(worst);
  }

  // (b) A huge Laplacian gain collapses the strata onto the non-stratified
  // solution. Fixed-length rankings with K equal to the length make the
  // collapsed optimum coincide with the base optimum.
  {
    const int K = 5;
    const RankingDataset all = random_dataset(1400, 8, 2, 7003, /*len=*/5);
    std::vector<int> train_ids(900), test_ids(500);
    std::iota(train_ids.begin(), train_ids.end(), 0);
    std::iota(test_ids.begin(), test_ids.end(), 900);
    const RankingDataset train = all.subset_agents(train_ids);
    const RankingDataset test = all.subset_agents(test_ids);

    ModelSpec spec;
    spec.kind = ModelKind::Linear;
    TrainConfig cfg;
    cfg.step_size = 3e-4;
    cfg.max_epochs = 4000;
    cfg.tolerance = 1e-10;
    cfg.seed = 7004;

    TrainConfig strat_cfg = cfg;
    strat_cfg.strata = K;
    strat_cfg.laplacian = 1e6;
    const FitResult collapsed = fit(spec, train, strat_cfg);
    const StratifiedParams& strat = std::get<StratifiedParams>(collapsed.params);

    Eigen::VectorXd mean_flat = Eigen::VectorXd::Zero(param_dim(strat.strata.front()));
    for (const auto& stratum : strat.strata) mean_flat += flatten(stratum);
    mean_flat /= static_cast<double>(K);
    double spread = 0.0;
    for (const auto& stratum : strat.strata) {
      spread = std::max(spread, (flatten(stratum) - mean_flat).cwiseAbs().maxCoeff());
    }
    out.require(spread <= 1e-3, "inter-stratum deviation " + fmt(spread) + " > 1e-3");

    const FitResult base = fit(spec, train, cfg);
    const ChoiceDataset test_choices = explode_rankings(test, ContextPolicy::backward());
    const double strat_nll = nll(collapsed.params, test_choices);
    const double base_nll = nll(base.params, test_choices);
    out.require(std::abs(strat_nll - base_nll) <= 1e-3,
                "held-out gap " + fmt(std::abs(strat_nll - base_nll)) + " > 1e-3");
    out.detail << "; collapse spread " << fmt(spread) << ", held-out gap "
               << fmt(std::abs(strat_nll - base_nll));
  }
}

// ---------------------------------------------------------------- criterion 7

void criterion_metric_oracles(Outcome& out) {
  // Per-rank recombination.
  {
    const RankingDataset ds = random_dataset(40, 6, 2, 8001);
    const ChoiceDataset choices = explode_rankings(ds, ContextPolicy::backward());
    ModelParams p = ModelParams::cdm_low_rank(ds.catalog, 2, 2, ContextPolicy::backward());
    randomize_params(p, 8002);
    const AnyParams any = p;
    double weighted = 0.0;
    long count = 0;
    for (const auto& row : nll_by_rank(any, choices)) {
      weighted += row.mean_nll * static_cast<double>(row.count);
      count += row.count;
    }
    const double gap = std::abs(weighted / static_cast<double>(count) - nll(p, choices));
    out.require(gap <= 1e-12, "per-rank recombination gap " + fmt(gap));
    out.detail << "recombination gap " << fmt(gap);
  }

  // Weighted tau against an O(m^2) brute-force oracle.
  {
    Rng rng(8003);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const int m = 3 + trial % 6;
      std::vector<int> a(static_cast<std::size_t>(m)), b(static_cast<std::size_t>(m));
      std::iota(a.begin(), a.end(), 0);
      std::iota(b.begin(), b.end(), 0);
      for (std::size_t i = a.size(); i > 1; --i) {
        std::swap(a[i - 1],
                  a[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        std::swap(b[i - 1],
                  b[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
      }
      std::vector<int> pos_a(static_cast<std::size_t>(m)), pos_b(static_cast<std::size_t>(m));
      for (int r = 0; r < m; ++r) {
        pos_a[static_cast<std::size_t>(a[static_cast<std::size_t>(r)])] = r + 1;
        pos_b[static_cast<std::size_t>(b[static_cast<std::size_t>(r)])] = r + 1;
      }
      double num_a = 0.0, den_a = 0.0, num_b = 0.0, den_b = 0.0;
      for (int e = 0; e < m; ++e) {
        for (int f = e + 1; f < m; ++f) {
          const bool concordant =
              (pos_a[static_cast<std::size_t>(e)] < pos_a[static_cast<std::size_t>(f)]) ==
              (pos_b[static_cast<std::size_t>(e)] < pos_b[static_cast<std::size_t>(f)]);
          const double sgn = concordant ? 1.0 : -1.0;
          const double wa = 1.0 / std::min(pos_a[static_cast<std::size_t>(e)],
                                           pos_a[static_cast<std::size_t>(f)]);
          const double wb = 1.0 / std::min(pos_b[static_cast<std::size_t>(e)],
                                           pos_b[static_cast<std::size_t>(f)]);
          num_a += wa * sgn;
          den_a += wa;
          num_b += wb * sgn;
          den_b += wb;
        }
      }
      const double oracle = 0.5 * (num_a / den_a + num_b / den_b);
      worst = std::max(worst,
                       std::abs(weighted_kendall_tau(a, b, TauWeighting::Hyperbolic) - oracle));
    }
    out.require(worst <= 1e-12, "tau oracle gap " + fmt(worst));
    out.detail << ", tau gap " << fmt(worst);
  }

  // Consistency collision identity at N = 100.
  {
    const int m = 6, n = 80, N = 100;
    const ProgramCatalog catalog = small_catalog(m);
    const CovariateTensor x = prefmod_test::random_covariates(n, m, 2, 8004);
    RankingDataset ds;
    ds.catalog = catalog;
    ds.covariates = x;
    Rng rng(8005);
    for (int i = 0; i < n; ++i) {
      std::vector<int> perm(static_cast<std::size_t>(m));
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t a2 = perm.size(); a2 > 1; --a2) {
        std::swap(perm[a2 - 1],
                  perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(a2) - 1))]);
      }
      perm.resize(3);
      ds.rankings.push_back(std::move(perm));
    }
    ModelParams p = ModelParams::linear(catalog, 2);
    randomize_params(p, 8006, 0.5);
    const PerAgentMetric cons =
        consistency_at_k(AnyParams(p), ds, ContextPolicy::backward(), 2, N, 8007);

    double expectation = 0.0, variance = 0.0;
    for (int i = 0; i < n; ++i) {
      const int first = ds.rankings[static_cast<std::size_t>(i)][0];
      std::vector<int> s;
      for (int j = 0; j < m; ++j) {
        if (j != first) s.push_back(j);
      }
      const std::vector<int> ctx{first};
      const Eigen::VectorXd probs = choice_probabilities(p, x, i, ctx, s);
      const double collision = probs.squaredNorm();
      expectation += collision;
      variance += 2.0 * collision * (1.0 - collision) / (N - 1);
    }
    expectation /= n;
    const double sigma = std::max(std::sqrt(variance) / n, 1e-5);
    const double gap = std::abs(*cons.mean - expectation);
    out.require(gap <= 3.0 * sigma, "consistency vs collision identity: gap " + fmt(gap) +
                                        " > 3 sigma " + fmt(3.0 * sigma));
    out.detail << ", collision gap " << fmt(gap) << " (3 sigma " << fmt(3.0 * sigma) << ")";
  }

  // A deterministic generator scores accuracy exactly 1 on its own samples.
  {
    const int m = 5;
    const ProgramCatalog catalog = identity_catalog(m);
    ModelParams truth = ModelParams::fixed_effect(catalog);
    for (int j = 0; j < m; ++j) truth.delta_school[j] = 60.0 * (m - j);
    const CovariateTensor no_x;
    RankingDataset ds;
    ds.catalog = catalog;
    for (int i = 0; i < 30; ++i) {
      Rng rng(mix_seed(8008, static_cast<std::uint64_t>(i)));
      ds.rankings.push_back(sample_ranking(truth, no_x, 0, ContextPolicy::backward(), rng));
    }
    bool all_one = true;
    for (int k = 1; k <= m; ++k) {
      const PerAgentMetric acc =
          accuracy_in_kth_prediction(AnyParams(truth), ds, ContextPolicy::backward(), k);
      if (!acc.mean.has_value() || *acc.mean != 1.0) all_one = false;
    }
    out.require(all_one, "deterministic generator accuracy != 1");
  }
}

// ---------------------------------------------------------------- criterion 8

struct CliRunner {
  std::string cli;
  fs::path base;
  Outcome* out;

  std::string run(const std::string& args) {
    const fs::path log = base / "last_stdout.txt";
    const std::string cmd = cli + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream captured;
    captured << in.rdbuf();
    if (status != 0) {
      out->require(false, "command failed: " + args + " :: " + captured.str().substr(0, 200));
    }
    return captured.str();
  }
};

std::string normalize(std::string text, const std::string& a, const std::string& b) {
  for (const std::string& needle : {a, b}) {
    std::size_t at;
    while ((at = text.find(needle)) != std::string::npos) {
      text.replace(at, needle.size(), "<dir>");
    }
  }
  return text;
}

bool dirs_equal(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (entry.is_regular_file()) rel_a.push_back(fs::relative(entry.path(), a));
  }
  for (const auto& entry : fs::recursive_directory_iterator(b)) {
    if (entry.is_regular_file()) rel_b.push_back(fs::relative(entry.path(), b));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) {
    why = "file lists differ under " + a.string();
    return false;
  }
  for (const auto& rel : rel_a) {
    std::ifstream fa(a / rel, std::ios::binary), fb(b / rel, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str()) {
      why = "byte mismatch in " + rel.string();
      return false;
    }
  }
  return true;
}

void criterion_cli_determinism(Outcome& out, const std::string& cli) {
  const fs::path base =
      fs::temp_directory_path() / ("prefmod_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  CliRunner runner{cli, base, &out};

  const auto twice = [&](const std::string& step, const std::string& args_template) {
    const fs::path dir_a = base / (step + "_a");
    const fs::path dir_b = base / (step + "_b");
    std::string args_a = args_template, args_b = args_template;
    const std::string marker = "{out}";
    args_a.replace(args_a.find(marker), marker.size(), dir_a.string());
    args_b.replace(args_b.find(marker), marker.size(), dir_b.string());
    const std::string out_a = runner.run(args_a);
    const std::string out_b = runner.run(args_b);
    if (normalize(out_a, dir_a.string(), dir_b.string()) !=
        normalize(out_b, dir_a.string(), dir_b.string())) {
      out.require(false, step + ": stdout differs between reruns");
    }
    std::string why;
    if (!dirs_equal(dir_a, dir_b, why)) out.require(false, step + ": " + why);
    return dir_a;
  };

  const fs::path data =
      twice("generate",
            "generate --agents 60 --alternatives 8 --schools 4 --ptypes 2 --seed 7 --out {out}");

  twice("explode",
        "explode --data " + data.string() + " --policy topk:1 --out {out}/choices.csv");

  const fs::path cdm_fit = twice(
      "fit", "fit --data " + data.string() +
                 " --model cdm --policy backward --rank 2 --epochs 40 --seed 3 --out {out}");
  const fs::path lin_fit = twice(
      "fit2", "fit --data " + data.string() + " --model linear --epochs 40 --seed 3 --out {out}");

  twice("evaluate", "evaluate --params " + (cdm_fit / "params.json").string() + " --data " +
                        data.string() +
                        " --kmax 2 --consistency-samples 20 --tau-samples 3 --seed 5 --out {out}");

  twice("compare", "compare --params " + (cdm_fit / "params.json").string() + " " +
                       (lin_fit / "params.json").string() + " --data " + data.string() +
                       " --kmax 2 --tau-samples 3 --seed 5 --out {out}");

  {
    std::ofstream grid(base / "grid.json");
    grid << "{\"l2\": [1e-5, 1e-3]}\n";
  }
  twice("tune", "tune --data " + data.string() + " --model linear --grid " +
                    (base / "grid.json").string() + " --folds 3 --epochs 25 --seed 9 --out {out}");

  twice("equiv-check", "equiv-check --sizes 3 --samples 5 --seed 4 --out {out}/report.txt");

  if (out.pass) fs::remove_all(base);
  out.detail << "7 verbs byte-identical across reruns";
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int id;
    const char* name;
    double budget_seconds;
    std::function<void(Outcome&)> body;
  };
  const std::string cli = argc > 1 ? argv[1] : "";

  const std::vector<Entry> entries = {
      {1, "forward/backward parameter-map equivalence", 30.0, criterion_equivalence},
      {2, "analytic gradients vs finite differences", 60.0, criterion_gradients},
      {3, "degeneracy identities", 0.0, criterion_degeneracies},
      {4, "synthetic linear-model recovery", 300.0, criterion_recovery},
      {5, "qualitative model ordering and top-k trend", 600.0, criterion_qualitative_ordering},
      {6, "stratification limits", 0.0, criterion_stratification_limits},
      {7, "metric oracles", 0.0, criterion_metric_oracles},
      {8, "CLI determinism", 0.0,
       [&cli](Outcome& out) {
         if (cli.empty()) {
           out.require(false, "CLI path not provided (argv[1])");
           return;
         }
         criterion_cli_determinism(out, cli);
       }},
  };

  int failures = 0;
  for (const auto& entry : entries) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      entry.body(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (entry.budget_seconds > 0.0 && seconds > entry.budget_seconds) {
      out.require(false,
                  "runtime " + fmt(seconds) + "s exceeds budget " + fmt(entry.budget_seconds) + "s");
    }
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << entry.id << ": "
              << entry.name << " (" << fmt(seconds) << "s";
    if (!out.detail.str().empty()) std::cout << "; " << out.detail.str();
    std::cout << ")" << std::endl;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
