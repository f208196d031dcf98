#include "prefmod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "prefmod/rng.hpp"

namespace prefmod {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

int index_in(std::span<const int> sorted_set, int item) {
  const auto it = std::lower_bound(sorted_set.begin(), sorted_set.end(), item);
  if (it == sorted_set.end() || *it != item) {
    throw std::invalid_argument("metrics: item missing from choice set");
  }
  return static_cast<int>(it - sorted_set.begin());
}

// Choice set and resolved context for the k-th position given the true first
// k-1 choices (1-based k). The choice set stays ascending.
void position_sets(const RankingDataset& data, int agent, int k, ContextPolicy policy,
                   std::vector<int>& context, std::vector<int>& choice_set) {
  const int m = data.catalog.num_alternatives();
  const auto& ranking = data.rankings[static_cast<std::size_t>(agent)];
  std::vector<char> taken(static_cast<std::size_t>(m), 0);
  for (int j = 0; j < k - 1; ++j) taken[static_cast<std::size_t>(ranking[static_cast<std::size_t>(j)])] = 1;
  choice_set.clear();
  for (int j = 0; j < m; ++j) {
    if (!taken[static_cast<std::size_t>(j)]) choice_set.push_back(j);
  }
  context.clear();
  switch (policy.kind) {
    case ContextPolicy::Kind::Backward:
      context.assign(ranking.begin(), ranking.begin() + (k - 1));
      break;
    case ContextPolicy::Kind::TopK: {
      const int len = std::min(policy.k, k - 1);
      context.assign(ranking.begin(), ranking.begin() + len);
      break;
    }
    case ContextPolicy::Kind::Forward:
      break;
  }
}

}  // namespace

std::vector<RankNllRow> nll_by_rank(const AnyParams& params, const ChoiceDataset& choices) {
  check_compatible(params, choices.catalog, choices.covariates.num_features());
  std::map<int, std::pair<double, long>> acc;  // rank -> (sum nll, count)
  for (const auto& rec : choices.records) {
    const ModelParams& p = params_for_rank(params, rec.rank_pos);
    const Eigen::VectorXd logp = log_choice_probabilities(
        p, choices.covariates, rec.agent, rec.context, rec.choice_set);
    auto& slot = acc[rec.rank_pos];
    slot.first += -logp[index_in(rec.choice_set, rec.chosen)];
    slot.second += 1;
  }
  std::vector<RankNllRow> rows;
  rows.reserve(acc.size());
  for (const auto& [rank, sums] : acc) {
    rows.push_back({rank, sums.first / static_cast<double>(sums.second), sums.second});
  }
  return rows;
}

PerAgentMetric accuracy_in_kth_prediction(const AnyParams& params, const RankingDataset& data,
                                          ContextPolicy policy, int k) {
  if (k < 1) throw std::invalid_argument("accuracy: position must be >= 1");
  data.validate();
  check_compatible(params, data.catalog, data.covariates.num_features());

  PerAgentMetric out;
  out.values.assign(static_cast<std::size_t>(data.num_agents()), kNan);
  double hits = 0.0;
  std::vector<int> context, choice_set;
  for (int i = 0; i < data.num_agents(); ++i) {
    const auto& ranking = data.rankings[static_cast<std::size_t>(i)];
    if (static_cast<int>(ranking.size()) < k) continue;
    position_sets(data, i, k, policy, context, choice_set);
    const ModelParams& p = params_for_rank(params, k);
    const Eigen::VectorXd v =
        representative_utilities(p, data.covariates, i, context, choice_set);
    // Candidates are ascending, so keeping the first strict maximum breaks
    // ties toward the lowest alternative index.
    int best = 0;
    for (int idx = 1; idx < static_cast<int>(choice_set.size()); ++idx) {
      if (v[idx] > v[best]) best = idx;
    }
    const double hit =
        choice_set[static_cast<std::size_t>(best)] == ranking[static_cast<std::size_t>(k - 1)]
            ? 1.0
            : 0.0;
    out.values[static_cast<std::size_t>(i)] = hit;
    hits += hit;
    ++out.count;
  }
  if (out.count > 0) out.mean = hits / static_cast<double>(out.count);
  return out;
}

PerAgentMetric consistency_at_k(const AnyParams& params, const RankingDataset& data,
                                ContextPolicy policy, int k, int num_samples,
                                std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("consistency: position must be >= 1");
  if (num_samples < 2) throw std::invalid_argument("consistency: need at least two samples");
  data.validate();
  check_compatible(params, data.catalog, data.covariates.num_features());

  PerAgentMetric out;
  out.values.assign(static_cast<std::size_t>(data.num_agents()), kNan);
  double total = 0.0;
  std::vector<int> context, choice_set;
  for (int i = 0; i < data.num_agents(); ++i) {
    const auto& ranking = data.rankings[static_cast<std::size_t>(i)];
    if (static_cast<int>(ranking.size()) < k) continue;
    position_sets(data, i, k, policy, context, choice_set);
    const ModelParams& p = params_for_rank(params, k);
    const Eigen::VectorXd probs =
        choice_probabilities(p, data.covariates, i, context, choice_set);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<long> counts(choice_set.size(), 0);
    for (int s = 0; s < num_samples; ++s) {
      ++counts[static_cast<std::size_t>(rng.categorical(
          std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size()))))];
    }
    double agreeing = 0.0;
    for (long c : counts) agreeing += static_cast<double>(c) * (c - 1);
    const double frac =
        agreeing / (static_cast<double>(num_samples) * (num_samples - 1));
    out.values[static_cast<std::size_t>(i)] = frac;
    total += frac;
    ++out.count;
  }
  if (out.count > 0) out.mean = total / static_cast<double>(out.count);
  return out;
}

double weighted_kendall_tau(std::span<const int> order_a, std::span<const int> order_b,
                            TauWeighting weighting) {
  const int m = static_cast<int>(order_a.size());
  if (order_b.size() != order_a.size()) {
    throw std::invalid_argument("kendall_tau: order length mismatch");
  }
  std::vector<int> pos_a(static_cast<std::size_t>(m), -1), pos_b(static_cast<std::size_t>(m), -1);
  for (int r = 0; r < m; ++r) {
    const int ea = order_a[static_cast<std::size_t>(r)];
    const int eb = order_b[static_cast<std::size_t>(r)];
    if (ea < 0 || ea >= m || eb < 0 || eb >= m || pos_a[static_cast<std::size_t>(ea)] != -1 ||
        pos_b[static_cast<std::size_t>(eb)] != -1) {
      throw std::invalid_argument("kendall_tau: orders must be permutations of the universe");
    }
    pos_a[static_cast<std::size_t>(ea)] = r + 1;  // 1-based ranks
    pos_b[static_cast<std::size_t>(eb)] = r + 1;
  }
  if (m < 2) return 1.0;

  double num_a = 0.0, den_a = 0.0, num_b = 0.0, den_b = 0.0;
  for (int e = 0; e < m; ++e) {
    for (int f = e + 1; f < m; ++f) {
      const int da = pos_a[static_cast<std::size_t>(e)] - pos_a[static_cast<std::size_t>(f)];
      const int db = pos_b[static_cast<std::size_t>(e)] - pos_b[static_cast<std::size_t>(f)];
      const double sign = (da > 0) == (db > 0) ? 1.0 : -1.0;
      double wa = 1.0, wb = 1.0;
      if (weighting == TauWeighting::Hyperbolic) {
        wa = 1.0 / std::min(pos_a[static_cast<std::size_t>(e)], pos_a[static_cast<std::size_t>(f)]);
        wb = 1.0 / std::min(pos_b[static_cast<std::size_t>(e)], pos_b[static_cast<std::size_t>(f)]);
      }
      num_a += wa * sign;
      den_a += wa;
      num_b += wb * sign;
      den_b += wb;
    }
  }
  return 0.5 * (num_a / den_a + num_b / den_b);
}

std::vector<GroupRow> disaggregate(const PerAgentMetric& metric,
                                   const std::vector<std::string>& labels) {
  if (labels.size() != metric.values.size()) {
    throw std::invalid_argument("disaggregate: label vector does not cover all agents");
  }
  std::map<std::string, std::pair<double, long>> acc;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::isnan(metric.values[i])) continue;
    const std::string key = labels[i].empty() ? "unlabeled" : labels[i];
    auto& slot = acc[key];
    slot.first += metric.values[i];
    slot.second += 1;
  }
  std::vector<GroupRow> rows;
  rows.reserve(acc.size());
  for (const auto& [group, sums] : acc) {
    rows.push_back({group, sums.first / static_cast<double>(sums.second), sums.second});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const GroupRow& a, const GroupRow& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.group < b.group;
  });
  return rows;
}

ContextPolicy policy_of(const AnyParams& params) {
  if (const auto* base = std::get_if<ModelParams>(&params)) return base->policy;
  return std::get<StratifiedParams>(params).strata.front().policy;
}

std::vector<int> sample_ranking_any(const AnyParams& params, const CovariateTensor& covariates,
                                    int agent, ContextPolicy policy, Rng& rng) {
  if (const auto* base = std::get_if<ModelParams>(&params)) {
    return sample_ranking(*base, covariates, agent, policy, rng);
  }
  const auto& strat = std::get<StratifiedParams>(params);
  const int m = strat.strata.front().catalog.num_alternatives();
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(m));
  std::vector<int> choice_set(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) choice_set[static_cast<std::size_t>(j)] = j;
  std::vector<int> context;
  for (int pos = 1; pos <= m; ++pos) {
    context.clear();
    switch (policy.kind) {
      case ContextPolicy::Kind::Backward:
        context = out;
        break;
      case ContextPolicy::Kind::TopK: {
        const int len = std::min<int>(policy.k, static_cast<int>(out.size()));
        context.assign(out.begin(), out.begin() + len);
        break;
      }
      case ContextPolicy::Kind::Forward:
        break;
    }
    const ModelParams& p = params_for_rank(params, pos);
    const Eigen::VectorXd probs =
        choice_probabilities(p, covariates, agent, context, choice_set);
    const int idx = rng.categorical(
        std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
    const int chosen = choice_set[static_cast<std::size_t>(idx)];
    out.push_back(chosen);
    choice_set.erase(std::find(choice_set.begin(), choice_set.end(), chosen));
  }
  return out;
}

TauMatrix sampled_tau_matrix(const std::vector<AnyParams>& models,
                             const std::vector<std::string>& names,
                             const RankingDataset& data, int samples_per_agent,
                             std::uint64_t seed, TauWeighting weighting) {
  if (models.size() != names.size()) {
    throw std::invalid_argument("tau_matrix: one name per model required");
  }
  if (samples_per_agent < 2) throw std::invalid_argument("tau_matrix: need >= 2 samples");
  const int n = data.num_agents();
  const std::size_t num_models = models.size();

  // Sample every model's lists once per agent, then correlate all pairs.
  TauMatrix out;
  out.names = names;
  out.values.assign(num_models, std::vector<double>(num_models, 0.0));
  std::vector<std::vector<std::vector<int>>> lists(num_models);
  for (std::size_t mi = 0; mi < num_models; ++mi) {
    lists[mi].reserve(static_cast<std::size_t>(n));
    const ContextPolicy policy = policy_of(models[mi]);
    for (int i = 0; i < n; ++i) {
      Rng rng(mix_seed(seed, (static_cast<std::uint64_t>(mi) << 32) ^
                                 static_cast<std::uint64_t>(i)));
      for (int s = 0; s < samples_per_agent; ++s) {
        lists[mi].push_back(sample_ranking_any(models[mi], data.covariates, i, policy, rng));
      }
    }
  }
  const auto agent_lists = [&](std::size_t mi, int agent) {
    return lists[mi].begin() + static_cast<long>(agent) * samples_per_agent;
  };
  for (std::size_t a = 0; a < num_models; ++a) {
    for (std::size_t b = a; b < num_models; ++b) {
      double total = 0.0;
      long pairs = 0;
      for (int i = 0; i < n; ++i) {
        const auto la = agent_lists(a, i);
        const auto lb = agent_lists(b, i);
        for (int s = 0; s < samples_per_agent; ++s) {
          for (int t = (a == b ? s + 1 : 0); t < samples_per_agent; ++t) {
            total += weighted_kendall_tau(*(la + s), *(lb + t), weighting);
            ++pairs;
          }
        }
      }
      const double mean = pairs > 0 ? total / static_cast<double>(pairs) : 0.0;
      out.values[a][b] = mean;
      out.values[b][a] = mean;
    }
  }
  return out;
}

}  // namespace prefmod
