#include "prefmod/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prefmod {

ContextPolicy ContextPolicy::top_k(int k) {
  if (k < 0) throw std::invalid_argument("ContextPolicy: top-k count must be non-negative");
  return {Kind::TopK, k};
}

std::string ContextPolicy::to_string() const {
  switch (kind) {
    case Kind::Backward: return "backward";
    case Kind::Forward: return "forward";
    case Kind::TopK: return "topk:" + std::to_string(k);
  }
  return "backward";
}

ContextPolicy ContextPolicy::parse(const std::string& text) {
  if (text == "backward") return backward();
  if (text == "forward") return forward();
  if (text.rfind("topk:", 0) == 0) {
    try {
      return top_k(std::stoi(text.substr(5)));
    } catch (const std::exception&) {
      throw std::invalid_argument("ContextPolicy: bad top-k count in '" + text + "'");
    }
  }
  throw std::invalid_argument("ContextPolicy: unknown policy '" + text +
                              "' (expected backward, forward, or topk:K)");
}

CovariateTensor::CovariateTensor(int num_agents, int num_alternatives,
                                 std::vector<std::string> feature_names,
                                 std::vector<double> values)
    : n_(num_agents),
      m_(num_alternatives),
      d_(static_cast<int>(feature_names.size())),
      names_(std::move(feature_names)) {
  if (values.size() != static_cast<std::size_t>(n_) * m_ * d_) {
    throw std::invalid_argument("covariates: value buffer size does not match n*m*d");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("covariates: non-finite entry");
  }
  values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

CovariateTensor CovariateTensor::subset_agents(const std::vector<int>& agents) const {
  std::vector<double> out;
  out.reserve(agents.size() * static_cast<std::size_t>(m_) * d_);
  for (int a : agents) {
    const double* base = values_->data() + static_cast<std::size_t>(a) * m_ * d_;
    out.insert(out.end(), base, base + static_cast<std::size_t>(m_) * d_);
  }
  return CovariateTensor(static_cast<int>(agents.size()), m_, names_, std::move(out));
}

long RankingDataset::total_choices() const {
  long total = 0;
  for (const auto& r : rankings) total += static_cast<long>(r.size());
  return total;
}

int RankingDataset::max_ranking_length() const {
  std::size_t mx = 0;
  for (const auto& r : rankings) mx = std::max(mx, r.size());
  return static_cast<int>(mx);
}

void RankingDataset::validate() const {
  const int m = catalog.num_alternatives();
  const int n = num_agents();
  if (!agent_ids.empty() && static_cast<int>(agent_ids.size()) != n) {
    throw std::invalid_argument("dataset: agent id count does not match ranking count");
  }
  for (int i = 0; i < n; ++i) {
    const auto& r = rankings[static_cast<std::size_t>(i)];
    if (r.empty() || static_cast<int>(r.size()) > m) {
      throw std::invalid_argument("dataset: agent " + std::to_string(i) +
                                  " has ranking length outside [1, m]");
    }
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    for (int alt : r) {
      if (alt < 0 || alt >= m) {
        throw std::invalid_argument("dataset: agent " + std::to_string(i) +
                                    " ranks out-of-range alternative " + std::to_string(alt));
      }
      if (seen[static_cast<std::size_t>(alt)]) {
        throw std::invalid_argument("dataset: agent " + std::to_string(i) +
                                    " ranks alternative " + std::to_string(alt) + " twice");
      }
      seen[static_cast<std::size_t>(alt)] = 1;
    }
  }
  if (covariates.num_features() > 0) {
    if (covariates.num_agents() != n || covariates.num_alternatives() != m) {
      throw std::invalid_argument("dataset: covariate tensor shape does not match n x m");
    }
  }
  for (const auto& [name, values] : group_labels) {
    if (static_cast<int>(values.size()) != n) {
      throw std::invalid_argument("dataset: label '" + name + "' does not cover all agents");
    }
  }
}

RankingDataset RankingDataset::subset_agents(const std::vector<int>& agents) const {
  RankingDataset out;
  out.catalog = catalog;
  out.rankings.reserve(agents.size());
  out.agent_ids.reserve(agents.size());
  for (int a : agents) {
    out.rankings.push_back(rankings[static_cast<std::size_t>(a)]);
    if (!agent_ids.empty()) out.agent_ids.push_back(agent_ids[static_cast<std::size_t>(a)]);
  }
  if (covariates.num_features() > 0) out.covariates = covariates.subset_agents(agents);
  for (const auto& [name, values] : group_labels) {
    std::vector<std::string> sub;
    sub.reserve(agents.size());
    for (int a : agents) sub.push_back(values[static_cast<std::size_t>(a)]);
    out.group_labels.emplace(name, std::move(sub));
  }
  return out;
}

ChoiceDataset explode_rankings(const RankingDataset& dataset, ContextPolicy policy) {
  dataset.validate();
  const int m = dataset.catalog.num_alternatives();

  ChoiceDataset out;
  out.catalog = dataset.catalog;
  out.policy = policy;
  out.covariates = dataset.covariates;
  out.records.reserve(static_cast<std::size_t>(dataset.total_choices()));

  std::vector<int> full(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) full[static_cast<std::size_t>(j)] = j;

  for (int i = 0; i < dataset.num_agents(); ++i) {
    const auto& ranking = dataset.rankings[static_cast<std::size_t>(i)];
    std::vector<int> choice_set = full;
    for (int j = 0; j < static_cast<int>(ranking.size()); ++j) {
      ChoiceRecord rec;
      rec.agent = i;
      rec.rank_pos = j + 1;
      rec.chosen = ranking[static_cast<std::size_t>(j)];
      rec.choice_set = choice_set;
      switch (policy.kind) {
        case ContextPolicy::Kind::Backward:
          rec.context.assign(ranking.begin(), ranking.begin() + j);
          break;
        case ContextPolicy::Kind::TopK: {
          const int len = std::min(policy.k, j);
          rec.context.assign(ranking.begin(), ranking.begin() + len);
          break;
        }
        case ContextPolicy::Kind::Forward:
          break;  // resolved per candidate at evaluation
      }
      out.records.push_back(std::move(rec));
      choice_set.erase(std::find(choice_set.begin(), choice_set.end(), rec.chosen));
    }
  }
  return out;
}

DatasetSummary summarize(const RankingDataset& dataset) {
  DatasetSummary s;
  s.num_agents = dataset.num_agents();
  s.num_alternatives = dataset.catalog.num_alternatives();
  s.num_schools = dataset.catalog.num_schools();
  s.num_ptypes = dataset.catalog.num_ptypes();
  s.total_choices = dataset.total_choices();
  s.mean_ranking_length =
      s.num_agents > 0 ? static_cast<double>(s.total_choices) / s.num_agents : 0.0;

  for (const auto& [name, values] : dataset.group_labels) {
    std::map<std::string, long> counts;
    for (const auto& v : values) ++counts[v];
    std::vector<GroupFraction> rows;
    for (const auto& [value, count] : counts) {
      GroupFraction g;
      g.value = value.empty() ? "unlabeled" : value;
      g.count = count;
      g.fraction = s.num_agents > 0 ? static_cast<double>(count) / s.num_agents : 0.0;
      rows.push_back(std::move(g));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const GroupFraction& a, const GroupFraction& b) {
                       if (a.count != b.count) return a.count > b.count;
                       return a.value < b.value;
                     });
    s.group_fractions.emplace(name, std::move(rows));
  }
  return s;
}

std::string to_string(const DatasetSummary& s) {
  std::ostringstream os;
  os << "participating households, n    " << s.num_agents << "\n"
     << "total offerings, m             " << s.num_alternatives << "\n"
     << "unique schools, n_s            " << s.num_schools << "\n"
     << "unique program types, n_p      " << s.num_ptypes << "\n"
     << "avg ranking length, k_bar      " << s.mean_ranking_length << "\n"
     << "size of choice dataset, sum k  " << s.total_choices << "\n";
  for (const auto& [name, rows] : s.group_fractions) {
    os << name << ":\n";
    for (const auto& g : rows) {
      os << "  " << g.value << "  " << 100.0 * g.fraction << "% (" << g.count << ")\n";
    }
  }
  return os.str();
}

}  // namespace prefmod
