#ifndef PREFMOD_DATA_HPP
#define PREFMOD_DATA_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "prefmod/catalog.hpp"

namespace prefmod {

// How the context set for the j-th choice of a ranking is formed.
//   Backward — all previously chosen alternatives.
//   TopK(k)  — the first min(k, j-1) chosen alternatives.
//   Forward  — the rest of the current choice set, S \ {candidate}; this one
//              varies per candidate, so it is kept as a marker and resolved
//              at utility evaluation instead of being materialized.
struct ContextPolicy {
  enum class Kind { Backward, Forward, TopK };

  Kind kind = Kind::Backward;
  int k = 0;  // TopK only

  static ContextPolicy backward() { return {Kind::Backward, 0}; }
  static ContextPolicy forward() { return {Kind::Forward, 0}; }
  static ContextPolicy top_k(int k);

  bool operator==(const ContextPolicy&) const = default;

  std::string to_string() const;
  static ContextPolicy parse(const std::string& text);
};

// Dense n x m x d covariate tensor with named features. Copies are cheap
// (shared storage); the data is immutable after construction.
class CovariateTensor {
 public:
  CovariateTensor() : values_(std::make_shared<const std::vector<double>>()) {}
  CovariateTensor(int num_agents, int num_alternatives,
                  std::vector<std::string> feature_names, std::vector<double> values);

  int num_agents() const { return n_; }
  int num_alternatives() const { return m_; }
  int num_features() const { return d_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  // Pointer to the d contiguous values for (agent, alternative); null when d == 0.
  const double* row(int agent, int alt) const {
    if (d_ == 0) return nullptr;
    return values_->data() + (static_cast<std::size_t>(agent) * m_ + alt) * d_;
  }
  double value(int agent, int alt, int feature) const { return row(agent, alt)[feature]; }
  const std::vector<double>& values() const { return *values_; }

  // Rows for the given agents only, in the given order.
  CovariateTensor subset_agents(const std::vector<int>& agents) const;

  bool operator==(const CovariateTensor& o) const {
    return n_ == o.n_ && m_ == o.m_ && d_ == o.d_ && names_ == o.names_ &&
           *values_ == *o.values_;
  }

 private:
  int n_ = 0, m_ = 0, d_ = 0;
  std::vector<std::string> names_;
  std::shared_ptr<const std::vector<double>> values_;
};

// Partial rankings over a catalog plus per-(agent, alternative) covariates and
// optional categorical group labels ("" marks an unlabeled agent). Immutable
// by convention once built.
struct RankingDataset {
  ProgramCatalog catalog;
  std::vector<std::string> agent_ids;
  std::vector<std::vector<int>> rankings;
  CovariateTensor covariates;
  std::map<std::string, std::vector<std::string>> group_labels;

  int num_agents() const { return static_cast<int>(rankings.size()); }
  long total_choices() const;
  int max_ranking_length() const;

  // Throws std::invalid_argument on any structural violation.
  void validate() const;

  RankingDataset subset_agents(const std::vector<int>& agents) const;
};

// One exploded choice: agent picked `chosen` at rank `rank_pos` (1-based) out
// of `choice_set`, with `context` holding the policy-resolved prior choices
// (always empty under the Forward marker policy).
struct ChoiceRecord {
  int agent = 0;
  int rank_pos = 1;
  int chosen = 0;
  std::vector<int> context;
  std::vector<int> choice_set;
};

struct ChoiceDataset {
  ProgramCatalog catalog;
  ContextPolicy policy;
  CovariateTensor covariates;
  std::vector<ChoiceRecord> records;

  std::size_t size() const { return records.size(); }
};

// Unravels each ranking into a sequence of choices from shrinking choice sets,
// most preferred first. The first choice set is the full universe.
ChoiceDataset explode_rankings(const RankingDataset& dataset, ContextPolicy policy);

struct GroupFraction {
  std::string value;
  long count = 0;
  double fraction = 0.0;
};

struct DatasetSummary {
  int num_agents = 0;
  int num_alternatives = 0;
  int num_schools = 0;
  int num_ptypes = 0;
  double mean_ranking_length = 0.0;
  long total_choices = 0;
  // label name -> value fractions, descending count. Empty when no labels.
  std::map<std::string, std::vector<GroupFraction>> group_fractions;
};

DatasetSummary summarize(const RankingDataset& dataset);
std::string to_string(const DatasetSummary& summary);

}  // namespace prefmod

#endif  // PREFMOD_DATA_HPP
