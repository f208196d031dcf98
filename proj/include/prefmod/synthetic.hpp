#ifndef PREFMOD_SYNTHETIC_HPP
#define PREFMOD_SYNTHETIC_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prefmod/data.hpp"
#include "prefmod/params.hpp"

namespace prefmod {

// Distribution of submitted ranking lengths.
struct LengthDist {
  enum class Kind { Fixed, UniformInt, TruncatedGeometric };
  Kind kind = Kind::Fixed;
  int fixed = 5;
  int lo = 1, hi = 5;
  double mean = 5.0;  // TruncatedGeometric

  static LengthDist fixed_len(int k);
  static LengthDist uniform(int lo, int hi);
  static LengthDist truncated_geometric(double mean);

  void validate(int num_alternatives) const;
  int sample(Rng& rng, int num_alternatives) const;
};

// Desk-scale synthetic district knobs. Geography is a unit square with
// uniformly placed schools and clustered households; the covariate schema is
// fixed (see feature_schema()).
struct DistrictSpec {
  int num_agents = 400;
  int num_alternatives = 12;
  int num_schools = 6;
  int num_ptypes = 3;
  enum class NestScheme { ByProgramType, Single };
  NestScheme nest_scheme = NestScheme::ByProgramType;

  int num_home_clusters = 4;
  double cluster_spread = 0.08;

  double ctip1_fraction = 0.17;
  double sibling_fraction = 0.25;
  double prek_fraction = 0.15;
  double home_language_fraction = 0.2;
  double attendance_area_fraction = 0.6;

  LengthDist length_dist = LengthDist::fixed_len(5);
  std::uint64_t seed = 0;

  void validate() const;
};

const std::vector<std::string>& feature_schema();

struct District {
  ProgramCatalog catalog;
  CovariateTensor covariates;
  std::map<std::string, std::vector<std::string>> labels;
  std::vector<std::string> agent_ids;
};

// Deterministic: the same DistrictSpec yields the same district bit for bit.
District generate_district(const DistrictSpec& spec);

// Draws ranking lengths from `length_dist` and keeps the first k_i entries of
// a sequentially sampled ranking per agent. Adds a "first_program_type" label
// alongside the district labels.
RankingDataset sample_dataset(const District& district, const AnyParams& ground_truth,
                              const LengthDist& length_dist, std::uint64_t seed);

// Low-rank CDM ground truth whose interaction matrix is block-structured by
// program type: u_{jk} = self or cross affinity depending on whether j and k
// share a program type (embedding rank = number of program types).
ModelParams make_block_affinity_cdm(const ProgramCatalog& catalog, int num_features,
                                    double self_affinity, double cross_affinity,
                                    ContextPolicy policy);

}  // namespace prefmod

#endif  // PREFMOD_SYNTHETIC_HPP
