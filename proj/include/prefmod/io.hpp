#ifndef PREFMOD_IO_HPP
#define PREFMOD_IO_HPP

#include <string>

#include "prefmod/data.hpp"
#include "prefmod/estimation.hpp"
#include "prefmod/params.hpp"
#include "prefmod/synthetic.hpp"

namespace prefmod {

// On-disk representations:
//   DelimitedTable   — a directory of CSV files: catalog.csv
//                      (alternative,school,program_type,nest), rankings.csv
//                      (agent,rank,alternative), covariates.csv
//                      (agent,alternative,<feature...>), and an optional
//                      labels.csv (agent,label_name,label_value).
//   StructuredRecord — a single JSON file bundling all four tables.
// Field order and header names are part of the contract. Alternatives and
// agents are referenced by label in the files and by dense index in memory.
enum class DataFormat { DelimitedTable, StructuredRecord };

RankingDataset load_rankings(const std::string& path, DataFormat format);
void save_rankings(const RankingDataset& dataset, const std::string& path, DataFormat format);

ProgramCatalog load_catalog_csv(const std::string& path);
void save_catalog_csv(const ProgramCatalog& catalog, const std::string& path);

// Parameter files carry the variant tag, the catalog (with its fingerprint),
// and every array; loading restores an exact copy. Evaluation against data
// with a different fingerprint is refused at the evaluation entry points.
void save_params(const AnyParams& params, const std::string& path);
AnyParams load_params(const std::string& path);

TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& config, const std::string& path);

HyperGrid load_hyper_grid(const std::string& path);

// District generator spec plus the ground-truth model description used by the
// data-generation pipeline.
struct GroundTruthSpec {
  ModelKind kind = ModelKind::Linear;
  ContextPolicy policy = ContextPolicy::backward();
  int embedding_rank = 4;
  double delta_scale = 1.0;
  double beta_scale = 1.0;
  double block_self_affinity = 3.0;
  double block_cross_affinity = -0.3;
  bool block_structure = false;  // CDM only: program-type affinity blocks
};

struct GenerationSpec {
  DistrictSpec district;
  GroundTruthSpec ground_truth;
};

GenerationSpec load_generation_spec(const std::string& path);

// Random parameters per the ground-truth description (deterministic in seed).
ModelParams build_ground_truth(const GroundTruthSpec& spec, const ProgramCatalog& catalog,
                               int num_features, std::uint64_t seed);

// Shortest round-trip decimal form of a double (used by every CSV writer so
// outputs are byte-stable).
std::string format_double(double value);

}  // namespace prefmod

#endif  // PREFMOD_IO_HPP
