#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "prefmod/io.hpp"
#include "prefmod/synthetic.hpp"
#include "test_helpers.hpp"

using namespace prefmod;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("io");

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("prefmod_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("small delimited tables load with the declared shapes") {
  TempDir tmp;
  write(tmp.path / "catalog.csv",
        "alternative,school,program_type,nest\n"
        "a,s1,ge,n1\nb,s1,sp,n1\nc,s2,ge,n2\nd,s2,sp,n2\n");
  write(tmp.path / "rankings.csv",
        "agent,rank,alternative\n"
        "h1,1,b\nh1,2,a\nh2,1,c\nh3,1,d\nh3,2,c\nh3,3,a\n");
  write(tmp.path / "covariates.csv",
        std::string("agent,alternative,distance,sibling\n") + [] {
          std::string rows;
          for (const char* agent : {"h1", "h2", "h3"}) {
            for (const char* alt : {"a", "b", "c", "d"}) {
              rows += std::string(agent) + "," + alt + ",1.5,0\n";
            }
          }
          return rows;
        }());

  const RankingDataset ds = load_rankings(tmp.path.string(), DataFormat::DelimitedTable);
  CHECK(ds.num_agents() == 3);
  CHECK(ds.catalog.num_alternatives() == 4);
  CHECK(ds.catalog.num_schools() == 2);
  CHECK(ds.catalog.num_ptypes() == 2);
  CHECK(ds.covariates.num_features() == 2);
  CHECK(ds.rankings[0] == std::vector<int>{1, 0});
  CHECK(ds.rankings[2].size() == 3);
  CHECK(ds.covariates.feature_names()[0] == "distance");
}

TEST_CASE("unknown labels and duplicate identifiers are reported with positions") {
  TempDir tmp;
  write(tmp.path / "catalog.csv", "alternative,school,program_type,nest\na,s1,ge,n1\nb,s1,ge,n1\n");
  write(tmp.path / "covariates.csv", "agent,alternative\n");

  write(tmp.path / "rankings.csv", "agent,rank,alternative\nh1,1,zzz\n");
  CHECK_THROWS_WITH_AS(load_rankings(tmp.path.string(), DataFormat::DelimitedTable),
                       doctest::Contains("zzz"), std::runtime_error);

  write(tmp.path / "rankings.csv", "agent,rank,alternative\nh1,1,a\nh1,1,b\n");
  CHECK_THROWS_WITH_AS(load_rankings(tmp.path.string(), DataFormat::DelimitedTable),
                       doctest::Contains("duplicate"), std::runtime_error);

  write(tmp.path / "rankings.csv", "agent,rank,alternative\nh1,2,a\n");
  CHECK_THROWS_AS(load_rankings(tmp.path.string(), DataFormat::DelimitedTable),
                  std::runtime_error);
}

TEST_CASE("datasets round-trip through both formats") {
  DistrictSpec spec;
  spec.num_agents = 25;
  spec.num_alternatives = 8;
  spec.num_schools = 4;
  spec.num_ptypes = 2;
  spec.length_dist = LengthDist::uniform(1, 6);
  spec.seed = 42;
  const District district = generate_district(spec);
  ModelParams truth = ModelParams::linear(district.catalog, 15);
  prefmod_test::randomize_params(truth, 43, 0.4);
  const RankingDataset original =
      sample_dataset(district, AnyParams(truth), spec.length_dist, 44);

  TempDir tmp;
  const auto table_dir = (tmp.path / "tables").string();
  save_rankings(original, table_dir, DataFormat::DelimitedTable);
  const RankingDataset from_tables = load_rankings(table_dir, DataFormat::DelimitedTable);
  CHECK(from_tables.catalog == original.catalog);
  CHECK(from_tables.rankings == original.rankings);
  CHECK(from_tables.agent_ids == original.agent_ids);
  CHECK(from_tables.group_labels == original.group_labels);
  CHECK(from_tables.covariates == original.covariates);

  const auto bundle = (tmp.path / "bundle.json").string();
  save_rankings(original, bundle, DataFormat::StructuredRecord);
  const RankingDataset from_bundle = load_rankings(bundle, DataFormat::StructuredRecord);
  CHECK(from_bundle.catalog == original.catalog);
  CHECK(from_bundle.rankings == original.rankings);
  CHECK(from_bundle.covariates == original.covariates);
  CHECK(from_bundle.group_labels == original.group_labels);
}

TEST_CASE("parameter files round-trip for every variant") {
  const ProgramCatalog catalog = prefmod_test::nested_catalog(6, 3);
  TempDir tmp;
  const auto path = (tmp.path / "params.json").string();

  std::vector<ModelParams> variants;
  variants.push_back(ModelParams::fixed_effect(catalog));
  variants.push_back(ModelParams::linear(catalog, 3));
  variants.push_back(ModelParams::cdm_low_rank(catalog, 3, 2, ContextPolicy::top_k(2)));
  variants.push_back(ModelParams::cdm_full(catalog, 3, ContextPolicy::forward(),
                                           ContextAggregation::Sum));
  variants.push_back(ModelParams::nested(catalog, 3));
  for (std::size_t i = 0; i < variants.size(); ++i) {
    prefmod_test::randomize_params(variants[i], 50 + i);
    save_params(variants[i], path);
    const AnyParams loaded = load_params(path);
    const ModelParams& got = std::get<ModelParams>(loaded);
    CHECK(got.kind == variants[i].kind);
    CHECK(got.policy == variants[i].policy);
    CHECK(got.context_agg == variants[i].context_agg);
    CHECK((flatten(got) - flatten(variants[i])).cwiseAbs().maxCoeff() == 0.0);
    CHECK((got.alt_offset - variants[i].alt_offset).cwiseAbs().maxCoeff() == 0.0);
  }

  StratifiedParams strat;
  strat.laplacian_gain = 1e-3;
  for (std::uint64_t k = 0; k < 3; ++k) {
    ModelParams p = ModelParams::linear(catalog, 3);
    prefmod_test::randomize_params(p, 60 + k);
    strat.strata.push_back(std::move(p));
  }
  save_params(strat, path);
  const AnyParams loaded = load_params(path);
  const auto& got = std::get<StratifiedParams>(loaded);
  CHECK(got.num_strata() == 3);
  CHECK(got.laplacian_gain == strat.laplacian_gain);
  CHECK((flatten_stratified(got) - flatten_stratified(strat)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fingerprint mismatches are refused at evaluation") {
  const RankingDataset ds = prefmod_test::random_dataset(10, 5, 2, 70);
  const ModelParams wrong_universe = ModelParams::linear(prefmod_test::small_catalog(6), 2);
  const ChoiceDataset choices = explode_rankings(ds, ContextPolicy::backward());
  CHECK_THROWS_AS(nll(wrong_universe, choices), std::invalid_argument);

  const ModelParams wrong_features = ModelParams::linear(ds.catalog, 4);
  CHECK_THROWS_AS(nll(wrong_features, choices), std::invalid_argument);

  // Same shapes but a different nest map: hash must differ.
  const ModelParams wrong_nests = ModelParams::linear(prefmod_test::nested_catalog(5, 2), 2);
  CHECK_THROWS_AS(nll(wrong_nests, choices), std::invalid_argument);
}

TEST_CASE("train config files round-trip") {
  TempDir tmp;
  const auto path = (tmp.path / "config.json").string();
  TrainConfig cfg;
  cfg.l2 = 3e-4;
  cfg.laplacian = 1e-3;
  cfg.max_epochs = 123;
  cfg.strata = 4;
  cfg.seed = 99;
  save_train_config(cfg, path);
  const TrainConfig loaded = load_train_config(path);
  CHECK(loaded.l2 == cfg.l2);
  CHECK(loaded.laplacian == cfg.laplacian);
  CHECK(loaded.max_epochs == cfg.max_epochs);
  CHECK(loaded.strata == cfg.strata);
  CHECK(loaded.seed == cfg.seed);
}

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-5) == "1e-05");
  CHECK(format_double(3.0) == "3");
  const double tricky = 0.1 + 0.2;
  CHECK(std::stod(format_double(tricky)) == tricky);
}

TEST_SUITE_END();
