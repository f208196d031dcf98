// prefmod: ranked-preference model toolkit.
//
// Verbs: generate, explode, fit, tune, evaluate, equiv-check, compare.
// All randomness flows from --seed; repeated runs with identical inputs and
// seeds produce byte-identical outputs.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "prefmod/data.hpp"
#include "prefmod/equivalence.hpp"
#include "prefmod/estimation.hpp"
#include "prefmod/io.hpp"
#include "prefmod/metrics.hpp"
#include "prefmod/synthetic.hpp"

namespace fs = std::filesystem;
using namespace prefmod;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

RankingDataset load_any_dataset(const std::string& path) {
  if (fs::is_directory(path)) return load_rankings(path, DataFormat::DelimitedTable);
  return load_rankings(path, DataFormat::StructuredRecord);
}

void write_text(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

std::string join_labels(const ProgramCatalog& catalog, std::span<const int> alts) {
  std::string out;
  for (std::size_t i = 0; i < alts.size(); ++i) {
    if (i > 0) out.push_back(';');
    out += catalog.alt_label(alts[i]);
  }
  return out;
}

struct MetricRow {
  std::string metric;
  int k = 0;
  std::string group = "all";
  double value = 0.0;
  long count = 0;
};

std::string metric_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "metric,k,group,value,count\n";
  for (const auto& r : rows) {
    os << r.metric << ',' << r.k << ',' << r.group << ',' << format_double(r.value) << ','
       << r.count << '\n';
  }
  return os.str();
}

// Shared fit/tune knobs; flags the user sets override the config file.
struct FitFlags {
  std::string config_path;
  double l2 = 1e-5;
  double laplacian = 0.0;
  double step = 1e-3;
  double tolerance = 1e-4;
  int epochs = 1000;
  int batch = 0;
  int rank = 10;
  int strata = 1;
  std::uint64_t seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON training config file");
    cmd->add_option("--l2", l2, "l2 regularization gain");
    cmd->add_option("--laplacian", laplacian, "path-graph regularization gain");
    cmd->add_option("--step", step, "optimizer step size");
    cmd->add_option("--tolerance", tolerance, "absolute objective convergence tolerance");
    cmd->add_option("--epochs", epochs, "maximum training epochs");
    cmd->add_option("--batch", batch, "mini-batch size (0 = full batch)");
    cmd->add_option("--rank", rank, "embedding rank for the low-rank model");
    cmd->add_option("--strata", strata,
                    "number of rank strata (1 = no stratification; tuned district value 10)");
    cmd->add_option("--seed", seed, "random seed");
  }

  TrainConfig build(const CLI::App* cmd) const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);
    if (config_path.empty() || cmd->count("--l2")) cfg.l2 = l2;
    if (config_path.empty() || cmd->count("--laplacian")) cfg.laplacian = laplacian;
    if (config_path.empty() || cmd->count("--step")) cfg.step_size = step;
    if (config_path.empty() || cmd->count("--tolerance")) cfg.tolerance = tolerance;
    if (config_path.empty() || cmd->count("--epochs")) cfg.max_epochs = epochs;
    if (config_path.empty() || cmd->count("--batch")) cfg.batch_size = batch;
    if (config_path.empty() || cmd->count("--rank")) cfg.embedding_rank = rank;
    if (config_path.empty() || cmd->count("--strata")) cfg.strata = strata;
    if (config_path.empty() || cmd->count("--seed")) cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

int run_generate(const std::string& spec_path, int agents, int alternatives, int schools,
                 int ptypes, std::uint64_t seed, const std::string& out_dir,
                 const CLI::App* cmd) {
  GenerationSpec spec;
  if (!spec_path.empty()) spec = load_generation_spec(spec_path);
  if (spec_path.empty() || cmd->count("--agents")) spec.district.num_agents = agents;
  if (spec_path.empty() || cmd->count("--alternatives")) {
    spec.district.num_alternatives = alternatives;
  }
  if (spec_path.empty() || cmd->count("--schools")) spec.district.num_schools = schools;
  if (spec_path.empty() || cmd->count("--ptypes")) spec.district.num_ptypes = ptypes;
  spec.district.seed = seed;

  const District district = generate_district(spec.district);
  const ModelParams truth = build_ground_truth(
      spec.ground_truth, district.catalog, district.covariates.num_features(), seed);
  const RankingDataset dataset =
      sample_dataset(district, truth, spec.district.length_dist, mix_seed(seed, 0xDA7Au));

  fs::create_directories(out_dir);
  save_rankings(dataset, out_dir, DataFormat::DelimitedTable);
  save_rankings(dataset, (fs::path(out_dir) / "district.json").string(),
                DataFormat::StructuredRecord);
  save_params(truth, (fs::path(out_dir) / "ground_truth.json").string());
  const std::string summary = to_string(summarize(dataset));
  write_text((fs::path(out_dir) / "summary.txt").string(), summary);
  std::cout << summary;
  return kExitOk;
}

int run_explode(const std::string& data_path, const std::string& policy_text,
                const std::string& out_file) {
  const RankingDataset dataset = load_any_dataset(data_path);
  const ContextPolicy policy = ContextPolicy::parse(policy_text);
  const ChoiceDataset choices = explode_rankings(dataset, policy);
  std::ostringstream os;
  os << "agent,rank,chosen,context,choice_set\n";
  for (const auto& rec : choices.records) {
    os << dataset.agent_ids[static_cast<std::size_t>(rec.agent)] << ',' << rec.rank_pos << ','
       << dataset.catalog.alt_label(rec.chosen) << ','
       << join_labels(dataset.catalog, rec.context) << ','
       << join_labels(dataset.catalog, rec.choice_set) << '\n';
  }
  write_text(out_file, os.str());
  std::cout << "wrote " << choices.size() << " choice records to " << out_file << "\n";
  return kExitOk;
}

int run_fit(const std::string& data_path, const std::string& model, const std::string& policy,
            const std::string& agg, const std::string& warm_path, const FitFlags& flags,
            const std::string& out_dir, const CLI::App* cmd) {
  const RankingDataset dataset = load_any_dataset(data_path);
  TrainConfig cfg = flags.build(cmd);
  ModelSpec spec;
  spec.kind = parse_model_kind(model);
  spec.policy = ContextPolicy::parse(policy);
  spec.context_agg = parse_context_aggregation(agg);
  if (cfg.strata > 1 && !cmd->count("--laplacian") && flags.config_path.empty()) {
    // Tuned stratified gains: 1e-3 for the contextual and nested families,
    // 1e-4 for the fixed-effect and linear ones.
    cfg.laplacian =
        (spec.kind == ModelKind::CdmLowRank || spec.kind == ModelKind::CdmFull ||
         spec.kind == ModelKind::Nested)
            ? 1e-3
            : 1e-4;
  }

  FitResult result;
  if (!warm_path.empty()) {
    const AnyParams warm = load_params(warm_path);
    result = fit(spec, dataset, cfg, &warm);
  } else {
    result = fit(spec, dataset, cfg);
  }

  fs::create_directories(out_dir);
  save_params(result.params, (fs::path(out_dir) / "params.json").string());
  std::ostringstream trace;
  trace << "epoch,objective\n";
  for (std::size_t e = 0; e < result.trace.size(); ++e) {
    trace << e + 1 << ',' << format_double(result.trace[e]) << '\n';
  }
  write_text((fs::path(out_dir) / "trace.csv").string(), trace.str());

  const ChoiceDataset choices = explode_rankings(dataset, spec.policy);
  std::cout << "model " << model << ": objective " << format_double(result.final_objective())
            << ", train nll " << format_double(nll(result.params, choices)) << ", epochs "
            << result.epochs << (result.converged ? " (converged)" : " (epoch limit)") << "\n";
  return kExitOk;
}

int run_tune(const std::string& data_path, const std::string& model, const std::string& policy,
             const std::string& agg, const std::string& grid_path, int folds,
             const FitFlags& flags, const std::string& out_dir, const CLI::App* cmd) {
  const RankingDataset dataset = load_any_dataset(data_path);
  const TrainConfig base = flags.build(cmd);
  ModelSpec spec;
  spec.kind = parse_model_kind(model);
  spec.policy = ContextPolicy::parse(policy);
  spec.context_agg = parse_context_aggregation(agg);
  const HyperGrid grid = load_hyper_grid(grid_path);

  const CrossValResult cv = cross_validate(spec, dataset, grid, folds, base);

  fs::create_directories(out_dir);
  std::ostringstream cells;
  cells << "l2,rank,strata,laplacian,fold,validation_nll\n";
  for (const auto& cell : cv.cells) {
    for (std::size_t f = 0; f < cell.fold_nll.size(); ++f) {
      cells << format_double(cell.cell.l2) << ',' << cell.cell.embedding_rank << ','
            << cell.cell.strata << ',' << format_double(cell.cell.laplacian) << ',' << f << ','
            << format_double(cell.fold_nll[f]) << '\n';
    }
    cells << format_double(cell.cell.l2) << ',' << cell.cell.embedding_rank << ','
          << cell.cell.strata << ',' << format_double(cell.cell.laplacian) << ",mean,"
          << format_double(cell.mean_validation_nll) << '\n';
  }
  write_text((fs::path(out_dir) / "cv_cells.csv").string(), cells.str());

  // Strata x laplacian heat-map table and one curve per scalar hyperparameter,
  // averaging over the other grid dimensions.
  const auto mean_over = [&](auto key) {
    std::map<decltype(key(cv.cells.front())), std::pair<double, long>> acc;
    for (const auto& cell : cv.cells) {
      auto& slot = acc[key(cell)];
      slot.first += cell.mean_validation_nll;
      slot.second += 1;
    }
    return acc;
  };
  {
    const auto acc = mean_over([](const GridCellResult& c) {
      return std::make_pair(c.cell.strata, c.cell.laplacian);
    });
    std::ostringstream os;
    os << "strata,laplacian,mean_validation_nll\n";
    for (const auto& [key, sums] : acc) {
      os << key.first << ',' << format_double(key.second) << ','
         << format_double(sums.first / static_cast<double>(sums.second)) << '\n';
    }
    write_text((fs::path(out_dir) / "cv_heatmap_strata_laplacian.csv").string(), os.str());
  }
  {
    const auto acc = mean_over([](const GridCellResult& c) { return c.cell.l2; });
    std::ostringstream os;
    os << "l2,mean_validation_nll\n";
    for (const auto& [key, sums] : acc) {
      os << format_double(key) << ','
         << format_double(sums.first / static_cast<double>(sums.second)) << '\n';
    }
    write_text((fs::path(out_dir) / "cv_curve_l2.csv").string(), os.str());
  }
  {
    const auto acc = mean_over([](const GridCellResult& c) { return c.cell.embedding_rank; });
    std::ostringstream os;
    os << "rank,mean_validation_nll\n";
    for (const auto& [key, sums] : acc) {
      os << key << ',' << format_double(sums.first / static_cast<double>(sums.second)) << '\n';
    }
    write_text((fs::path(out_dir) / "cv_curve_rank.csv").string(), os.str());
  }

  const GridCell& best = cv.best().cell;
  TrainConfig best_cfg = base;
  best_cfg.l2 = best.l2;
  best_cfg.embedding_rank = best.embedding_rank;
  best_cfg.strata = best.strata;
  best_cfg.laplacian = best.laplacian;
  save_train_config(best_cfg, (fs::path(out_dir) / "best_config.json").string());

  std::cout << "best cell: l2 " << format_double(best.l2) << ", rank " << best.embedding_rank
            << ", strata " << best.strata << ", laplacian " << format_double(best.laplacian)
            << " (mean validation nll " << format_double(cv.best().mean_validation_nll)
            << ")\n";
  return kExitOk;
}

TauWeighting parse_tau_weighting(const std::string& text) {
  if (text == "hyperbolic") return TauWeighting::Hyperbolic;
  if (text == "unit") return TauWeighting::Unit;
  throw std::invalid_argument("unknown tau weighting '" + text + "' (hyperbolic|unit)");
}

std::vector<MetricRow> model_metric_rows(const AnyParams& params, const RankingDataset& dataset,
                                         int kmax, int consistency_samples,
                                         std::uint64_t seed, bool subgroup_tables) {
  const ContextPolicy policy = policy_of(params);
  const ChoiceDataset choices = explode_rankings(dataset, policy);
  std::vector<MetricRow> rows;

  const double overall = nll(params, choices);
  rows.push_back({"nll_overall", 0, "all", overall, static_cast<long>(choices.size())});
  for (const auto& row : nll_by_rank(params, choices)) {
    rows.push_back({"nll_by_rank", row.rank, "all", row.mean_nll, row.count});
  }
  for (int k = 1; k <= kmax; ++k) {
    const PerAgentMetric acc = accuracy_in_kth_prediction(params, dataset, policy, k);
    if (!acc.mean.has_value()) continue;
    rows.push_back({"accuracy_at_k", k, "all", *acc.mean, acc.count});
    if (subgroup_tables && k <= 3) {
      for (const auto& [name, labels] : dataset.group_labels) {
        for (const auto& g : disaggregate(acc, labels)) {
          rows.push_back({"accuracy_at_k", k, name + ":" + g.group, g.mean, g.count});
        }
      }
    }
  }
  if (consistency_samples >= 2) {
    for (int k = 1; k <= kmax; ++k) {
      const PerAgentMetric cons =
          consistency_at_k(params, dataset, policy, k, consistency_samples, seed);
      if (!cons.mean.has_value()) continue;
      rows.push_back({"consistency_at_k", k, "all", *cons.mean, cons.count});
    }
  }
  return rows;
}

int run_evaluate(const std::string& params_path, const std::string& data_path,
                 const std::string& out_dir, int kmax, int consistency_samples, int tau_samples,
                 TauWeighting tau_weighting, std::uint64_t seed) {
  const AnyParams params = load_params(params_path);
  const RankingDataset dataset = load_any_dataset(data_path);
  check_compatible(params, dataset.catalog, dataset.covariates.num_features());

  std::vector<MetricRow> rows =
      model_metric_rows(params, dataset, kmax, consistency_samples, seed, true);
  if (tau_samples >= 2) {
    const TauMatrix self =
        sampled_tau_matrix({params}, {"model"}, dataset, tau_samples, seed, tau_weighting);
    rows.push_back({"sampled_self_tau", 0, "all", self.values[0][0],
                    static_cast<long>(dataset.num_agents())});
  }

  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "metrics.csv").string(), metric_csv(rows));
  for (const auto& r : rows) {
    if (r.group == "all") {
      std::cout << r.metric << (r.k > 0 ? " k=" + std::to_string(r.k) : "") << ": "
                << format_double(r.value) << "\n";
    }
  }
  return kExitOk;
}

int run_compare(const std::vector<std::string>& params_paths, const std::string& data_path,
                const std::string& out_dir, int kmax, int tau_samples,
                TauWeighting tau_weighting, std::uint64_t seed) {
  const RankingDataset dataset = load_any_dataset(data_path);
  std::vector<AnyParams> models;
  std::vector<std::string> names;
  for (const auto& path : params_paths) {
    models.push_back(load_params(path));
    check_compatible(models.back(), dataset.catalog, dataset.covariates.num_features());
    // Fit outputs are all called params.json; prefer the run directory name.
    const fs::path p(path);
    std::string name = p.stem().string();
    if (name == "params" && p.has_parent_path() && p.parent_path().has_filename()) {
      name = p.parent_path().filename().string();
    }
    while (std::find(names.begin(), names.end(), name) != names.end()) name += "_";
    names.push_back(name);
  }

  std::ostringstream os;
  os << "model,metric,k,group,value,count\n";
  const auto emit = [&](const std::string& model, const MetricRow& r) {
    os << model << ',' << r.metric << ',' << r.k << ',' << r.group << ','
       << format_double(r.value) << ',' << r.count << '\n';
  };

  // Uniform-choice baseline: nll is the mean log choice-set size.
  {
    const ChoiceDataset choices = explode_rankings(dataset, ContextPolicy::backward());
    std::map<int, std::pair<double, long>> by_rank;
    double total = 0.0;
    for (const auto& rec : choices.records) {
      const double v = std::log(static_cast<double>(rec.choice_set.size()));
      total += v;
      auto& slot = by_rank[rec.rank_pos];
      slot.first += v;
      slot.second += 1;
    }
    emit("null", {"nll_overall", 0, "all", total / static_cast<double>(choices.size()),
                  static_cast<long>(choices.size())});
    for (const auto& [rank, sums] : by_rank) {
      emit("null",
           {"nll_by_rank", rank, "all", sums.first / static_cast<double>(sums.second),
            sums.second});
    }
  }
  std::map<std::string, double> overall_nll;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto rows = model_metric_rows(models[mi], dataset, kmax, 0, seed, false);
    for (const auto& r : rows) emit(names[mi], r);
    for (const auto& r : rows) {
      if (r.metric == "nll_overall") overall_nll[names[mi]] = r.value;
    }
  }
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "compare.csv").string(), os.str());

  if (tau_samples >= 2) {
    const TauMatrix taus =
        sampled_tau_matrix(models, names, dataset, tau_samples, seed, tau_weighting);
    std::ostringstream tau_os;
    tau_os << "model_a,model_b,mean_weighted_tau\n";
    for (std::size_t a = 0; a < names.size(); ++a) {
      for (std::size_t b = 0; b < names.size(); ++b) {
        tau_os << names[a] << ',' << names[b] << ',' << format_double(taus.values[a][b]) << '\n';
      }
    }
    write_text((fs::path(out_dir) / "tau_matrix.csv").string(), tau_os.str());
  }

  for (const auto& [name, value] : overall_nll) {
    std::cout << name << ": test nll " << format_double(value) << "\n";
  }
  return kExitOk;
}

int run_equiv_check(const std::vector<int>& sizes, int rank, int samples, std::uint64_t seed,
                    const std::string& out_file) {
  std::ostringstream report;
  double worst_prob = 0.0, worst_inv = 0.0;
  for (int m : sizes) {
    const EquivalenceReport full = check_equivalence(m, 0, samples, seed);
    const EquivalenceReport low = check_equivalence(m, rank, samples, seed);
    report << "m=" << m << " full-cdm: max prob dev " << format_double(full.max_probability_deviation)
           << ", max involution dev " << format_double(full.max_involution_deviation) << "\n"
           << "m=" << m << " low-rank(r=" << rank << "): max prob dev "
           << format_double(low.max_probability_deviation) << ", max involution dev "
           << format_double(low.max_involution_deviation) << "\n";
    worst_prob = std::max({worst_prob, full.max_probability_deviation,
                           low.max_probability_deviation});
    worst_inv = std::max({worst_inv, full.max_involution_deviation,
                          low.max_involution_deviation});
  }
  report << "worst-case: prob dev " << format_double(worst_prob) << ", involution dev "
         << format_double(worst_inv) << "\n";
  std::cout << report.str();
  if (!out_file.empty()) write_text(out_file, report.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ranked-preference choice model toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "generate a synthetic district and dataset");
  std::string gen_spec, gen_out;
  int gen_agents = 400, gen_alternatives = 12, gen_schools = 6, gen_ptypes = 3;
  std::uint64_t gen_seed = 1;
  gen->add_option("--spec", gen_spec, "generation spec JSON");
  gen->add_option("--agents", gen_agents, "number of agents");
  gen->add_option("--alternatives", gen_alternatives, "number of alternatives");
  gen->add_option("--schools", gen_schools, "number of schools");
  gen->add_option("--ptypes", gen_ptypes, "number of program types");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // explode
  auto* expl = app.add_subcommand("explode", "unravel rankings into choice records");
  std::string expl_data, expl_policy = "backward", expl_out;
  expl->add_option("--data", expl_data, "dataset directory or bundle")->required();
  expl->add_option("--policy", expl_policy, "context policy (backward|forward|topk:K)");
  expl->add_option("--out", expl_out, "output CSV file")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "train a model");
  std::string fit_data, fit_model = "linear", fit_policy = "backward", fit_agg = "mean";
  std::string fit_warm, fit_out;
  FitFlags fit_flags;
  fit_cmd->add_option("--data", fit_data, "dataset directory or bundle")->required();
  fit_cmd->add_option("--model", fit_model, "fixed|linear|cdm|cdm-full|nested");
  fit_cmd->add_option("--policy", fit_policy, "context policy (backward|forward|topk:K)");
  fit_cmd->add_option("--agg", fit_agg, "context aggregation (mean|sum)");
  fit_cmd->add_option("--warm-start", fit_warm, "parameter file to start from");
  fit_flags.attach(fit_cmd);
  fit_cmd->add_option("--out", fit_out, "output directory")->required();

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "cross-validated hyperparameter search");
  std::string tune_data, tune_model = "linear", tune_policy = "backward", tune_agg = "mean";
  std::string tune_grid, tune_out;
  int tune_folds = 5;
  FitFlags tune_flags;
  tune_cmd->add_option("--data", tune_data, "dataset directory or bundle")->required();
  tune_cmd->add_option("--model", tune_model, "fixed|linear|cdm|cdm-full|nested");
  tune_cmd->add_option("--policy", tune_policy, "context policy");
  tune_cmd->add_option("--agg", tune_agg, "context aggregation (mean|sum)");
  tune_cmd->add_option("--grid", tune_grid, "hyperparameter grid JSON")->required();
  tune_cmd->add_option("--folds", tune_folds, "number of folds");
  tune_flags.attach(tune_cmd);
  tune_cmd->add_option("--out", tune_out, "output directory")->required();

  // evaluate (alias: plot-data, the metric files feed plotting pipelines)
  auto* eval_cmd = app.add_subcommand("evaluate", "out-of-sample metric suite");
  eval_cmd->alias("plot-data");
  std::string eval_params, eval_data, eval_out, eval_tau_w = "hyperbolic";
  int eval_kmax = 5, eval_cons = 100, eval_tau = 0;
  std::uint64_t eval_seed = 1;
  eval_cmd->add_option("--params", eval_params, "parameter file")->required();
  eval_cmd->add_option("--data", eval_data, "test dataset")->required();
  eval_cmd->add_option("--kmax", eval_kmax, "evaluate positions 1..kmax");
  eval_cmd->add_option("--consistency-samples", eval_cons,
                       "samples per agent for consistency (0 = skip)");
  eval_cmd->add_option("--tau-samples", eval_tau,
                       "sampled rankings per agent for self-correlation (0 = skip)");
  eval_cmd->add_option("--tau-weighting", eval_tau_w, "tau weighting (hyperbolic|unit)");
  eval_cmd->add_option("--seed", eval_seed, "random seed");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "joint metric table over several models");
  std::vector<std::string> cmp_params;
  std::string cmp_data, cmp_out, cmp_tau_w = "hyperbolic";
  int cmp_kmax = 5, cmp_tau = 0;
  std::uint64_t cmp_seed = 1;
  cmp_cmd->add_option("--params", cmp_params, "parameter files")->required()->expected(-1);
  cmp_cmd->add_option("--data", cmp_data, "test dataset")->required();
  cmp_cmd->add_option("--kmax", cmp_kmax, "evaluate positions 1..kmax");
  cmp_cmd->add_option("--tau-samples", cmp_tau, "sampled rankings per agent (0 = skip)");
  cmp_cmd->add_option("--tau-weighting", cmp_tau_w, "tau weighting (hyperbolic|unit)");
  cmp_cmd->add_option("--seed", cmp_seed, "random seed");
  cmp_cmd->add_option("--out", cmp_out, "output directory")->required();

  // equiv-check
  auto* equiv_cmd = app.add_subcommand("equiv-check", "forward/backward equivalence suite");
  std::vector<int> equiv_sizes{3, 4, 5};
  int equiv_rank = 2, equiv_samples = 100;
  std::uint64_t equiv_seed = 1;
  std::string equiv_out;
  equiv_cmd->add_option("--sizes", equiv_sizes, "universe sizes to check");
  equiv_cmd->add_option("--rank", equiv_rank, "embedding rank for the low-rank map");
  equiv_cmd->add_option("--samples", equiv_samples, "random parameterizations per size");
  equiv_cmd->add_option("--seed", equiv_seed, "random seed");
  equiv_cmd->add_option("--out", equiv_out, "optional report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitParse;
  }

  try {
    if (gen->parsed()) {
      return run_generate(gen_spec, gen_agents, gen_alternatives, gen_schools, gen_ptypes,
                          gen_seed, gen_out, gen);
    }
    if (expl->parsed()) return run_explode(expl_data, expl_policy, expl_out);
    if (fit_cmd->parsed()) {
      return run_fit(fit_data, fit_model, fit_policy, fit_agg, fit_warm, fit_flags, fit_out,
                     fit_cmd);
    }
    if (tune_cmd->parsed()) {
      return run_tune(tune_data, tune_model, tune_policy, tune_agg, tune_grid, tune_folds,
                      tune_flags, tune_out, tune_cmd);
    }
    if (eval_cmd->parsed()) {
      return run_evaluate(eval_params, eval_data, eval_out, eval_kmax, eval_cons, eval_tau,
                          parse_tau_weighting(eval_tau_w), eval_seed);
    }
    if (cmp_cmd->parsed()) {
      return run_compare(cmp_params, cmp_data, cmp_out, cmp_kmax, cmp_tau,
                         parse_tau_weighting(cmp_tau_w), cmp_seed);
    }
    if (equiv_cmd->parsed()) {
      return run_equiv_check(equiv_sizes, equiv_rank, equiv_samples, equiv_seed, equiv_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
