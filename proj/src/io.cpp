#include "prefmod/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

namespace prefmod {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void fail(const std::string& where, std::size_t row, const std::string& what) {
  throw std::runtime_error(where + ", row " + std::to_string(row) + ": " + what);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw std::runtime_error("'" + path + "' is empty");
  return rows;
}

double parse_double(const std::string& text, const std::string& where, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) fail(where, row, "trailing characters in number '" + text + "'");
    return v;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    fail(where, row, "cannot parse number '" + text + "'");
  }
}

int parse_int(const std::string& text, const std::string& where, std::size_t row) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) fail(where, row, "trailing characters in integer '" + text + "'");
    return v;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    fail(where, row, "cannot parse integer '" + text + "'");
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

// Dense index assignment in first-appearance order.
struct Indexer {
  std::map<std::string, int> by_label;
  std::vector<std::string> labels;

  int get_or_add(const std::string& label) {
    auto [it, inserted] = by_label.emplace(label, static_cast<int>(labels.size()));
    if (inserted) labels.push_back(label);
    return it->second;
  }
};

}  // namespace

ProgramCatalog load_catalog_csv(const std::string& path) {
  const auto rows = read_csv(path);
  const std::vector<std::string> expected = {"alternative", "school", "program_type", "nest"};
  if (rows.front() != expected) {
    throw std::runtime_error(path + ", row 1: header must be alternative,school,program_type,nest");
  }
  Indexer schools, ptypes, nests;
  std::vector<std::string> alt_labels;
  std::vector<int> school_of, ptype_of, nest_of;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4) fail(path, r + 1, "expected 4 fields");
    alt_labels.push_back(row[0]);
    school_of.push_back(schools.get_or_add(row[1]));
    ptype_of.push_back(ptypes.get_or_add(row[2]));
    nest_of.push_back(nests.get_or_add(row[3]));
  }
  return ProgramCatalog(school_of, ptype_of, nest_of, alt_labels, schools.labels, ptypes.labels,
                        nests.labels);
}

void save_catalog_csv(const ProgramCatalog& catalog, const std::string& path) {
  std::ostringstream os;
  os << "alternative,school,program_type,nest\n";
  for (int j = 0; j < catalog.num_alternatives(); ++j) {
    os << catalog.alt_label(j) << ',' << catalog.school_label(catalog.school_of(j)) << ','
       << catalog.ptype_label(catalog.ptype_of(j)) << ','
       << catalog.nest_label(catalog.nest_of(j)) << '\n';
  }
  write_file(path, os.str());
}

namespace {

RankingDataset load_rankings_tables(const std::string& dir) {
  const fs::path base(dir);
  RankingDataset out;
  out.catalog = load_catalog_csv((base / "catalog.csv").string());
  const int m = out.catalog.num_alternatives();

  // rankings.csv: ranks per agent must be contiguous from 1; (agent, rank)
  // pairs must be unique; alternatives must exist in the catalog.
  const std::string rank_path = (base / "rankings.csv").string();
  const auto rank_rows = read_csv(rank_path);
  if (rank_rows.front() != std::vector<std::string>{"agent", "rank", "alternative"}) {
    throw std::runtime_error(rank_path + ", row 1: header must be agent,rank,alternative");
  }
  Indexer agents;
  std::vector<std::map<int, int>> by_rank;  // agent -> rank -> alternative
  for (std::size_t r = 1; r < rank_rows.size(); ++r) {
    const auto& row = rank_rows[r];
    if (row.size() != 3) fail(rank_path, r + 1, "expected 3 fields");
    const int agent = agents.get_or_add(row[0]);
    if (agent == static_cast<int>(by_rank.size())) by_rank.emplace_back();
    const int rank = parse_int(row[1], rank_path, r + 1);
    const int alt = out.catalog.alt_index(row[2]);
    if (alt < 0) fail(rank_path, r + 1, "unknown alternative label '" + row[2] + "'");
    if (rank < 1) fail(rank_path, r + 1, "rank positions start at 1");
    auto [it, inserted] = by_rank[static_cast<std::size_t>(agent)].emplace(rank, alt);
    if (!inserted) {
      fail(rank_path, r + 1,
           "duplicate entry for agent '" + row[0] + "' at rank " + row[1]);
    }
  }
  out.agent_ids = agents.labels;
  for (std::size_t i = 0; i < by_rank.size(); ++i) {
    std::vector<int> ranking;
    int expect = 1;
    for (const auto& [rank, alt] : by_rank[i]) {
      if (rank != expect) {
        throw std::runtime_error(rank_path + ": agent '" + out.agent_ids[i] +
                                 "' is missing rank " + std::to_string(expect));
      }
      ranking.push_back(alt);
      ++expect;
    }
    out.rankings.push_back(std::move(ranking));
  }
  const int n = out.num_agents();

  // covariates.csv: full n x m coverage, d taken from the header.
  const std::string cov_path = (base / "covariates.csv").string();
  const auto cov_rows = read_csv(cov_path);
  const auto& header = cov_rows.front();
  if (header.size() < 2 || header[0] != "agent" || header[1] != "alternative") {
    throw std::runtime_error(cov_path + ", row 1: header must start with agent,alternative");
  }
  const std::vector<std::string> features(header.begin() + 2, header.end());
  const int d = static_cast<int>(features.size());
  if (d > 0) {
    std::vector<double> values(static_cast<std::size_t>(n) * m * d, 0.0);
    std::vector<char> seen(static_cast<std::size_t>(n) * m, 0);
    for (std::size_t r = 1; r < cov_rows.size(); ++r) {
      const auto& row = cov_rows[r];
      if (static_cast<int>(row.size()) != 2 + d) {
        fail(cov_path, r + 1, "expected " + std::to_string(2 + d) + " fields");
      }
      const auto agent_it = agents.by_label.find(row[0]);
      if (agent_it == agents.by_label.end()) {
        fail(cov_path, r + 1, "unknown agent identifier '" + row[0] + "'");
      }
      const int alt = out.catalog.alt_index(row[1]);
      if (alt < 0) fail(cov_path, r + 1, "unknown alternative label '" + row[1] + "'");
      const std::size_t cell =
          static_cast<std::size_t>(agent_it->second) * m + static_cast<std::size_t>(alt);
      if (seen[cell]) fail(cov_path, r + 1, "duplicate (agent, alternative) row");
      seen[cell] = 1;
      for (int f = 0; f < d; ++f) {
        values[cell * d + f] = parse_double(row[static_cast<std::size_t>(2 + f)], cov_path, r + 1);
      }
    }
    for (std::size_t cell = 0; cell < seen.size(); ++cell) {
      if (!seen[cell]) {
        throw std::runtime_error(cov_path + ": missing covariate row for agent '" +
                                 out.agent_ids[cell / static_cast<std::size_t>(m)] + "'");
      }
    }
    out.covariates = CovariateTensor(n, m, features, std::move(values));
  }

  // labels.csv is optional.
  const std::string label_path = (base / "labels.csv").string();
  if (fs::exists(label_path)) {
    const auto label_rows = read_csv(label_path);
    if (label_rows.front() != std::vector<std::string>{"agent", "label_name", "label_value"}) {
      throw std::runtime_error(label_path + ", row 1: header must be agent,label_name,label_value");
    }
    for (std::size_t r = 1; r < label_rows.size(); ++r) {
      const auto& row = label_rows[r];
      if (row.size() != 3) fail(label_path, r + 1, "expected 3 fields");
      const auto agent_it = agents.by_label.find(row[0]);
      if (agent_it == agents.by_label.end()) {
        fail(label_path, r + 1, "unknown agent identifier '" + row[0] + "'");
      }
      auto [it, inserted] =
          out.group_labels.emplace(row[1], std::vector<std::string>(static_cast<std::size_t>(n)));
      it->second[static_cast<std::size_t>(agent_it->second)] = row[2];
    }
  }

  out.validate();
  return out;
}

void save_rankings_tables(const RankingDataset& dataset, const std::string& dir) {
  const fs::path base(dir);
  fs::create_directories(base);
  save_catalog_csv(dataset.catalog, (base / "catalog.csv").string());

  std::ostringstream rank_os;
  rank_os << "agent,rank,alternative\n";
  for (int i = 0; i < dataset.num_agents(); ++i) {
    const auto& ranking = dataset.rankings[static_cast<std::size_t>(i)];
    for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
      rank_os << dataset.agent_ids[static_cast<std::size_t>(i)] << ',' << pos + 1 << ','
              << dataset.catalog.alt_label(ranking[pos]) << '\n';
    }
  }
  write_file((base / "rankings.csv").string(), rank_os.str());

  std::ostringstream cov_os;
  cov_os << "agent,alternative";
  for (const auto& f : dataset.covariates.feature_names()) cov_os << ',' << f;
  cov_os << '\n';
  for (int i = 0; i < dataset.num_agents(); ++i) {
    for (int j = 0; j < dataset.catalog.num_alternatives(); ++j) {
      cov_os << dataset.agent_ids[static_cast<std::size_t>(i)] << ','
             << dataset.catalog.alt_label(j);
      const double* row = dataset.covariates.row(i, j);
      for (int f = 0; f < dataset.covariates.num_features(); ++f) {
        cov_os << ',' << format_double(row[f]);
      }
      cov_os << '\n';
    }
  }
  write_file((base / "covariates.csv").string(), cov_os.str());

  if (!dataset.group_labels.empty()) {
    std::ostringstream label_os;
    label_os << "agent,label_name,label_value\n";
    for (const auto& [name, values] : dataset.group_labels) {
      for (int i = 0; i < dataset.num_agents(); ++i) {
        if (values[static_cast<std::size_t>(i)].empty()) continue;
        label_os << dataset.agent_ids[static_cast<std::size_t>(i)] << ',' << name << ','
                 << values[static_cast<std::size_t>(i)] << '\n';
      }
    }
    write_file((base / "labels.csv").string(), label_os.str());
  }
}

json catalog_to_json(const ProgramCatalog& catalog) {
  json alts = json::array();
  for (int j = 0; j < catalog.num_alternatives(); ++j) {
    alts.push_back({{"label", catalog.alt_label(j)},
                    {"school", catalog.school_label(catalog.school_of(j))},
                    {"program_type", catalog.ptype_label(catalog.ptype_of(j))},
                    {"nest", catalog.nest_label(catalog.nest_of(j))}});
  }
  return json{{"alternatives", alts}};
}

ProgramCatalog catalog_from_json(const json& j) {
  Indexer schools, ptypes, nests;
  std::vector<std::string> alt_labels;
  std::vector<int> school_of, ptype_of, nest_of;
  for (const auto& alt : j.at("alternatives")) {
    alt_labels.push_back(alt.at("label").get<std::string>());
    school_of.push_back(schools.get_or_add(alt.at("school").get<std::string>()));
    ptype_of.push_back(ptypes.get_or_add(alt.at("program_type").get<std::string>()));
    nest_of.push_back(nests.get_or_add(alt.at("nest").get<std::string>()));
  }
  return ProgramCatalog(school_of, ptype_of, nest_of, alt_labels, schools.labels, ptypes.labels,
                        nests.labels);
}

RankingDataset load_rankings_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": parse failure: " + e.what());
  }
  RankingDataset out;
  try {
    out.catalog = catalog_from_json(j.at("catalog"));
    const int m = out.catalog.num_alternatives();
    std::map<std::string, int> seen_agents;
    std::size_t record = 0;
    for (const auto& agent : j.at("agents")) {
      const auto id = agent.get<std::string>();
      if (!seen_agents.emplace(id, 0).second) {
        throw std::runtime_error(path + ": duplicate agent identifier '" + id + "' at record " +
                                 std::to_string(record));
      }
      out.agent_ids.push_back(id);
      ++record;
    }
    record = 0;
    for (const auto& ranking : j.at("rankings")) {
      std::vector<int> r;
      for (const auto& label : ranking) {
        const int alt = out.catalog.alt_index(label.get<std::string>());
        if (alt < 0) {
          throw std::runtime_error(path + ": unknown alternative label '" +
                                   label.get<std::string>() + "' at record " +
                                   std::to_string(record));
        }
        r.push_back(alt);
      }
      out.rankings.push_back(std::move(r));
      ++record;
    }
    const int n = static_cast<int>(out.rankings.size());
    std::vector<std::string> features = j.value("features", std::vector<std::string>{});
    if (!features.empty()) {
      const int d = static_cast<int>(features.size());
      std::vector<double> values;
      values.reserve(static_cast<std::size_t>(n) * m * d);
      for (const auto& agent_block : j.at("covariates")) {
        for (const auto& alt_block : agent_block) {
          for (const auto& v : alt_block) values.push_back(v.get<double>());
        }
      }
      out.covariates = CovariateTensor(n, m, features, std::move(values));
    }
    if (j.contains("labels")) {
      for (const auto& [name, values] : j.at("labels").items()) {
        out.group_labels.emplace(name, values.get<std::vector<std::string>>());
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": schema mismatch: " + e.what());
  }
  out.validate();
  return out;
}

void save_rankings_bundle(const RankingDataset& dataset, const std::string& path) {
  json j;
  j["catalog"] = catalog_to_json(dataset.catalog);
  j["agents"] = dataset.agent_ids;
  json rankings = json::array();
  for (const auto& r : dataset.rankings) {
    json labels = json::array();
    for (int alt : r) labels.push_back(dataset.catalog.alt_label(alt));
    rankings.push_back(std::move(labels));
  }
  j["rankings"] = std::move(rankings);
  if (dataset.covariates.num_features() > 0) {
    j["features"] = dataset.covariates.feature_names();
    json cov = json::array();
    for (int i = 0; i < dataset.num_agents(); ++i) {
      json per_agent = json::array();
      for (int alt = 0; alt < dataset.catalog.num_alternatives(); ++alt) {
        const double* row = dataset.covariates.row(i, alt);
        json vals = json::array();
        for (int f = 0; f < dataset.covariates.num_features(); ++f) vals.push_back(row[f]);
        per_agent.push_back(std::move(vals));
      }
      cov.push_back(std::move(per_agent));
    }
    j["covariates"] = std::move(cov);
  }
  if (!dataset.group_labels.empty()) {
    json labels;
    for (const auto& [name, values] : dataset.group_labels) labels[name] = values;
    j["labels"] = std::move(labels);
  }
  write_file(path, j.dump(1) + "\n");
}

}  // namespace

RankingDataset load_rankings(const std::string& path, DataFormat format) {
  return format == DataFormat::DelimitedTable ? load_rankings_tables(path)
                                              : load_rankings_bundle(path);
}

void save_rankings(const RankingDataset& dataset, const std::string& path, DataFormat format) {
  dataset.validate();
  if (format == DataFormat::DelimitedTable) {
    save_rankings_tables(dataset, path);
  } else {
    save_rankings_bundle(dataset, path);
  }
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  Eigen::Index at = 0;
  for (const auto& x : j) v[at++] = x.get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index r = 0;
  for (const auto& row : j) {
    Eigen::Index c = 0;
    for (const auto& x : row) m(r, c++) = x.get<double>();
    ++r;
  }
  return m;
}

json params_to_json(const ModelParams& p) {
  json j;
  j["model"] = to_string(p.kind);
  j["catalog"] = catalog_to_json(p.catalog);
  j["fingerprint"] = {{"alternatives", p.fingerprint.num_alternatives},
                      {"schools", p.fingerprint.num_schools},
                      {"program_types", p.fingerprint.num_ptypes},
                      {"features", p.fingerprint.num_features},
                      {"rank", p.fingerprint.rank},
                      {"nest_hash", p.fingerprint.nest_hash}};
  j["delta_school"] = vector_to_json(p.delta_school);
  j["delta_ptype"] = vector_to_json(p.delta_ptype);
  j["alt_offset"] = vector_to_json(p.alt_offset);
  if (p.kind != ModelKind::FixedEffect) j["beta"] = vector_to_json(p.beta);
  if (p.kind == ModelKind::CdmLowRank) {
    j["target_embedding"] = matrix_to_json(p.target_emb);
    j["context_embedding"] = matrix_to_json(p.context_emb);
  }
  if (p.kind == ModelKind::CdmFull) j["interaction"] = matrix_to_json(p.interaction);
  if (p.kind == ModelKind::Nested) j["nest_scale"] = vector_to_json(p.nest_scale);
  if (p.is_cdm()) {
    j["policy"] = p.policy.to_string();
    j["context_aggregation"] = to_string(p.context_agg);
  }
  return j;
}

ModelParams params_from_json(const json& j) {
  const ProgramCatalog catalog = catalog_from_json(j.at("catalog"));
  const ModelKind kind = parse_model_kind(j.at("model").get<std::string>());
  const auto& fp = j.at("fingerprint");
  const int d = fp.at("features").get<int>();
  const int rank = fp.at("rank").get<int>();

  ModelParams p;
  switch (kind) {
    case ModelKind::FixedEffect: p = ModelParams::fixed_effect(catalog); break;
    case ModelKind::Linear: p = ModelParams::linear(catalog, d); break;
    case ModelKind::CdmLowRank:
      p = ModelParams::cdm_low_rank(catalog, d, rank,
                                    ContextPolicy::parse(j.at("policy").get<std::string>()),
                                    parse_context_aggregation(
                                        j.at("context_aggregation").get<std::string>()));
      break;
    case ModelKind::CdmFull:
      p = ModelParams::cdm_full(catalog, d,
                                ContextPolicy::parse(j.at("policy").get<std::string>()),
                                parse_context_aggregation(
                                    j.at("context_aggregation").get<std::string>()));
      break;
    case ModelKind::Nested: p = ModelParams::nested(catalog, d); break;
  }
  if (p.fingerprint.nest_hash != fp.at("nest_hash").get<std::uint64_t>() ||
      p.fingerprint.num_alternatives != fp.at("alternatives").get<int>() ||
      p.fingerprint.num_schools != fp.at("schools").get<int>() ||
      p.fingerprint.num_ptypes != fp.at("program_types").get<int>()) {
    throw std::runtime_error("params: stored fingerprint does not match stored catalog");
  }
  p.delta_school = vector_from_json(j.at("delta_school"));
  p.delta_ptype = vector_from_json(j.at("delta_ptype"));
  p.alt_offset = vector_from_json(j.at("alt_offset"));
  if (kind != ModelKind::FixedEffect) p.beta = vector_from_json(j.at("beta"));
  if (kind == ModelKind::CdmLowRank) {
    p.target_emb = matrix_from_json(j.at("target_embedding"));
    p.context_emb = matrix_from_json(j.at("context_embedding"));
  }
  if (kind == ModelKind::CdmFull) p.interaction = matrix_from_json(j.at("interaction"));
  if (kind == ModelKind::Nested) p.nest_scale = vector_from_json(j.at("nest_scale"));
  p.validate();
  return p;
}

}  // namespace

void save_params(const AnyParams& params, const std::string& path) {
  json j;
  j["format"] = "prefmod-params";
  if (const auto* base = std::get_if<ModelParams>(&params)) {
    j["stratified"] = false;
    j["params"] = params_to_json(*base);
  } else {
    const auto& strat = std::get<StratifiedParams>(params);
    j["stratified"] = true;
    j["strata"] = strat.num_strata();
    j["laplacian"] = strat.laplacian_gain;
    json models = json::array();
    for (const auto& s : strat.strata) models.push_back(params_to_json(s));
    j["models"] = std::move(models);
  }
  write_file(path, j.dump(1) + "\n");
}

AnyParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": parse failure: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "prefmod-params") {
      throw std::runtime_error(path + ": not a parameter file");
    }
    if (j.at("stratified").get<bool>()) {
      StratifiedParams strat;
      strat.laplacian_gain = j.at("laplacian").get<double>();
      for (const auto& model : j.at("models")) strat.strata.push_back(params_from_json(model));
      strat.validate();
      return strat;
    }
    return params_from_json(j.at("params"));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": schema mismatch: " + e.what());
  }
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": parse failure: " + e.what());
  }
  TrainConfig c;
  c.step_size = j.value("step_size", c.step_size);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.l2 = j.value("l2", c.l2);
  c.laplacian = j.value("laplacian", c.laplacian);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.embedding_rank = j.value("embedding_rank", c.embedding_rank);
  c.strata = j.value("strata", c.strata);
  c.validate();
  return c;
}

void save_train_config(const TrainConfig& c, const std::string& path) {
  json j;
  j["step_size"] = c.step_size;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["l2"] = c.l2;
  j["laplacian"] = c.laplacian;
  j["max_epochs"] = c.max_epochs;
  j["tolerance"] = c.tolerance;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["embedding_rank"] = c.embedding_rank;
  j["strata"] = c.strata;
  write_file(path, j.dump(1) + "\n");
}

HyperGrid load_hyper_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": parse failure: " + e.what());
  }
  HyperGrid g;
  g.l2 = j.value("l2", g.l2);
  g.embedding_rank = j.value("rank", g.embedding_rank);
  g.strata = j.value("strata", g.strata);
  g.laplacian = j.value("laplacian", g.laplacian);
  return g;
}

GenerationSpec load_generation_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": parse failure: " + e.what());
  }
  GenerationSpec spec;
  auto& d = spec.district;
  d.num_agents = j.value("agents", d.num_agents);
  d.num_alternatives = j.value("alternatives", d.num_alternatives);
  d.num_schools = j.value("schools", d.num_schools);
  d.num_ptypes = j.value("program_types", d.num_ptypes);
  if (j.value("nest_scheme", std::string("by_program_type")) == "single") {
    d.nest_scheme = DistrictSpec::NestScheme::Single;
  }
  d.num_home_clusters = j.value("home_clusters", d.num_home_clusters);
  d.cluster_spread = j.value("cluster_spread", d.cluster_spread);
  d.ctip1_fraction = j.value("ctip1_fraction", d.ctip1_fraction);
  d.sibling_fraction = j.value("sibling_fraction", d.sibling_fraction);
  d.prek_fraction = j.value("prek_fraction", d.prek_fraction);
  d.home_language_fraction = j.value("home_language_fraction", d.home_language_fraction);
  d.attendance_area_fraction = j.value("attendance_area_fraction", d.attendance_area_fraction);
  if (j.contains("length_dist")) {
    const auto& ld = j.at("length_dist");
    const auto kind = ld.value("kind", std::string("fixed"));
    if (kind == "fixed") {
      d.length_dist = LengthDist::fixed_len(ld.value("length", 5));
    } else if (kind == "uniform") {
      d.length_dist = LengthDist::uniform(ld.value("lo", 1), ld.value("hi", 5));
    } else if (kind == "truncated_geometric") {
      d.length_dist = LengthDist::truncated_geometric(ld.value("mean", 5.0));
    } else {
      throw std::runtime_error(path + ": unknown length_dist kind '" + kind + "'");
    }
  }
  if (j.contains("ground_truth")) {
    const auto& g = j.at("ground_truth");
    auto& t = spec.ground_truth;
    t.kind = parse_model_kind(g.value("model", std::string("linear")));
    t.policy = ContextPolicy::parse(g.value("policy", std::string("backward")));
    t.embedding_rank = g.value("rank", t.embedding_rank);
    t.delta_scale = g.value("delta_scale", t.delta_scale);
    t.beta_scale = g.value("beta_scale", t.beta_scale);
    t.block_structure = g.value("block_structure", t.block_structure);
    t.block_self_affinity = g.value("block_self_affinity", t.block_self_affinity);
    t.block_cross_affinity = g.value("block_cross_affinity", t.block_cross_affinity);
  }
  return spec;
}

ModelParams build_ground_truth(const GroundTruthSpec& spec, const ProgramCatalog& catalog,
                               int num_features, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6007u));
  ModelParams p;
  switch (spec.kind) {
    case ModelKind::FixedEffect: p = ModelParams::fixed_effect(catalog); break;
    case ModelKind::Linear: p = ModelParams::linear(catalog, num_features); break;
    case ModelKind::CdmLowRank:
      if (spec.block_structure) {
        p = make_block_affinity_cdm(catalog, num_features, spec.block_self_affinity,
                                    spec.block_cross_affinity, spec.policy);
      } else {
        p = ModelParams::cdm_low_rank(catalog, num_features, spec.embedding_rank, spec.policy);
        for (Eigen::Index i = 0; i < p.target_emb.rows(); ++i) {
          for (Eigen::Index c = 0; c < p.target_emb.cols(); ++c) {
            p.target_emb(i, c) = rng.normal01();
            p.context_emb(i, c) = rng.normal01();
          }
        }
      }
      break;
    case ModelKind::CdmFull:
      p = ModelParams::cdm_full(catalog, num_features, spec.policy);
      for (int i = 0; i < catalog.num_alternatives(); ++i) {
        for (int j = 0; j < catalog.num_alternatives(); ++j) {
          if (i != j) p.interaction(i, j) = rng.normal01();
        }
      }
      break;
    case ModelKind::Nested: {
      p = ModelParams::nested(catalog, num_features);
      for (Eigen::Index i = 0; i < p.nest_scale.size(); ++i) {
        p.nest_scale[i] = 0.3 + 0.7 * rng.uniform01();
      }
      break;
    }
  }
  for (Eigen::Index i = 0; i < p.delta_school.size(); ++i) {
    p.delta_school[i] = spec.delta_scale * rng.normal01();
  }
  for (Eigen::Index i = 0; i < p.delta_ptype.size(); ++i) {
    p.delta_ptype[i] = spec.delta_scale * rng.normal01();
  }
  for (Eigen::Index i = 0; i < p.beta.size(); ++i) {
    // Magnitudes bounded away from zero so coefficient signs are recoverable.
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    p.beta[i] = spec.beta_scale * sign * rng.uniform(0.3, 1.0);
  }
  return p;
}

}  // namespace prefmod
