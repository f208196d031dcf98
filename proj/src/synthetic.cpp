#include "prefmod/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "prefmod/metrics.hpp"

namespace prefmod {

LengthDist LengthDist::fixed_len(int k) {
  LengthDist d;
  d.kind = Kind::Fixed;
  d.fixed = k;
  return d;
}

LengthDist LengthDist::uniform(int lo, int hi) {
  LengthDist d;
  d.kind = Kind::UniformInt;
  d.lo = lo;
  d.hi = hi;
  return d;
}

LengthDist LengthDist::truncated_geometric(double mean) {
  LengthDist d;
  d.kind = Kind::TruncatedGeometric;
  d.mean = mean;
  return d;
}

void LengthDist::validate(int num_alternatives) const {
  switch (kind) {
    case Kind::Fixed:
      if (fixed < 1 || fixed > num_alternatives) {
        throw std::invalid_argument("length_dist: fixed length outside [1, m]");
      }
      break;
    case Kind::UniformInt:
      if (lo < 1 || hi < lo || hi > num_alternatives) {
        throw std::invalid_argument("length_dist: uniform support outside [1, m]");
      }
      break;
    case Kind::TruncatedGeometric:
      if (!(mean >= 1.0)) throw std::invalid_argument("length_dist: mean must be >= 1");
      break;
  }
}

int LengthDist::sample(Rng& rng, int num_alternatives) const {
  switch (kind) {
    case Kind::Fixed: return fixed;
    case Kind::UniformInt: return rng.uniform_int(lo, hi);
    case Kind::TruncatedGeometric: {
      // Geometric on {1, 2, ...} with the requested mean, clamped at m.
      const double p = 1.0 / mean;
      int k = 1;
      while (k < num_alternatives && rng.uniform01() >= p) ++k;
      return k;
    }
  }
  return 1;
}

void DistrictSpec::validate() const {
  if (num_agents < 1) throw std::invalid_argument("district: need at least one agent");
  if (num_schools < 1 || num_ptypes < 1) {
    throw std::invalid_argument("district: need schools and program types");
  }
  if (num_alternatives < num_schools || num_alternatives < num_ptypes) {
    throw std::invalid_argument("district: m must cover every school and program type");
  }
  if (num_home_clusters < 1) throw std::invalid_argument("district: need >= 1 home cluster");
  if (cluster_spread < 0.0) throw std::invalid_argument("district: negative cluster spread");
  for (double f : {ctip1_fraction, sibling_fraction, prek_fraction, home_language_fraction,
                   attendance_area_fraction}) {
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("district: fractions must be in [0,1]");
  }
  length_dist.validate(num_alternatives);
}

const std::vector<std::string>& feature_schema() {
  static const std::vector<std::string> names = {
      "distance",
      "sqrt_distance",
      "sqrt_distance_x_ctip1",
      "within_half_mile",
      "bus_route",
      "sibling_match",
      "language_match",
      "attendance_area",
      "prek_continuation",
      "avg_color_x_ctip1",
      "avg_color_x_nonctip1",
      "frac_reduced_lunch_x_ctip1",
      "frac_reduced_lunch_x_nonctip1",
      "before_after_programs_x_ctip1",
      "before_after_programs_x_nonctip1",
  };
  return names;
}

District generate_district(const DistrictSpec& spec) {
  spec.validate();
  const int m = spec.num_alternatives;
  const int n = spec.num_agents;
  const int ns = spec.num_schools;
  const int np = spec.num_ptypes;

  // Catalog: the first ns (np) alternatives pin down every school (program
  // type); the rest are assigned randomly.
  Rng rng(mix_seed(spec.seed, 0xD15Cu));
  std::vector<int> school_of(static_cast<std::size_t>(m));
  std::vector<int> ptype_of(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    school_of[static_cast<std::size_t>(j)] = j < ns ? j : rng.uniform_int(0, ns - 1);
    ptype_of[static_cast<std::size_t>(j)] = j < np ? j : rng.uniform_int(0, np - 1);
  }
  std::vector<int> nest_of(static_cast<std::size_t>(m), 0);
  if (spec.nest_scheme == DistrictSpec::NestScheme::ByProgramType) nest_of = ptype_of;

  std::vector<std::string> alt_labels, school_labels, ptype_labels, nest_labels;
  for (int s = 0; s < ns; ++s) school_labels.push_back("school_" + std::to_string(s));
  for (int p = 0; p < np; ++p) ptype_labels.push_back("ptype_" + std::to_string(p));
  for (int j = 0; j < m; ++j) {
    alt_labels.push_back(school_labels[static_cast<std::size_t>(school_of[static_cast<std::size_t>(j)])] +
                         "/" + ptype_labels[static_cast<std::size_t>(ptype_of[static_cast<std::size_t>(j)])] +
                         "#" + std::to_string(j));
  }
  if (spec.nest_scheme == DistrictSpec::NestScheme::ByProgramType) {
    nest_labels = ptype_labels;
  } else {
    nest_labels = {"all"};
  }
  ProgramCatalog catalog(school_of, ptype_of, nest_of, alt_labels, school_labels, ptype_labels,
                         nest_labels);

  // Geography on the unit square.
  std::vector<std::pair<double, double>> school_pos(static_cast<std::size_t>(ns));
  for (auto& pos : school_pos) pos = {rng.uniform01(), rng.uniform01()};
  std::vector<std::pair<double, double>> cluster_pos(
      static_cast<std::size_t>(spec.num_home_clusters));
  for (auto& pos : cluster_pos) pos = {rng.uniform01(), rng.uniform01()};

  // School-level attributes.
  std::vector<double> avg_color(static_cast<std::size_t>(ns));
  std::vector<double> frac_lunch(static_cast<std::size_t>(ns));
  std::vector<double> before_after(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s) {
    avg_color[static_cast<std::size_t>(s)] = 1.0 + 4.0 * rng.uniform01();
    frac_lunch[static_cast<std::size_t>(s)] = rng.uniform01();
    before_after[static_cast<std::size_t>(s)] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  // Bus routes between home clusters and schools.
  std::vector<char> bus(static_cast<std::size_t>(spec.num_home_clusters * ns));
  for (auto& b : bus) b = rng.bernoulli(0.5) ? 1 : 0;
  // Which program types are language programs (used by language_match).
  std::vector<char> is_language_ptype(static_cast<std::size_t>(np), 0);
  for (int p = 1; p < np; ++p) is_language_ptype[static_cast<std::size_t>(p)] = rng.bernoulli(0.5) ? 1 : 0;

  District out;
  out.catalog = catalog;
  std::vector<std::string> priority(static_cast<std::size_t>(n));
  std::vector<std::string> ethnicity(static_cast<std::size_t>(n));
  const char* ethnicity_values[] = {"group_a", "group_b", "group_c", "group_d"};
  const double ethnicity_weights[] = {0.4, 0.3, 0.2, 0.1};

  const int d = static_cast<int>(feature_schema().size());
  std::vector<double> x(static_cast<std::size_t>(n) * m * d, 0.0);

  for (int i = 0; i < n; ++i) {
    // Per-agent stream so generation order never matters.
    Rng arng(mix_seed(spec.seed, 0xA000u + static_cast<std::uint64_t>(i)));
    const int cluster = arng.uniform_int(0, spec.num_home_clusters - 1);
    const auto& cl = cluster_pos[static_cast<std::size_t>(cluster)];
    const double hx = std::clamp(cl.first + spec.cluster_spread * arng.normal01(), 0.0, 1.0);
    const double hy = std::clamp(cl.second + spec.cluster_spread * arng.normal01(), 0.0, 1.0);

    const bool ctip1 = arng.bernoulli(spec.ctip1_fraction);
    const bool has_sibling = arng.bernoulli(spec.sibling_fraction);
    const int sibling_school = has_sibling ? arng.uniform_int(0, ns - 1) : -1;
    const bool has_prek = arng.bernoulli(spec.prek_fraction);
    const int prek_school = has_prek ? arng.uniform_int(0, ns - 1) : -1;
    const bool home_language = arng.bernoulli(spec.home_language_fraction);
    const bool has_aa = arng.bernoulli(spec.attendance_area_fraction);
    ethnicity[static_cast<std::size_t>(i)] =
        ethnicity_values[arng.categorical(std::span<const double>(ethnicity_weights, 4))];

    // Attendance-area school: the nearest one, when the agent has one at all.
    int aa_school = -1;
    if (has_aa) {
      double best = std::numeric_limits<double>::infinity();
      for (int s = 0; s < ns; ++s) {
        const double dx = hx - school_pos[static_cast<std::size_t>(s)].first;
        const double dy = hy - school_pos[static_cast<std::size_t>(s)].second;
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (dist < best) {
          best = dist;
          aa_school = s;
        }
      }
    }

    if (has_sibling) {
      priority[static_cast<std::size_t>(i)] = "sibling";
    } else if (has_prek) {
      priority[static_cast<std::size_t>(i)] = "prek_tk";
    } else if (ctip1) {
      priority[static_cast<std::size_t>(i)] = "ctip1";
    } else if (has_aa) {
      priority[static_cast<std::size_t>(i)] = "attendance_area";
    } else {
      priority[static_cast<std::size_t>(i)] = "none";
    }

    for (int j = 0; j < m; ++j) {
      const int s = school_of[static_cast<std::size_t>(j)];
      const int p = ptype_of[static_cast<std::size_t>(j)];
      const double dx = hx - school_pos[static_cast<std::size_t>(s)].first;
      const double dy = hy - school_pos[static_cast<std::size_t>(s)].second;
      // Unit square read as a 5-mile-a-side city.
      const double dist = 5.0 * std::sqrt(dx * dx + dy * dy);
      double* row = x.data() + (static_cast<std::size_t>(i) * m + j) * d;
      row[0] = dist;
      row[1] = std::sqrt(dist);
      row[2] = ctip1 ? std::sqrt(dist) : 0.0;
      row[3] = dist < 0.5 ? 1.0 : 0.0;
      row[4] = bus[static_cast<std::size_t>(cluster * ns + s)] ? 1.0 : 0.0;
      row[5] = s == sibling_school ? 1.0 : 0.0;
      row[6] = (home_language && is_language_ptype[static_cast<std::size_t>(p)]) ? 1.0 : 0.0;
      row[7] = s == aa_school ? 1.0 : 0.0;
      row[8] = s == prek_school ? 1.0 : 0.0;
      row[9] = ctip1 ? avg_color[static_cast<std::size_t>(s)] : 0.0;
      row[10] = ctip1 ? 0.0 : avg_color[static_cast<std::size_t>(s)];
      row[11] = ctip1 ? frac_lunch[static_cast<std::size_t>(s)] : 0.0;
      row[12] = ctip1 ? 0.0 : frac_lunch[static_cast<std::size_t>(s)];
      row[13] = ctip1 ? before_after[static_cast<std::size_t>(s)] : 0.0;
      row[14] = ctip1 ? 0.0 : before_after[static_cast<std::size_t>(s)];
    }
    out.agent_ids.push_back("agent_" + std::to_string(i));
  }

  out.covariates = CovariateTensor(n, m, feature_schema(), std::move(x));
  out.labels.emplace("priority", std::move(priority));
  out.labels.emplace("ethnicity", std::move(ethnicity));
  return out;
}

RankingDataset sample_dataset(const District& district, const AnyParams& ground_truth,
                              const LengthDist& length_dist, std::uint64_t seed) {
  const int m = district.catalog.num_alternatives();
  length_dist.validate(m);
  check_compatible(ground_truth, district.catalog, district.covariates.num_features());
  const ContextPolicy policy = policy_of(ground_truth);

  RankingDataset out;
  out.catalog = district.catalog;
  out.covariates = district.covariates;
  out.agent_ids = district.agent_ids;
  out.group_labels = district.labels;

  const int n = district.covariates.num_agents();
  std::vector<std::string> first_ptype(static_cast<std::size_t>(n));
  out.rankings.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const int k = length_dist.sample(rng, m);
    std::vector<int> full = sample_ranking_any(ground_truth, district.covariates, i, policy, rng);
    full.resize(static_cast<std::size_t>(k));
    first_ptype[static_cast<std::size_t>(i)] =
        district.catalog.ptype_label(district.catalog.ptype_of(full.front()));
    out.rankings.push_back(std::move(full));
  }
  out.group_labels["first_program_type"] = std::move(first_ptype);
  out.validate();
  return out;
}

ModelParams make_block_affinity_cdm(const ProgramCatalog& catalog, int num_features,
                                    double self_affinity, double cross_affinity,
                                    ContextPolicy policy) {
  const int m = catalog.num_alternatives();
  const int np = catalog.num_ptypes();
  ModelParams p = ModelParams::cdm_low_rank(catalog, num_features, np, policy);
  // target row j = one-hot(p(j)) scaled by the affinity row, context row k =
  // one-hot(p(k)); their product is the block matrix.
  for (int j = 0; j < m; ++j) {
    const int pj = catalog.ptype_of(j);
    for (int q = 0; q < np; ++q) {
      p.target_emb(j, q) = q == pj ? self_affinity : cross_affinity;
    }
    p.context_emb(j, pj) = 1.0;
  }
  return p;
}

}  // namespace prefmod
