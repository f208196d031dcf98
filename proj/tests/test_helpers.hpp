#ifndef PREFMOD_TEST_HELPERS_HPP
#define PREFMOD_TEST_HELPERS_HPP

#include <string>
#include <vector>

#include "prefmod/data.hpp"
#include "prefmod/params.hpp"
#include "prefmod/rng.hpp"

namespace prefmod_test {

// m alternatives over two schools and two program types, single nest.
inline prefmod::ProgramCatalog small_catalog(int m) {
  std::vector<int> school_of(static_cast<std::size_t>(m)), ptype_of(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    school_of[static_cast<std::size_t>(j)] = j % 2;
    ptype_of[static_cast<std::size_t>(j)] = (2 * j) / m;
  }
  if (m == 1) ptype_of[0] = 0;
  return prefmod::ProgramCatalog(school_of, ptype_of,
                                 std::vector<int>(static_cast<std::size_t>(m), 0));
}

// One school per alternative, one program type, one nest.
inline prefmod::ProgramCatalog identity_catalog(int m) {
  std::vector<int> school_of(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) school_of[static_cast<std::size_t>(j)] = j;
  return prefmod::ProgramCatalog(school_of, std::vector<int>(static_cast<std::size_t>(m), 0),
                                 std::vector<int>(static_cast<std::size_t>(m), 0));
}

// m alternatives split across `nests` nests (also used as program types).
inline prefmod::ProgramCatalog nested_catalog(int m, int nests) {
  std::vector<int> school_of(static_cast<std::size_t>(m)), group(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    school_of[static_cast<std::size_t>(j)] = j % 2;
    group[static_cast<std::size_t>(j)] = j % nests;
  }
  return prefmod::ProgramCatalog(school_of, group, group);
}

inline prefmod::CovariateTensor random_covariates(int n, int m, int d, std::uint64_t seed) {
  prefmod::Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(n) * m * d);
  for (double& v : values) v = rng.normal01();
  std::vector<std::string> names;
  for (int f = 0; f < d; ++f) names.push_back("f" + std::to_string(f));
  return prefmod::CovariateTensor(n, m, names, std::move(values));
}

// Random partial rankings with lengths in [1, m] (or all of length `len`
// when len > 0).
inline prefmod::RankingDataset random_dataset(int n, int m, int d, std::uint64_t seed,
                                              int len = 0) {
  prefmod::RankingDataset out;
  out.catalog = small_catalog(m);
  prefmod::Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    std::vector<int> perm(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) perm[static_cast<std::size_t>(j)] = j;
    for (std::size_t a = perm.size(); a > 1; --a) {
      std::swap(perm[a - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(a) - 1))]);
    }
    perm.resize(static_cast<std::size_t>(len > 0 ? len : rng.uniform_int(1, m)));
    out.rankings.push_back(std::move(perm));
    out.agent_ids.push_back("a" + std::to_string(i));
  }
  if (d > 0) out.covariates = random_covariates(n, m, d, seed + 17);
  return out;
}

inline void randomize_params(prefmod::ModelParams& p, std::uint64_t seed, double scale = 1.0) {
  prefmod::Rng rng(seed);
  for (Eigen::Index i = 0; i < p.delta_school.size(); ++i) {
    p.delta_school[i] = scale * rng.normal01();
  }
  for (Eigen::Index i = 0; i < p.delta_ptype.size(); ++i) {
    p.delta_ptype[i] = scale * rng.normal01();
  }
  for (Eigen::Index i = 0; i < p.beta.size(); ++i) p.beta[i] = scale * rng.normal01();
  for (Eigen::Index i = 0; i < p.target_emb.rows(); ++i) {
    for (Eigen::Index c = 0; c < p.target_emb.cols(); ++c) {
      p.target_emb(i, c) = scale * rng.normal01();
      p.context_emb(i, c) = scale * rng.normal01();
    }
  }
  for (Eigen::Index i = 0; i < p.interaction.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.interaction.cols(); ++j) {
      if (i != j) p.interaction(i, j) = scale * rng.normal01();
    }
  }
  for (Eigen::Index i = 0; i < p.nest_scale.size(); ++i) {
    p.nest_scale[i] = 0.2 + 0.75 * rng.uniform01();
  }
}

}  // namespace prefmod_test

#endif
