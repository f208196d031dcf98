#ifndef PREFMOD_EQUIVALENCE_HPP
#define PREFMOD_EQUIVALENCE_HPP

#include <cstdint>

#include "prefmod/params.hpp"

namespace prefmod {

// Parameter bijections between the forward- and backward-dependent CDM
// families. Both maps flip the policy, negate the interaction structure, and
// fold the full-universe interaction row sums into per-alternative offsets.
// Each map is its own inverse.
//
// The choice distributions of the input and the mapped parameters coincide
// under the raw-sum context aggregation; the maps require it and reject
// mean-aggregated parameters.

// {delta_i + sum_{j != i} u_ij, beta, -U}, policy flipped. CdmFull only.
ModelParams map_full(const ModelParams& params);

// {delta_i + t_i . sum_{j != i} c_j, beta, T, -C}, policy flipped. CdmLowRank only.
ModelParams map_lowrank(const ModelParams& params);

struct EquivalenceReport {
  double max_probability_deviation = 0.0;  // forward vs mapped-backward, per step
  double max_involution_deviation = 0.0;   // f(f(theta)) vs theta, per coordinate
  long configurations_checked = 0;
};

// Draws random parameterizations at a given universe size and verifies both
// properties by enumerating every full ranking. `rank` <= 0 exercises the
// unfactorized map, otherwise the low-rank one.
EquivalenceReport check_equivalence(int num_alternatives, int rank, int samples,
                                    std::uint64_t seed);

}  // namespace prefmod

#endif  // PREFMOD_EQUIVALENCE_HPP
