#include "prefmod/catalog.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace prefmod {

namespace {

// Validates that a group map is dense: every index in [0, max] appears.
int dense_group_count(const std::vector<int>& group_of, const char* what) {
  if (group_of.empty()) throw std::invalid_argument(std::string(what) + ": empty catalog");
  int max_idx = -1;
  for (int g : group_of) {
    if (g < 0) throw std::invalid_argument(std::string(what) + ": negative index");
    max_idx = std::max(max_idx, g);
  }
  std::vector<char> seen(static_cast<std::size_t>(max_idx) + 1, 0);
  for (int g : group_of) seen[static_cast<std::size_t>(g)] = 1;
  for (int g = 0; g <= max_idx; ++g) {
    if (!seen[static_cast<std::size_t>(g)]) {
      throw std::invalid_argument(std::string(what) + ": index " + std::to_string(g) +
                                  " unused; indices must be dense");
    }
  }
  return max_idx + 1;
}

std::vector<std::string> default_labels(const char* prefix, int count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(std::string(prefix) + std::to_string(i));
  return out;
}

}  // namespace

ProgramCatalog::ProgramCatalog(std::vector<int> school_of, std::vector<int> ptype_of,
                               std::vector<int> nest_of,
                               std::vector<std::string> alt_labels,
                               std::vector<std::string> school_labels,
                               std::vector<std::string> ptype_labels,
                               std::vector<std::string> nest_labels)
    : school_of_(std::move(school_of)),
      ptype_of_(std::move(ptype_of)),
      nest_of_(std::move(nest_of)),
      alt_labels_(std::move(alt_labels)),
      school_labels_(std::move(school_labels)),
      ptype_labels_(std::move(ptype_labels)),
      nest_labels_(std::move(nest_labels)) {
  const std::size_t m = school_of_.size();
  if (ptype_of_.size() != m || nest_of_.size() != m) {
    throw std::invalid_argument("catalog: school/ptype/nest maps must have equal length");
  }
  num_schools_ = dense_group_count(school_of_, "catalog schools");
  num_ptypes_ = dense_group_count(ptype_of_, "catalog program types");
  num_nests_ = dense_group_count(nest_of_, "catalog nests");

  nest_members_.assign(static_cast<std::size_t>(num_nests_), {});
  for (int j = 0; j < static_cast<int>(m); ++j) {
    nest_members_[static_cast<std::size_t>(nest_of_[j])].push_back(j);
  }

  if (alt_labels_.empty()) alt_labels_ = default_labels("alt", static_cast<int>(m));
  if (school_labels_.empty()) school_labels_ = default_labels("school", num_schools_);
  if (ptype_labels_.empty()) ptype_labels_ = default_labels("ptype", num_ptypes_);
  if (nest_labels_.empty()) nest_labels_ = default_labels("nest", num_nests_);
  if (alt_labels_.size() != m || school_labels_.size() != static_cast<std::size_t>(num_schools_) ||
      ptype_labels_.size() != static_cast<std::size_t>(num_ptypes_) ||
      nest_labels_.size() != static_cast<std::size_t>(num_nests_)) {
    throw std::invalid_argument("catalog: label table sizes do not match index ranges");
  }
  std::unordered_set<std::string> uniq(alt_labels_.begin(), alt_labels_.end());
  if (uniq.size() != alt_labels_.size()) {
    throw std::invalid_argument("catalog: duplicate alternative labels");
  }
}

int ProgramCatalog::alt_index(const std::string& label) const {
  for (std::size_t j = 0; j < alt_labels_.size(); ++j) {
    if (alt_labels_[j] == label) return static_cast<int>(j);
  }
  return -1;
}

std::uint64_t ProgramCatalog::nest_hash() const {
  // FNV-1a over the nest assignment sequence.
  std::uint64_t h = 1469598103934665603ULL;
  for (int g : nest_of_) {
    auto v = static_cast<std::uint64_t>(g);
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

CatalogFingerprint ProgramCatalog::fingerprint(int num_features, int rank) const {
  CatalogFingerprint fp;
  fp.num_alternatives = num_alternatives();
  fp.num_schools = num_schools_;
  fp.num_ptypes = num_ptypes_;
  fp.num_features = num_features;
  fp.rank = rank;
  fp.nest_hash = nest_hash();
  return fp;
}

}  // namespace prefmod
