#ifndef PREFMOD_CATALOG_HPP
#define PREFMOD_CATALOG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace prefmod {

// Shape summary used to refuse evaluating parameters against data they were
// not fitted on. `rank` is the embedding dimension (0 when not applicable),
// `num_features` the covariate count the parameters expect.
struct CatalogFingerprint {
  int num_alternatives = 0;
  int num_schools = 0;
  int num_ptypes = 0;
  int num_features = 0;
  int rank = 0;
  std::uint64_t nest_hash = 0;

  bool operator==(const CatalogFingerprint&) const = default;
};

// The universe of alternatives offered by a district. Every alternative is a
// (school, program type) pair and belongs to exactly one nest. Alternatives,
// schools, program types and nests are dense 0-based indices in declaration
// order; labels are kept for the file-format boundary only.
class ProgramCatalog {
 public:
  ProgramCatalog() = default;
  ProgramCatalog(std::vector<int> school_of, std::vector<int> ptype_of,
                 std::vector<int> nest_of,
                 std::vector<std::string> alt_labels = {},
                 std::vector<std::string> school_labels = {},
                 std::vector<std::string> ptype_labels = {},
                 std::vector<std::string> nest_labels = {});

  int num_alternatives() const { return static_cast<int>(school_of_.size()); }
  int num_schools() const { return num_schools_; }
  int num_ptypes() const { return num_ptypes_; }
  int num_nests() const { return num_nests_; }

  int school_of(int alt) const { return school_of_[alt]; }
  int ptype_of(int alt) const { return ptype_of_[alt]; }
  int nest_of(int alt) const { return nest_of_[alt]; }
  const std::vector<int>& alts_in_nest(int nest) const { return nest_members_[nest]; }

  const std::string& alt_label(int alt) const { return alt_labels_[alt]; }
  const std::string& school_label(int s) const { return school_labels_[s]; }
  const std::string& ptype_label(int p) const { return ptype_labels_[p]; }
  const std::string& nest_label(int k) const { return nest_labels_[k]; }

  // -1 when the label is unknown.
  int alt_index(const std::string& label) const;

  std::uint64_t nest_hash() const;
  CatalogFingerprint fingerprint(int num_features, int rank = 0) const;

  bool operator==(const ProgramCatalog&) const = default;

 private:
  std::vector<int> school_of_;
  std::vector<int> ptype_of_;
  std::vector<int> nest_of_;
  std::vector<std::vector<int>> nest_members_;
  int num_schools_ = 0;
  int num_ptypes_ = 0;
  int num_nests_ = 0;
  std::vector<std::string> alt_labels_;
  std::vector<std::string> school_labels_;
  std::vector<std::string> ptype_labels_;
  std::vector<std::string> nest_labels_;
};

}  // namespace prefmod

#endif  // PREFMOD_CATALOG_HPP
