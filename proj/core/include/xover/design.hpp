#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace xover {

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// A crossover design: t treatments, n subjects, p periods, and the p×n
/// assignment grid d(i,j) with treatments coded 1..t. Row ordering of all
/// np-length quantities derived from a design is period-fastest within
/// subject: (i=1..p, j=1), (i=1..p, j=2), ...
struct CrossoverDesign {
  int t = 0;
  int n = 0;
  int p = 0;
  std::vector<int> assignment;       // p*n entries, row-major, values in 1..t
  std::vector<std::string> labels;   // size t, external names for 1..t

  int treatment(int period, int subject) const {
    return assignment[static_cast<std::size_t>(period) * n + subject];
  }
  int& treatment(int period, int subject) {
    return assignment[static_cast<std::size_t>(period) * n + subject];
  }

  /// True when no treatment appears more than once in any column; for
  /// p = t this means every column is a permutation of 1..t.
  bool binary() const;

  bool operator==(const CrossoverDesign& other) const = default;
};

/// Default labels "1".."t".
std::vector<std::string> numeric_labels(int t);

/// Normalizes a raw label grid into a design. Labels map to 1..t by
/// position in `alphabet` when given, otherwise by first appearance in
/// row-major scan order. Throws empty_grid, ragged_rows, unknown_label,
/// bad_parameter.
CrossoverDesign validate_design(
    const std::vector<std::vector<std::string>>& raw, int t,
    const std::optional<std::vector<std::string>>& alphabet = std::nullopt);

/// Structural consistency check for programmatically built designs.
void check_design(const CrossoverDesign& d);

struct DesignMatrices {
  Eigen::MatrixXd treatment;  // T: np×t, one 1 per row
  Eigen::MatrixXd carryover;  // F = (I_n ⊗ psi) T: np×t
  Eigen::MatrixXd shift;      // psi: p×p, ones on the first subdiagonal
};

DesignMatrices design_matrices(const CrossoverDesign& d);

/// p×p matrix with ones on the first subdiagonal; maps period i to i+1.
Eigen::MatrixXd shift_matrix(int p);

/// Subject j's p×t treatment-incidence slice of T.
Eigen::MatrixXd subject_incidence(const CrossoverDesign& d, int subject);

/// Column-block layout of the per-response model matrix
/// [1 | periods | subjects | direct | carryover].
struct ModelLayout {
  int intercept = 1;
  int periods = 0;   // p
  int subjects = 0;  // n
  int direct = 0;    // t
  int carryover = 0; // t
  int total() const { return intercept + periods + subjects + direct + carryover; }
};

ModelLayout model_layout(const CrossoverDesign& d);

/// Lexicographic (factoradic) permutation rank/unrank over 1..t.
std::vector<int> unrank_permutation(int t, std::uint64_t rank);
std::uint64_t rank_permutation(const std::vector<int>& perm);
std::uint64_t factorial(int t);

/// (t!)^n, or cap_exceeded when the class is larger than `cap`.
std::uint64_t binary_design_count(int t, int n, std::uint64_t cap);

/// Streams every design with p = t whose columns are permutations of 1..t,
/// ordered lexicographically by the tuple of per-column permutation ranks
/// (subject 1 most significant). Ranks [first, last) of that order; use the
/// full range for the spec'd enumeration. Designs are yielded by reference
/// into reused storage; copy to retain.
class BinaryDesignEnumerator {
 public:
  BinaryDesignEnumerator(int t, int n, std::uint64_t first, std::uint64_t last);

  /// Advances to the next design; returns nullptr when exhausted.
  const CrossoverDesign* next();

  std::uint64_t position() const { return position_; }

  /// Per-subject permutation ranks of the design last returned by next().
  const std::vector<std::uint64_t>& column_ranks() const { return digits_; }

 private:
  void materialize_column(int subject);

  int t_;
  int n_;
  std::uint64_t position_;
  std::uint64_t last_;
  std::vector<std::uint64_t> digits_;  // per-subject permutation ranks
  CrossoverDesign current_;
  bool fresh_ = true;
};

/// Enumerates the full binary class (p = t) in lexicographic rank order.
/// Throws cap_exceeded when (t!)^n > cap.
void enumerate_binary_designs(int t, int n,
                              const std::function<void(const CrossoverDesign&)>& sink,
                              std::uint64_t cap = kDefaultEnumerationCap);

/// Column-wise concatenation of `copies` copies of d (adds subjects).
CrossoverDesign replicate_subjects(const CrossoverDesign& d, int copies);

// ---- file formats ----
// JSON: {"t": int, "labels": [..] optional, "periods": [[label,...],...]}
// CSV: p rows, n comma-separated labels, no header.

CrossoverDesign design_from_json(const std::string& text);
CrossoverDesign design_from_csv(const std::string& text,
                                std::optional<int> t = std::nullopt);
std::string design_to_json(const CrossoverDesign& d);
std::string design_to_csv(const CrossoverDesign& d);

/// Reads a design file, sniffing JSON ('{' first) versus CSV.
CrossoverDesign load_design(const std::filesystem::path& path);
void save_design(const CrossoverDesign& d, const std::filesystem::path& path);

}  // namespace xover
