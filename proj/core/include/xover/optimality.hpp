#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xover/covariance.hpp"
#include "xover/design.hpp"
#include "xover/information.hpp"

namespace xover {

/// Strength-2 certificate for a p×n array over t symbols: in every ordered
/// pair of distinct rows, every ordered pair of distinct symbols must appear
/// exactly lambda times and every repeated symbol zero times, with
/// n = lambda·t·(t−1).
struct OACertificate {
  int t = 0;
  int p = 0;
  int n = 0;
  std::uint64_t lambda = 0;
  bool passed = false;
  /// Count tables indexed by ordered row pair (i1, i2), i1 != i2, in
  /// row-major order of (i1, i2); table(a-1, b-1) counts columns with
  /// symbol a in row i1 and b in row i2.
  std::vector<Eigen::MatrixXi> pair_counts;
  std::vector<std::pair<int, int>> row_pairs;
  std::string witness;  // first violation, empty when passed
};

OACertificate verify_oa(const CrossoverDesign& d);

/// n = t! columns, all permutations of 1..t in lexicographic order;
/// certifies with lambda = (t−2)!. Requires t ≥ 3 and t! ≤ cap.
CrossoverDesign construct_oa_all_permutations(
    int t, std::uint64_t cap = kDefaultEnumerationCap);

/// Prime t ≥ 3: columns indexed by (b, c), b in 1..t−1, c in 0..t−1, with
/// row i (0-based) holding ((c + i·b) mod t) + 1; n = t(t−1), lambda = 1.
CrossoverDesign construct_oa_modular(int t);

/// tr(C_d) = g · tr(block).
double trace_criterion(const CrossoverDesign& d,
                       const WithinSubjectCovariance& cov, int g = 1);

struct SearchOptions {
  int g = 1;
  std::uint64_t cap = kDefaultEnumerationCap;
  int workers = 0;             // 0 = hardware concurrency
  double tie_rel_tol = 1e-9;   // relative window for recording argmax ties
  std::size_t argmax_cap = 100;
};

struct SearchResult {
  double best_trace = 0.0;
  std::uint64_t evaluated_count = 0;
  std::vector<CrossoverDesign> argmax_designs;  // lexicographically smallest first
  bool argmax_truncated = false;
  /// Set when n = lambda·t·(t−1) for some positive integer lambda, t ≥ 3,
  /// and a certified reference array could be constructed.
  std::optional<bool> oa_attains_max;
};

/// Exhaustive trace maximization over every binary design with p = t.
/// Deterministic for any worker count: phase one finds the maximum, phase
/// two collects the tied designs in enumeration order.
SearchResult search_max_trace(int t, int n, const WithinSubjectCovariance& cov,
                              const SearchOptions& options = {});

/// e = tr(C_d)/tr(C_{d*}); throws degenerate_reference when the reference
/// trace is not positive.
double efficiency(const CrossoverDesign& d, const CrossoverDesign& d_star,
                  const WithinSubjectCovariance& cov, int g = 1);

struct CurvePoint {
  double r = 0.0;
  double trace_d = 0.0;
  double trace_dstar = 0.0;
  double efficiency = 0.0;
};

struct EfficiencyCurve {
  CovKind family = CovKind::ar1;
  std::vector<CurvePoint> points;
  double e_max = 0.0;
  double argmax_r = 0.0;
};

/// Evaluates the efficiency on the grid r = r_min + i·step. Throws bad_grid
/// for malformed grids or grid points outside the family's validity region.
EfficiencyCurve efficiency_curve(const CrossoverDesign& d,
                                 const CrossoverDesign& d_star, CovKind family,
                                 double r_min, double r_max, double step,
                                 int g = 1);

/// Exact CSV for a curve: header `r,trace_d,trace_dstar,efficiency`, one row
/// per grid point, 12 significant digits.
std::string curve_to_csv(const EfficiencyCurve& curve);

/// Default curve grids per family.
void default_grid(CovKind family, double& r_min, double& r_max, double& step);

/// Checks the permutation decomposition of C_{d*} against C_d:
/// C_{d*} = c_d Σ_υ Q_υ C_d Q'_υ over all t! permutation matrices with
/// c_d = tr(C_{d*})/(t!·tr(C_d)), plus the g = 2 lift with P = I_2 ⊗ Q.
/// Throws zero_trace when tr(C_d) vanishes.
struct DecompositionReport {
  double c_d = 0.0;
  double residual = 0.0;        // max abs entry of C_{d*} − c_d Σ Q C_d Q'
  double residual_lift_g2 = 0.0;
};

DecompositionReport verify_decomposition(const CrossoverDesign& d,
                                         const CrossoverDesign& d_star,
                                         const WithinSubjectCovariance& cov);

/// All t! permutation matrices of size t, in lexicographic permutation order.
std::vector<Eigen::MatrixXd> permutation_matrices(int t);

}  // namespace xover
