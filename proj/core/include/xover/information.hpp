#pragma once

#include <Eigen/Dense>

#include "xover/covariance.hpp"
#include "xover/design.hpp"

namespace xover {

/// Blocks of the bordered information matrix for (direct, carryover):
/// C11 = T'A*T, C12 = T'A*F = C21', C22 = F'A*F, with A* = H_n ⊗ V*.
struct CBlocks {
  Eigen::MatrixXd c11;
  Eigen::MatrixXd c12;
  Eigen::MatrixXd c22;
};

/// Computes the blocks through the Kronecker structure of A*; the np×np
/// matrix is never formed. Throws dimension_mismatch when V's p differs
/// from the design's.
CBlocks c_blocks(const CrossoverDesign& d, const WithinSubjectCovariance& cov);

/// Moore–Penrose inverse of a symmetric matrix via eigendecomposition.
/// Eigenvalues of magnitude below tol·|λ|max are treated as zero; tol < 0
/// selects the default cutoff dim·machine-epsilon.
Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& M, double tol = -1.0);

/// Predicate report for a square matrix, with measured residuals relative
/// to the matrix's max absolute entry. Complete symmetry = all diagonal
/// entries equal and all off-diagonal entries equal, at its own tolerance.
struct MatrixClassReport {
  bool is_symmetric = false;
  bool is_nnd = false;
  bool zero_row_sums = false;
  bool zero_col_sums = false;
  bool is_completely_symmetric = false;
  double symmetry_residual = 0.0;
  double nnd_residual = 0.0;
  double row_sum_residual = 0.0;
  double col_sum_residual = 0.0;
  double complete_symmetry_residual = 0.0;
  double tolerance = 0.0;
  double cs_tolerance = 0.0;
};

MatrixClassReport classify(const Eigen::MatrixXd& M, double tol = 1e-10,
                           double cs_tol = 1e-8);

/// Direct-effect information matrix: full = I_g ⊗ block. The full matrix is
/// materialized on demand; trace and classification come from the block via
/// Kronecker identities.
struct InformationMatrix {
  int g = 1;
  Eigen::MatrixXd block;      // t×t
  MatrixClassReport report;   // of the gt×gt full matrix

  Eigen::MatrixXd full() const;
  double trace() const { return g * block.trace(); }
};

/// block = C11 − C12 C22⁻ C21 with the Moore–Penrose choice of C22⁻.
InformationMatrix information_matrix(const CrossoverDesign& d,
                                     const WithinSubjectCovariance& cov,
                                     int g = 1);

/// Reference route: whitens by Σ^{-1/2} = I_n ⊗ V^{-1/2} and projects the
/// whitened T onto the orthocomplement of the whitened [1 | periods |
/// subjects | F] columns. Builds np×np projectors; desk scale only.
InformationMatrix information_matrix_projection_oracle(
    const CrossoverDesign& d, const WithinSubjectCovariance& cov, int g = 1);

/// Closed form for certified orthogonal-array designs (p = t):
/// block = coefficient · H_t with coefficient = det(E)/E22 where
/// E = (n/(t−1)) [[e11, e12], [e12, e22]] is built from subject 1's
/// incidence. Throws not_an_oa when certification fails, zero_e22 when the
/// divisor degenerates.
struct ClosedFormReport {
  double e11 = 0.0;
  double e12 = 0.0;
  double e22 = 0.0;             // raw scalar, before the n/(t−1) factor
  Eigen::Matrix2d E;
  double det_E = 0.0;
  double coefficient = 0.0;     // det(E)/E(2,2)
  Eigen::MatrixXd matrix;       // t×t
};

ClosedFormReport closed_form_oa_information(const CrossoverDesign& d_star,
                                            const WithinSubjectCovariance& cov);

/// Report of I_g ⊗ block computed from the block without materializing.
MatrixClassReport classify_kronecker_identity(const Eigen::MatrixXd& block,
                                              int g, double tol = 1e-10,
                                              double cs_tol = 1e-8);

}  // namespace xover
