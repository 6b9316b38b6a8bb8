#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>

namespace xover {

enum class CovKind { identity, ar1, tridiagonal, custom };

const char* cov_kind_name(CovKind kind) noexcept;

/// Parametric description of the p×p within-subject covariance V.
struct CovarianceSpec {
  CovKind kind = CovKind::identity;
  double r = 0.0;
  int p = 0;
  Eigen::MatrixXd custom;

  static CovarianceSpec identity(int p);
  static CovarianceSpec ar1(double r, int p);
  static CovarianceSpec tridiagonal(double r, int p);
  static CovarianceSpec custom_matrix(Eigen::MatrixXd V);

  /// CLI form: "identity" | "ar1:<r>" | "tridiag:<r>" | "custom:<csv path>".
  static CovarianceSpec parse(std::string_view text, int p);

  std::string describe() const;
};

/// V together with the matrices derived from it. V* annihilates 1_p and is
/// the per-subject kernel of A* = H_n ⊗ V*.
struct WithinSubjectCovariance {
  Eigen::MatrixXd V;
  Eigen::MatrixXd V_inv;
  Eigen::MatrixXd V_star;

  int p() const { return static_cast<int>(V.rows()); }
};

/// Builds V per the spec'd structure and validates positive definiteness by
/// triangular factorization. Throws bad_parameter (ar1 r outside (−1,1)),
/// not_positive_definite (message names the offending leading minor).
WithinSubjectCovariance build_V(const CovarianceSpec& spec);

/// V* = V⁻¹ − (1'V⁻¹1)⁻¹ V⁻¹11'V⁻¹.
Eigen::MatrixXd v_star(const Eigen::MatrixXd& V);

/// A* = H_n ⊗ V*, materialized (np×np). For structured computation prefer
/// the (H_n, V*) pair; c_blocks never forms this product.
Eigen::MatrixXd a_star_dense(const WithinSubjectCovariance& cov, int n);

/// Centering matrix H_m = I_m − (1/m) J_m.
Eigen::MatrixXd centering_matrix(int m);

/// In-house Cholesky; returns 0 when M is positive definite, else the
/// 1-based index of the first non-positive leading principal minor.
int positive_definite_check(const Eigen::MatrixXd& M);

/// Symmetric inverse square root via eigendecomposition.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& M);

}  // namespace xover
