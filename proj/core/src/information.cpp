#include "xover/information.hpp"

#include <cmath>
#include <limits>

#include "xover/errors.hpp"
#include "xover/optimality.hpp"

namespace xover {

CBlocks c_blocks(const CrossoverDesign& d, const WithinSubjectCovariance& cov) {
  check_design(d);
  if (cov.p() != d.p) {
    raise(errc::dimension_mismatch, "V is " + std::to_string(cov.p()) + "x" +
                                        std::to_string(cov.p()) + " but the design has p = " +
                                        std::to_string(d.p));
  }
  const int t = d.t;
  const Eigen::MatrixXd& Vs = cov.V_star;
  const Eigen::MatrixXd psi = shift_matrix(d.p);

  // A* = H_n ⊗ V*, so each block is a per-subject sum minus a rank-style
  // correction through the subject totals; no np×np product is formed.
  Eigen::MatrixXd c11 = Eigen::MatrixXd::Zero(t, t);
  Eigen::MatrixXd c12 = Eigen::MatrixXd::Zero(t, t);
  Eigen::MatrixXd c22 = Eigen::MatrixXd::Zero(t, t);
  Eigen::MatrixXd sumT = Eigen::MatrixXd::Zero(d.p, t);
  Eigen::MatrixXd sumF = Eigen::MatrixXd::Zero(d.p, t);
  for (int j = 0; j < d.n; ++j) {
    const Eigen::MatrixXd Tj = subject_incidence(d, j);
    const Eigen::MatrixXd Fj = psi * Tj;
    const Eigen::MatrixXd VsT = Vs * Tj;
    c11.noalias() += Tj.transpose() * VsT;
    c12.noalias() += VsT.transpose() * Fj;
    c22.noalias() += Fj.transpose() * Vs * Fj;
    sumT += Tj;
    sumF += Fj;
  }
  const double inv_n = 1.0 / static_cast<double>(d.n);
  const Eigen::MatrixXd VsSumT = Vs * sumT;
  const Eigen::MatrixXd VsSumF = Vs * sumF;
  c11.noalias() -= inv_n * sumT.transpose() * VsSumT;
  c12.noalias() -= inv_n * sumT.transpose() * VsSumF;
  c22.noalias() -= inv_n * sumF.transpose() * VsSumF;
  return {std::move(c11), std::move(c12), std::move(c22)};
}

Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& M, double tol) {
  const int dim = static_cast<int>(M.rows());
  if (dim == 0) return M;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  const Eigen::VectorXd& values = es.eigenvalues();
  const double max_abs = values.cwiseAbs().maxCoeff();
  if (max_abs == 0.0) return Eigen::MatrixXd::Zero(dim, dim);
  const double cutoff =
      (tol < 0.0 ? dim * std::numeric_limits<double>::epsilon() : tol) * max_abs;
  Eigen::VectorXd inverted = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < dim; ++k) {
    if (std::abs(values[k]) > cutoff) inverted[k] = 1.0 / values[k];
  }
  return es.eigenvectors() * inverted.asDiagonal() * es.eigenvectors().transpose();
}

MatrixClassReport classify(const Eigen::MatrixXd& M, double tol, double cs_tol) {
  const int dim = static_cast<int>(M.rows());
  MatrixClassReport rep;
  rep.tolerance = tol;
  rep.cs_tolerance = cs_tol;
  if (dim == 0 || M.cols() != dim) {
    raise(errc::dimension_mismatch, "classify needs a non-empty square matrix");
  }
  const double max_abs = M.cwiseAbs().maxCoeff();
  const double scale = max_abs > 0.0 ? max_abs : 1.0;

  rep.symmetry_residual = (M - M.transpose()).cwiseAbs().maxCoeff() / scale;
  rep.is_symmetric = rep.symmetry_residual <= tol;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double lambda_scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  rep.nnd_residual = lambda_min < 0.0 ? -lambda_min / lambda_scale : 0.0;
  rep.is_nnd = rep.nnd_residual <= tol;

  rep.row_sum_residual = M.rowwise().sum().cwiseAbs().maxCoeff() / scale;
  rep.col_sum_residual = M.colwise().sum().cwiseAbs().maxCoeff() / scale;
  rep.zero_row_sums = rep.row_sum_residual <= tol;
  rep.zero_col_sums = rep.col_sum_residual <= tol;

  double diag_min = M(0, 0), diag_max = M(0, 0);
  double off_min = 0.0, off_max = 0.0;
  bool have_off = false;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      const double value = M(i, j);
      if (i == j) {
        diag_min = std::min(diag_min, value);
        diag_max = std::max(diag_max, value);
      } else if (!have_off) {
        off_min = off_max = value;
        have_off = true;
      } else {
        off_min = std::min(off_min, value);
        off_max = std::max(off_max, value);
      }
    }
  }
  const double spread = std::max(diag_max - diag_min, have_off ? off_max - off_min : 0.0);
  rep.complete_symmetry_residual = spread / scale;
  rep.is_completely_symmetric = rep.complete_symmetry_residual <= cs_tol;
  return rep;
}

MatrixClassReport classify_kronecker_identity(const Eigen::MatrixXd& block, int g,
                                              double tol, double cs_tol) {
  // I_g ⊗ block shares max-abs scale, eigenvalue range, symmetry defect and
  // row/column sums with the block; for g > 1 the between-block zeros join
  // the off-diagonal population of the complete-symmetry test.
  MatrixClassReport rep = classify(block, tol, cs_tol);
  if (g <= 1) return rep;
  const int t = static_cast<int>(block.rows());
  const double max_abs = block.cwiseAbs().maxCoeff();
  const double scale = max_abs > 0.0 ? max_abs : 1.0;
  double diag_min = block(0, 0), diag_max = block(0, 0);
  double off_min = 0.0, off_max = 0.0;  // 0 entries exist once g > 1
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) {
      if (i == j) {
        diag_min = std::min(diag_min, block(i, j));
        diag_max = std::max(diag_max, block(i, j));
      } else {
        off_min = std::min(off_min, block(i, j));
        off_max = std::max(off_max, block(i, j));
      }
    }
  }
  const double spread = std::max(diag_max - diag_min, off_max - off_min);
  rep.complete_symmetry_residual = spread / scale;
  rep.is_completely_symmetric = rep.complete_symmetry_residual <= cs_tol;
  return rep;
}

Eigen::MatrixXd InformationMatrix::full() const {
  const int t = static_cast<int>(block.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g * t, g * t);
  for (int k = 0; k < g; ++k) out.block(k * t, k * t, t, t) = block;
  return out;
}

namespace {

InformationMatrix finish_information(Eigen::MatrixXd block, int g) {
  InformationMatrix info;
  info.g = g;
  info.block = std::move(block);
  info.report = classify_kronecker_identity(info.block, g);
  return info;
}

}  // namespace

InformationMatrix information_matrix(const CrossoverDesign& d,
                                     const WithinSubjectCovariance& cov, int g) {
  if (g < 1) raise(errc::bad_parameter, "g must be >= 1");
  const CBlocks blocks = c_blocks(d, cov);
  Eigen::MatrixXd block = blocks.c11 - blocks.c12 * generalized_inverse(blocks.c22) *
                                           blocks.c12.transpose();
  return finish_information(std::move(block), g);
}

InformationMatrix information_matrix_projection_oracle(
    const CrossoverDesign& d, const WithinSubjectCovariance& cov, int g) {
  if (g < 1) raise(errc::bad_parameter, "g must be >= 1");
  check_design(d);
  if (cov.p() != d.p) {
    raise(errc::dimension_mismatch, "V dimension does not match the design");
  }
  const int rows = d.n * d.p;
  const DesignMatrices dm = design_matrices(d);
  const Eigen::MatrixXd V_mh = inverse_sqrt(cov.V);

  // Σ^{-1/2} = I_n ⊗ V^{-1/2}, applied block-row-wise.
  auto whiten = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd out(M.rows(), M.cols());
    for (int j = 0; j < d.n; ++j) {
      out.middleRows(j * d.p, d.p) = V_mh * M.middleRows(j * d.p, d.p);
    }
    return out;
  };

  // nuisance columns [1 | periods | subjects | F]
  Eigen::MatrixXd X(rows, 1 + d.p + d.n + d.t);
  X.col(0).setOnes();
  X.middleCols(1, d.p).setZero();
  X.middleCols(1 + d.p, d.n).setZero();
  for (int j = 0; j < d.n; ++j) {
    for (int i = 0; i < d.p; ++i) {
      X(j * d.p + i, 1 + i) = 1.0;          // period effect
      X(j * d.p + i, 1 + d.p + j) = 1.0;    // subject effect
    }
  }
  X.rightCols(d.t) = dm.carryover;

  const Eigen::MatrixXd W = whiten(X);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
  const auto rank = qr.rank();
  const Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(rows, rank);
  const Eigen::MatrixXd Tw = whiten(dm.treatment);
  const Eigen::MatrixXd QtT = Q.transpose() * Tw;
  Eigen::MatrixXd block = Tw.transpose() * Tw - QtT.transpose() * QtT;
  return finish_information(std::move(block), g);
}

ClosedFormReport closed_form_oa_information(const CrossoverDesign& d_star,
                                            const WithinSubjectCovariance& cov) {
  const OACertificate cert = verify_oa(d_star);
  if (!cert.passed || d_star.t < 3) {
    raise(errc::not_an_oa, "design is not a certified strength-2 array with t >= 3" +
                               (cert.witness.empty() ? std::string()
                                                     : " (" + cert.witness + ")"));
  }
  if (cov.p() != d_star.p) {
    raise(errc::dimension_mismatch, "V dimension does not match the design");
  }
  const int t = d_star.t;
  const int n = d_star.n;
  const Eigen::MatrixXd& Vs = cov.V_star;
  const Eigen::MatrixXd psi = shift_matrix(d_star.p);
  const Eigen::MatrixXd T1 = subject_incidence(d_star, 0);

  ClosedFormReport rep;
  rep.e11 = (T1.transpose() * Vs * T1).trace();
  rep.e12 = (T1.transpose() * Vs * psi * T1).trace();
  rep.e22 = (T1.transpose() * psi.transpose() * Vs * psi * T1).trace() -
            Vs(0, 0) / static_cast<double>(t);
  const double factor = static_cast<double>(n) / static_cast<double>(t - 1);
  rep.E << factor * rep.e11, factor * rep.e12, factor * rep.e12, factor * rep.e22;
  rep.det_E = rep.E.determinant();
  if (std::abs(rep.E(1, 1)) <= 1e-14 * std::max(1.0, rep.E.cwiseAbs().maxCoeff())) {
    raise(errc::zero_e22, "carryover-block divisor vanished; closed form undefined");
  }
  rep.coefficient = rep.det_E / rep.E(1, 1);
  rep.matrix = rep.coefficient * centering_matrix(t);
  return rep;
}

}  // namespace xover
