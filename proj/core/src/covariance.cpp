#include "xover/covariance.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <sstream>

#include "xover/errors.hpp"
#include "xover/matrix_io.hpp"

namespace xover {

const char* cov_kind_name(CovKind kind) noexcept {
  switch (kind) {
    case CovKind::identity: return "identity";
    case CovKind::ar1: return "ar1";
    case CovKind::tridiagonal: return "tridiag";
    case CovKind::custom: return "custom";
  }
  return "?";
}

CovarianceSpec CovarianceSpec::identity(int p) { return {CovKind::identity, 0.0, p, {}}; }
CovarianceSpec CovarianceSpec::ar1(double r, int p) { return {CovKind::ar1, r, p, {}}; }
CovarianceSpec CovarianceSpec::tridiagonal(double r, int p) {
  return {CovKind::tridiagonal, r, p, {}};
}
CovarianceSpec CovarianceSpec::custom_matrix(Eigen::MatrixXd V) {
  CovarianceSpec spec;
  spec.kind = CovKind::custom;
  spec.p = static_cast<int>(V.rows());
  spec.custom = std::move(V);
  return spec;
}

CovarianceSpec CovarianceSpec::parse(std::string_view text, int p) {
  if (text == "identity") return identity(p);
  auto parse_r = [&](std::string_view tail) {
    double r = 0.0;
    const char* begin = tail.data();
    const char* end = tail.data() + tail.size();
    auto [ptr, ec] = std::from_chars(begin, end, r);
    if (ec != std::errc() || ptr != end) {
      raise(errc::bad_parameter, "cannot parse correlation parameter from '" +
                                     std::string(tail) + "'");
    }
    return r;
  };
  if (text.starts_with("ar1:")) return ar1(parse_r(text.substr(4)), p);
  if (text.starts_with("tridiag:")) return tridiagonal(parse_r(text.substr(8)), p);
  if (text.starts_with("custom:")) {
    const auto path = std::string(text.substr(7));
    Eigen::MatrixXd V = matrix_from_csv_file(path);
    if (p > 0 && V.rows() != p) {
      raise(errc::dimension_mismatch, "custom covariance is " + std::to_string(V.rows()) +
                                          "x" + std::to_string(V.cols()) + ", expected p = " +
                                          std::to_string(p));
    }
    return custom_matrix(std::move(V));
  }
  raise(errc::bad_parameter, "covariance spec '" + std::string(text) +
                                 "' is not identity | ar1:<r> | tridiag:<r> | custom:<path>");
}

std::string CovarianceSpec::describe() const {
  switch (kind) {
    case CovKind::identity: return "identity";
    case CovKind::ar1: case CovKind::tridiagonal: {
      std::ostringstream out;
      out << cov_kind_name(kind) << ":" << r;
      return out.str();
    }
    case CovKind::custom: return "custom";
  }
  return "?";
}

int positive_definite_check(const Eigen::MatrixXd& M) {
  const int p = static_cast<int>(M.rows());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < p; ++k) {
    double pivot = M(k, k) - L.row(k).head(k).squaredNorm();
    if (!(pivot > 0.0)) return k + 1;  // failing leading minor, 1-based
    L(k, k) = std::sqrt(pivot);
    for (int i = k + 1; i < p; ++i) {
      L(i, k) = (M(i, k) - L.row(i).head(k).dot(L.row(k).head(k))) / L(k, k);
    }
  }
  return 0;
}

Eigen::MatrixXd centering_matrix(int m) {
  return Eigen::MatrixXd::Identity(m, m) -
         Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
}

Eigen::MatrixXd v_star(const Eigen::MatrixXd& V) {
  const int p = static_cast<int>(V.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) {
    raise(errc::singular_v, "V is not positive definite; cannot form V*");
  }
  const Eigen::MatrixXd V_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd w = V_inv * Eigen::VectorXd::Ones(p);  // V^{-1} 1_p
  const double denom = w.sum();                                // 1' V^{-1} 1
  if (!(std::abs(denom) > 0.0)) raise(errc::singular_v, "1'V^{-1}1 vanished");
  return V_inv - (w * w.transpose()) / denom;
}

WithinSubjectCovariance build_V(const CovarianceSpec& spec) {
  if (spec.p < 2 && spec.kind != CovKind::custom) {
    raise(errc::bad_parameter, "covariance needs p >= 2, got " + std::to_string(spec.p));
  }
  Eigen::MatrixXd V;
  switch (spec.kind) {
    case CovKind::identity:
      V = Eigen::MatrixXd::Identity(spec.p, spec.p);
      break;
    case CovKind::ar1: {
      if (!(spec.r > -1.0 && spec.r < 1.0)) {
        raise(errc::bad_parameter, "ar1 requires -1 < r < 1, got r = " + std::to_string(spec.r));
      }
      V.resize(spec.p, spec.p);
      const double scale = 1.0 / (1.0 - spec.r * spec.r);
      for (int i = 0; i < spec.p; ++i) {
        for (int j = 0; j < spec.p; ++j) {
          V(i, j) = scale * std::pow(spec.r, std::abs(i - j));
        }
      }
      break;
    }
    case CovKind::tridiagonal: {
      V = Eigen::MatrixXd::Identity(spec.p, spec.p);
      for (int i = 0; i + 1 < spec.p; ++i) {
        V(i, i + 1) = spec.r;
        V(i + 1, i) = spec.r;
      }
      break;
    }
    case CovKind::custom: {
      V = spec.custom;
      if (V.rows() != V.cols() || V.rows() < 2) {
        raise(errc::bad_parameter, "custom covariance must be square with p >= 2");
      }
      const double scale = std::max(1.0, V.cwiseAbs().maxCoeff());
      if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        raise(errc::bad_parameter, "custom covariance is not symmetric");
      }
      V = 0.5 * (V + V.transpose());
      break;
    }
  }
  if (const int minor = positive_definite_check(V)) {
    raise(errc::not_positive_definite,
          spec.describe() + " with p = " + std::to_string(static_cast<int>(V.rows())) +
              ": leading principal minor " + std::to_string(minor) + " is not positive");
  }
  WithinSubjectCovariance cov;
  cov.V = V;
  cov.V_inv = Eigen::LLT<Eigen::MatrixXd>(V).solve(
      Eigen::MatrixXd::Identity(V.rows(), V.cols()));
  cov.V_star = v_star(V);
  return cov;
}

Eigen::MatrixXd a_star_dense(const WithinSubjectCovariance& cov, int n) {
  if (n < 1) raise(errc::bad_parameter, "a_star needs n >= 1");
  const Eigen::MatrixXd Hn = centering_matrix(n);
  const int p = cov.p();
  Eigen::MatrixXd A(n * p, n * p);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      A.block(a * p, b * p, p, p) = Hn(a, b) * cov.V_star;
    }
  }
  return A;
}

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    raise(errc::singular_v, "matrix is not positive definite; no inverse square root");
  }
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace xover
