#include <cmath>

#include "doctest.h"
#include "test_support.hpp"
#include "xover/covariance.hpp"
#include "xover/errors.hpp"

using namespace xover;

TEST_SUITE_BEGIN("covariance");

TEST_CASE("ar1 structure") {
  SUBCASE("r = 0 collapses to the identity") {
    const auto cov = build_V(CovarianceSpec::ar1(0.0, 3));
    CHECK(test::rel_diff(cov.V, Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  }
  SUBCASE("entries are r^|i-j| / (1 - r^2)") {
    const double r = 0.3;
    const auto cov = build_V(CovarianceSpec::ar1(r, 3));
    Eigen::MatrixXd expected(3, 3);
    expected << 1, r, r * r, r, 1, r, r * r, r, 1;
    expected /= 1.0 - r * r;
    CHECK(test::rel_diff(cov.V, expected) < 1e-15);
  }
  SUBCASE("r outside the open interval is rejected") {
    CHECK_THROWS_WITH_AS(build_V(CovarianceSpec::ar1(1.0, 3)),
                         doctest::Contains("BadParameter"), Error);
    CHECK_THROWS_AS(build_V(CovarianceSpec::ar1(-1.0, 3)), Error);
  }
}

TEST_CASE("tridiagonal structure") {
  SUBCASE("entries") {
    const auto cov = build_V(CovarianceSpec::tridiagonal(0.5, 3));
    Eigen::MatrixXd expected(3, 3);
    expected << 1, 0.5, 0, 0.5, 1, 0.5, 0, 0.5, 1;
    CHECK(cov.V == expected);
  }
  SUBCASE("p = 3 positive definiteness fails beyond 1/sqrt(2)") {
    CHECK_THROWS_WITH_AS(build_V(CovarianceSpec::tridiagonal(0.8, 3)),
                         doctest::Contains("minor 3"), Error);
    CHECK_NOTHROW(build_V(CovarianceSpec::tridiagonal(0.70, 3)));
    CHECK_THROWS_AS(build_V(CovarianceSpec::tridiagonal(0.71, 3)), Error);
  }
}

TEST_CASE("custom covariance validation") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(build_V(CovarianceSpec::custom_matrix(asym)), Error);
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd spd = test::random_spd(4, rng);
  const auto cov = build_V(CovarianceSpec::custom_matrix(spd));
  CHECK(test::rel_diff(cov.V * cov.V_inv, Eigen::MatrixXd::Identity(4, 4)) < 1e-12);
}

TEST_CASE("spec parsing") {
  CHECK(CovarianceSpec::parse("identity", 3).kind == CovKind::identity);
  const CovarianceSpec ar = CovarianceSpec::parse("ar1:0.3", 3);
  CHECK(ar.kind == CovKind::ar1);
  CHECK(ar.r == 0.3);
  const CovarianceSpec tri = CovarianceSpec::parse("tridiag:-0.5", 4);
  CHECK(tri.kind == CovKind::tridiagonal);
  CHECK(tri.r == -0.5);
  CHECK_THROWS_AS(CovarianceSpec::parse("ar1:abc", 3), Error);
  CHECK_THROWS_AS(CovarianceSpec::parse("gauss:0.1", 3), Error);
}

TEST_CASE("V* identities") {
  SUBCASE("identity V gives the centering matrix") {
    const auto cov = build_V(CovarianceSpec::identity(4));
    CHECK(test::rel_diff(cov.V_star, centering_matrix(4)) < 1e-14);
  }
  SUBCASE("V* annihilates the all-ones vector") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto cov = build_V(CovarianceSpec::custom_matrix(test::random_spd(3 + trial % 3, rng)));
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(cov.p());
      CHECK((cov.V_star * ones).cwiseAbs().maxCoeff() <
            1e-10 * std::max(1.0, cov.V_star.cwiseAbs().maxCoeff()));
      CHECK(test::rel_diff(cov.V_star, cov.V_star.transpose()) < 1e-12);
    }
  }
  SUBCASE("projection route agrees with the formula") {
    // V* = V^{-1/2} (I - qq'/q'q) V^{-1/2} with q = V^{-1/2} 1
    const auto cov = build_V(CovarianceSpec::ar1(0.3, 3));
    const Eigen::MatrixXd root = inverse_sqrt(cov.V);
    const Eigen::VectorXd q = root * Eigen::VectorXd::Ones(3);
    const Eigen::MatrixXd projector =
        Eigen::MatrixXd::Identity(3, 3) - (q * q.transpose()) / q.squaredNorm();
    CHECK(test::rel_diff(cov.V_star, root * projector * root) < 1e-12);
  }
  SUBCASE("scaling V by c scales V* by 1/c") {
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd V = test::random_spd(4, rng);
    const Eigen::MatrixXd a = v_star(V);
    const Eigen::MatrixXd b = v_star(2.5 * V);
    CHECK(test::rel_diff(a, 2.5 * b) < 1e-12);
  }
  SUBCASE("rank is p - 1 with nullspace spanned by ones") {
    std::mt19937_64 rng(13);
    const auto cov = build_V(CovarianceSpec::custom_matrix(test::random_spd(5, rng)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.V_star);
    int zeros = 0;
    for (int k = 0; k < 5; ++k) {
      if (std::abs(es.eigenvalues()[k]) < 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff()) {
        ++zeros;
        // the null eigenvector is proportional to 1
        const Eigen::VectorXd v = es.eigenvectors().col(k);
        CHECK(std::abs(std::abs(v.sum()) - std::sqrt(5.0)) < 1e-9);
      }
    }
    CHECK(zeros == 1);
  }
}

TEST_CASE("A* = H_n kron V*") {
  const auto cov = build_V(CovarianceSpec::identity(3));
  SUBCASE("n = 1 is the zero matrix") {
    CHECK(a_star_dense(cov, 1).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("idempotent for identity V") {
    const Eigen::MatrixXd A = a_star_dense(cov, 2);
    CHECK(test::rel_diff(A * A, A) < 1e-14);
  }
  SUBCASE("trace identity") {
    const auto ar = build_V(CovarianceSpec::ar1(0.4, 3));
    for (int n : {1, 2, 5}) {
      CHECK(a_star_dense(ar, n).trace() ==
            doctest::Approx((n - 1) * ar.V_star.trace()).epsilon(1e-12));
    }
  }
  SUBCASE("annihilates the all-ones vector") {
    const auto ar = build_V(CovarianceSpec::ar1(-0.6, 3));
    const Eigen::MatrixXd A = a_star_dense(ar, 4);
    CHECK((A * Eigen::VectorXd::Ones(12)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("positive definite check reports the failing minor") {
  CHECK(positive_definite_check(Eigen::MatrixXd::Identity(4, 4)) == 0);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK(positive_definite_check(bad) == 2);
  Eigen::MatrixXd first(2, 2);
  first << -1, 0, 0, 1;
  CHECK(positive_definite_check(first) == 1);
}

TEST_CASE("built matrices are exactly symmetric and factorizable") {
  for (double r : {-0.6, -0.3, 0.0, 0.3, 0.6}) {
    const auto cov = build_V(CovarianceSpec::ar1(r, 4));
    CHECK(cov.V == cov.V.transpose());
    CHECK(positive_definite_check(cov.V) == 0);
  }
  for (double r : {-0.5, 0.0, 0.5}) {
    const auto cov = build_V(CovarianceSpec::tridiagonal(r, 4));
    CHECK(cov.V == cov.V.transpose());
    CHECK(positive_definite_check(cov.V) == 0);
  }
}

TEST_SUITE_END();
