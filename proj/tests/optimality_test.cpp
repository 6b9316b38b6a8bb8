#include <cmath>
#include <set>

#include "doctest.h"
#include "test_support.hpp"
#include "xover/covariance.hpp"
#include "xover/design.hpp"
#include "xover/errors.hpp"
#include "xover/information.hpp"
#include "xover/optimality.hpp"
#include "xover/verification.hpp"

using namespace xover;

TEST_SUITE_BEGIN("optimality");

TEST_CASE("certification of the three-sequence design fails with a witness") {
  const OACertificate cert = verify_oa(test::make_d0());
  CHECK_FALSE(cert.passed);
  CHECK_FALSE(cert.witness.empty());
  // rows (1,2): ordered pair (1,2) appears 6 times, (2,1) never
  REQUIRE(cert.row_pairs.front() == std::pair<int, int>{1, 2});
  CHECK(cert.pair_counts.front()(0, 1) == 6);
  CHECK(cert.pair_counts.front()(1, 0) == 0);
}

TEST_CASE("all-permutations construction") {
  SUBCASE("t = 3") {
    const CrossoverDesign oa = construct_oa_all_permutations(3);
    CHECK(oa.n == 6);
    CHECK(oa.treatment(0, 0) == 1);  // first column (1,2,3)
    CHECK(oa.treatment(0, 5) == 3);  // last column (3,2,1)
    const OACertificate cert = verify_oa(oa);
    CHECK(cert.passed);
    CHECK(cert.lambda == 1);
  }
  SUBCASE("t = 4 certifies with lambda = 2") {
    const OACertificate cert = verify_oa(construct_oa_all_permutations(4));
    CHECK(cert.passed);
    CHECK(cert.lambda == 2);
    CHECK(cert.n == 24);
  }
  SUBCASE("t = 2 is rejected") {
    CHECK_THROWS_WITH_AS(construct_oa_all_permutations(2), doctest::Contains("BadParameter"),
                         Error);
  }
  SUBCASE("cap") {
    CHECK_THROWS_WITH_AS(construct_oa_all_permutations(11), doctest::Contains("CapExceeded"),
                         Error);
  }
}

TEST_CASE("modular construction") {
  SUBCASE("t = 3") {
    const CrossoverDesign oa = construct_oa_modular(3);
    CHECK(oa.n == 6);
    // column (b=1, c=0) is (1,2,3); column (b=2, c=2) is (3,2,1)
    CHECK(oa.treatment(0, 0) == 1);
    CHECK(oa.treatment(1, 0) == 2);
    CHECK(oa.treatment(2, 0) == 3);
    CHECK(oa.treatment(0, 5) == 3);
    CHECK(oa.treatment(1, 5) == 2);
    CHECK(oa.treatment(2, 5) == 1);
    const OACertificate cert = verify_oa(oa);
    CHECK(cert.passed);
    CHECK(cert.lambda == 1);
  }
  SUBCASE("t = 5 certifies with lambda = 1") {
    const OACertificate cert = verify_oa(construct_oa_modular(5));
    CHECK(cert.passed);
    CHECK(cert.lambda == 1);
    CHECK(cert.n == 20);
  }
  SUBCASE("composite t is rejected") {
    CHECK_THROWS_WITH_AS(construct_oa_modular(4), doctest::Contains("NotPrime"), Error);
  }
  SUBCASE("t = 2 is rejected before the primality check") {
    CHECK_THROWS_WITH_AS(construct_oa_modular(2), doctest::Contains("BadParameter"), Error);
  }
}

TEST_CASE("repeated symbols in a column fail certification on the diagonal") {
  CrossoverDesign d;
  d.t = 2;
  d.n = 2;
  d.p = 2;
  d.labels = numeric_labels(2);
  d.assignment = {1, 2, 1, 1};  // second column repeats treatment 1
  const OACertificate cert = verify_oa(d);
  CHECK_FALSE(cert.passed);
  CHECK(cert.pair_counts.front()(0, 0) == 1);
}

TEST_CASE("replicated arrays keep the property with scaled lambda") {
  const CrossoverDesign oa18 = replicate_subjects(construct_oa_all_permutations(3), 3);
  const OACertificate cert = verify_oa(oa18);
  CHECK(cert.passed);
  CHECK(cert.lambda == 3);
  CHECK(cert.n == 18);
}

TEST_CASE("trace criterion") {
  const auto cov = build_V(CovarianceSpec::ar1(0.3, 3));
  const CrossoverDesign d0 = test::make_d0();
  SUBCASE("single subject gives zero") {
    CrossoverDesign d;
    d.t = 3;
    d.n = 1;
    d.p = 3;
    d.labels = numeric_labels(3);
    d.assignment = {1, 2, 3};
    CHECK(trace_criterion(d, cov, 1) == 0.0);
  }
  SUBCASE("responses scale the trace") {
    CHECK(trace_criterion(d0, cov, 2) ==
          doctest::Approx(2.0 * trace_criterion(d0, cov, 1)).epsilon(1e-14));
  }
  SUBCASE("agrees with the projection route") {
    const CrossoverDesign oa = construct_oa_all_permutations(3);
    CHECK(trace_criterion(oa, cov, 1) ==
          doctest::Approx(information_matrix_projection_oracle(oa, cov, 1).block.trace())
              .epsilon(1e-11));
  }
  SUBCASE("exact rational anchors at r = 0.3") {
    // traces are rational in r; these are 468/59 and 1920/59
    const CrossoverDesign oa18 = replicate_subjects(construct_oa_all_permutations(3), 3);
    CHECK(trace_criterion(d0, cov, 1) == doctest::Approx(468.0 / 59.0).epsilon(1e-12));
    CHECK(trace_criterion(oa18, cov, 1) == doctest::Approx(1920.0 / 59.0).epsilon(1e-12));
  }
}

TEST_CASE("exhaustive search") {
  SUBCASE("smoke case t = 2, n = 2") {
    const auto cov = build_V(CovarianceSpec::identity(2));
    const SearchResult result = search_max_trace(2, 2, cov);
    CHECK(result.evaluated_count == 4);
    CHECK_FALSE(result.oa_attains_max.has_value());  // no claim below t = 3
    CHECK(result.best_trace > 0.0);
  }
  SUBCASE("t = 3, n = 2: 36 designs evaluated") {
    const auto cov = build_V(CovarianceSpec::identity(3));
    const SearchResult result = search_max_trace(3, 2, cov);
    CHECK(result.evaluated_count == 36);
  }
  SUBCASE("fast path agrees with the information-matrix route at t = 3, n = 3") {
    const auto cov = build_V(CovarianceSpec::ar1(-0.35, 3));
    double best = -1.0;
    enumerate_binary_designs(3, 3, [&](const CrossoverDesign& d) {
      best = std::max(best, trace_criterion(d, cov, 1));
    });
    const SearchResult result = search_max_trace(3, 3, cov);
    CHECK(result.best_trace == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("the certified array attains the maximum at t = 3, n = 6") {
    const auto cov = build_V(CovarianceSpec::ar1(0.3, 3));
    const SearchResult result = search_max_trace(3, 6, cov);
    CHECK(result.evaluated_count == 46656);
    REQUIRE(result.oa_attains_max.has_value());
    CHECK(*result.oa_attains_max);
    CHECK(result.best_trace ==
          doctest::Approx(trace_criterion(construct_oa_all_permutations(3), cov, 1))
              .epsilon(1e-9));
    for (const auto& d : result.argmax_designs) CHECK(d.binary());
  }
  SUBCASE("deterministic across worker counts") {
    const auto cov = build_V(CovarianceSpec::tridiagonal(0.5, 3));
    SearchOptions one;
    one.workers = 1;
    SearchOptions three;
    three.workers = 3;
    const SearchResult a = search_max_trace(3, 4, cov, one);
    const SearchResult b = search_max_trace(3, 4, cov, three);
    CHECK(a.best_trace == b.best_trace);
    REQUIRE(a.argmax_designs.size() == b.argmax_designs.size());
    for (std::size_t k = 0; k < a.argmax_designs.size(); ++k) {
      CHECK(a.argmax_designs[k].assignment == b.argmax_designs[k].assignment);
    }
  }
  SUBCASE("g scales the reported maximum, not the argmax set") {
    const auto cov = build_V(CovarianceSpec::tridiagonal(0.5, 3));
    SearchOptions g1, g2;
    g2.g = 2;
    const SearchResult a = search_max_trace(3, 4, cov, g1);
    const SearchResult b = search_max_trace(3, 4, cov, g2);
    CHECK(b.best_trace == doctest::Approx(2.0 * a.best_trace).epsilon(1e-14));
    REQUIRE(a.argmax_designs.size() == b.argmax_designs.size());
    CHECK(a.argmax_designs.front().assignment == b.argmax_designs.front().assignment);
  }
  SUBCASE("cap exceeded") {
    const auto cov = build_V(CovarianceSpec::identity(4));
    CHECK_THROWS_WITH_AS(search_max_trace(4, 12, cov), doctest::Contains("CapExceeded"), Error);
  }
}

TEST_CASE("efficiency") {
  const CrossoverDesign d0 = test::make_d0();
  const CrossoverDesign oa18 = replicate_subjects(construct_oa_all_permutations(3), 3);
  SUBCASE("self efficiency is one") {
    const auto cov = build_V(CovarianceSpec::ar1(0.3, 3));
    CHECK(efficiency(oa18, oa18, cov, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("exact value at identity V") {
    const auto cov = build_V(CovarianceSpec::identity(3));
    CHECK(efficiency(d0, oa18, cov, 1) == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("independent of g") {
    const auto cov = build_V(CovarianceSpec::tridiagonal(0.3, 3));
    CHECK(efficiency(d0, oa18, cov, 1) ==
          doctest::Approx(efficiency(d0, oa18, cov, 4)).epsilon(1e-13));
  }
  SUBCASE("invariant under scaling V") {
    const Eigen::MatrixXd V = build_V(CovarianceSpec::ar1(0.3, 3)).V;
    const auto cov1 = build_V(CovarianceSpec::custom_matrix(V));
    const auto cov2 = build_V(CovarianceSpec::custom_matrix(3.0 * V));
    CHECK(efficiency(d0, oa18, cov1, 1) ==
          doctest::Approx(efficiency(d0, oa18, cov2, 1)).epsilon(1e-12));
  }
  SUBCASE("degenerate reference") {
    CrossoverDesign single;
    single.t = 3;
    single.n = 1;
    single.p = 3;
    single.labels = numeric_labels(3);
    single.assignment = {1, 2, 3};
    const auto cov = build_V(CovarianceSpec::identity(3));
    CHECK_THROWS_WITH_AS(efficiency(single, single, cov, 1),
                         doctest::Contains("DegenerateReference"), Error);
  }
  SUBCASE("mismatched shapes are rejected") {
    const auto cov = build_V(CovarianceSpec::identity(3));
    CHECK_THROWS_AS(efficiency(d0, construct_oa_all_permutations(3), cov, 1), Error);
  }
}

TEST_CASE("efficiency curves") {
  const CrossoverDesign d0 = test::make_d0();
  const CrossoverDesign oa18 = replicate_subjects(construct_oa_all_permutations(3), 3);
  SUBCASE("single point grid") {
    const EfficiencyCurve curve =
        efficiency_curve(d0, oa18, CovKind::ar1, 0.0, 0.0, 0.01, 1);
    REQUIRE(curve.points.size() == 1);
    CHECK(curve.points[0].r == 0.0);
    CHECK(curve.points[0].efficiency == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("families coincide at r = 0") {
    const EfficiencyCurve a = efficiency_curve(d0, oa18, CovKind::ar1, 0.0, 0.0, 0.01, 1);
    const EfficiencyCurve b =
        efficiency_curve(d0, oa18, CovKind::tridiagonal, 0.0, 0.0, 0.01, 1);
    CHECK(a.points[0].efficiency == doctest::Approx(b.points[0].efficiency).epsilon(1e-14));
  }
  SUBCASE("default grids have the expected sizes") {
    double r_min = 0, r_max = 0, step = 0;
    default_grid(CovKind::ar1, r_min, r_max, step);
    const EfficiencyCurve curve =
        efficiency_curve(d0, oa18, CovKind::ar1, r_min, r_max, step, 1);
    CHECK(curve.points.size() == 199);
    default_grid(CovKind::tridiagonal, r_min, r_max, step);
    const EfficiencyCurve tri =
        efficiency_curve(d0, oa18, CovKind::tridiagonal, r_min, r_max, step, 1);
    CHECK(tri.points.size() == 141);
  }
  SUBCASE("repeated runs produce identical CSV") {
    const EfficiencyCurve a = efficiency_curve(d0, oa18, CovKind::ar1, -0.9, 0.9, 0.1, 1);
    const EfficiencyCurve b = efficiency_curve(d0, oa18, CovKind::ar1, -0.9, 0.9, 0.1, 1);
    CHECK(curve_to_csv(a) == curve_to_csv(b));
    CHECK(curve_to_csv(a).substr(0, 33) == "r,trace_d,trace_dstar,efficiency\n");
  }
  SUBCASE("bad grids are rejected") {
    CHECK_THROWS_WITH_AS(efficiency_curve(d0, oa18, CovKind::ar1, 0.5, -0.5, 0.01, 1),
                         doctest::Contains("BadGrid"), Error);
    CHECK_THROWS_AS(efficiency_curve(d0, oa18, CovKind::ar1, 0.0, 0.5, 0.0, 1), Error);
    CHECK_THROWS_AS(efficiency_curve(d0, oa18, CovKind::ar1, -1.5, 0.5, 0.01, 1), Error);
    CHECK_THROWS_AS(efficiency_curve(d0, oa18, CovKind::tridiagonal, -0.8, 0.8, 0.01, 1),
                    Error);
    CHECK_THROWS_AS(efficiency_curve(d0, oa18, CovKind::identity, 0.0, 0.5, 0.01, 1), Error);
  }
  SUBCASE("efficiency never exceeds one over the search class reference") {
    const EfficiencyCurve curve = efficiency_curve(d0, oa18, CovKind::ar1, -0.9, 0.9, 0.1, 1);
    for (const CurvePoint& point : curve.points) {
      CHECK(point.efficiency >= 0.0);
      CHECK(point.efficiency <= 1.0 + 1e-12);
      CHECK(point.efficiency ==
            doctest::Approx(point.trace_d / point.trace_dstar).epsilon(1e-15));
    }
  }
}

TEST_CASE("permutation decomposition of the optimal information") {
  const CrossoverDesign d0 = test::make_d0();
  const CrossoverDesign oa18 = replicate_subjects(construct_oa_all_permutations(3), 3);
  SUBCASE("reference against itself") {
    const auto cov = build_V(CovarianceSpec::ar1(0.3, 3));
    const DecompositionReport rep = verify_decomposition(oa18, oa18, cov);
    CHECK(rep.c_d == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(rep.residual < 1e-12);
    CHECK(rep.residual_lift_g2 < 1e-12);
  }
  SUBCASE("three-sequence design") {
    const auto cov = build_V(CovarianceSpec::ar1(0.3, 3));
    const DecompositionReport rep = verify_decomposition(d0, oa18, cov);
    CHECK(rep.c_d == doctest::Approx(80.0 / 117.0).epsilon(1e-12));  // rational at r = 0.3
    CHECK(rep.residual < 1e-9);
    CHECK(rep.residual_lift_g2 < 1e-9);
  }
  SUBCASE("random binary designs") {
    std::mt19937_64 rng(123);
    const auto cov = build_V(CovarianceSpec::tridiagonal(0.4, 3));
    const CrossoverDesign oa6 = construct_oa_all_permutations(3);
    for (int trial = 0; trial < 10; ++trial) {
      const CrossoverDesign d = sample_binary_design(3, 6, rng);
      try {
        const DecompositionReport rep = verify_decomposition(d, oa6, cov);
        CHECK(rep.residual < 1e-9);
        CHECK(rep.residual_lift_g2 < 1e-9);
      } catch (const Error& e) {
        CHECK(e.code() == errc::zero_trace);
      }
    }
  }
  SUBCASE("zero information is rejected") {
    CrossoverDesign flat;
    flat.t = 3;
    flat.n = 6;
    flat.p = 3;
    flat.labels = numeric_labels(3);
    flat.assignment.assign(18, 0);
    for (int j = 0; j < 6; ++j) {
      flat.treatment(0, j) = 1;
      flat.treatment(1, j) = 2;
      flat.treatment(2, j) = 3;
    }
    const auto cov = build_V(CovarianceSpec::identity(3));
    CHECK_THROWS_WITH_AS(verify_decomposition(flat, construct_oa_all_permutations(3), cov),
                         doctest::Contains("ZeroTrace"), Error);
  }
}

TEST_CASE("conjugation averaging identity for zero-row-sum symmetric matrices") {
  std::mt19937_64 rng(321);
  for (int t : {3, 4}) {
    const Eigen::MatrixXd H = centering_matrix(t);
    const std::vector<Eigen::MatrixXd> perms = permutation_matrices(t);
    for (int trial = 0; trial < 25; ++trial) {
      const Eigen::MatrixXd M = H * test::random_symmetric(t, rng) * H;
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(t, t);
      for (const auto& Q : perms) sum += Q * M * Q.transpose();
      const Eigen::MatrixXd expected =
          static_cast<double>(factorial(t)) * (M.trace() / (t - 1)) * H;
      CHECK(test::rel_diff(sum, expected) < 1e-10);
    }
  }
}

TEST_CASE("permutation matrices are orthogonal and complete") {
  const std::vector<Eigen::MatrixXd> perms = permutation_matrices(3);
  REQUIRE(perms.size() == 6);
  std::set<std::string> distinct;
  for (const auto& Q : perms) {
    CHECK(test::rel_diff(Q * Q.transpose(), Eigen::MatrixXd::Identity(3, 3)) == 0.0);
    std::string key;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) key += Q(i, j) > 0.5 ? '1' : '0';
    }
    distinct.insert(key);
  }
  CHECK(distinct.size() == 6);
}

TEST_SUITE_END();
