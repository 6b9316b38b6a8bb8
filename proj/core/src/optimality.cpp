#include "xover/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <thread>

#include "xover/errors.hpp"

namespace xover {

OACertificate verify_oa(const CrossoverDesign& d) {
  check_design(d);
  OACertificate cert;
  cert.t = d.t;
  cert.p = d.p;
  cert.n = d.n;

  const std::uint64_t pair_slots =
      static_cast<std::uint64_t>(d.t) * static_cast<std::uint64_t>(d.t - 1);
  const bool divisible = pair_slots > 0 && d.n % pair_slots == 0;
  cert.lambda = divisible ? d.n / pair_slots : 0;

  for (int i1 = 0; i1 < d.p; ++i1) {
    for (int i2 = 0; i2 < d.p; ++i2) {
      if (i1 == i2) continue;
      Eigen::MatrixXi table = Eigen::MatrixXi::Zero(d.t, d.t);
      for (int j = 0; j < d.n; ++j) {
        table(d.treatment(i1, j) - 1, d.treatment(i2, j) - 1) += 1;
      }
      cert.row_pairs.emplace_back(i1 + 1, i2 + 1);
      cert.pair_counts.push_back(std::move(table));
    }
  }

  if (!divisible) {
    cert.passed = false;
    cert.witness = "n = " + std::to_string(d.n) + " is not a multiple of t(t-1) = " +
                   std::to_string(pair_slots);
    return cert;
  }
  const auto lambda = static_cast<int>(cert.lambda);
  for (std::size_t k = 0; k < cert.pair_counts.size(); ++k) {
    const Eigen::MatrixXi& table = cert.pair_counts[k];
    for (int a = 0; a < d.t; ++a) {
      for (int b = 0; b < d.t; ++b) {
        const int expected = (a == b) ? 0 : lambda;
        if (table(a, b) != expected) {
          cert.passed = false;
          cert.witness = "rows (" + std::to_string(cert.row_pairs[k].first) + "," +
                         std::to_string(cert.row_pairs[k].second) + "): ordered symbol pair (" +
                         std::to_string(a + 1) + "," + std::to_string(b + 1) + ") appears " +
                         std::to_string(table(a, b)) + " times, expected " +
                         std::to_string(expected);
          return cert;
        }
      }
    }
  }
  cert.passed = true;
  return cert;
}

CrossoverDesign construct_oa_all_permutations(int t, std::uint64_t cap) {
  if (t < 3) raise(errc::bad_parameter, "orthogonal-array construction requires t >= 3");
  const std::uint64_t count = factorial(t);
  if (count > cap) {
    raise(errc::cap_exceeded, "t! = " + std::to_string(count) + " columns exceed the cap of " +
                                  std::to_string(cap));
  }
  CrossoverDesign d;
  d.t = t;
  d.p = t;
  d.n = static_cast<int>(count);
  d.labels = numeric_labels(t);
  d.assignment.resize(static_cast<std::size_t>(d.p) * d.n);
  for (std::uint64_t rank = 0; rank < count; ++rank) {
    const std::vector<int> perm = unrank_permutation(t, rank);
    for (int i = 0; i < t; ++i) d.treatment(i, static_cast<int>(rank)) = perm[i];
  }
  return d;
}

CrossoverDesign construct_oa_modular(int t) {
  if (t < 3) raise(errc::bad_parameter, "orthogonal-array construction requires t >= 3");
  for (int q = 2; q * q <= t; ++q) {
    if (t % q == 0) {
      raise(errc::not_prime, "t = " + std::to_string(t) +
                                 " is composite; the modular construction needs a prime");
    }
  }
  CrossoverDesign d;
  d.t = t;
  d.p = t;
  d.n = t * (t - 1);
  d.labels = numeric_labels(t);
  d.assignment.resize(static_cast<std::size_t>(d.p) * d.n);
  int column = 0;
  for (int b = 1; b < t; ++b) {
    for (int c = 0; c < t; ++c, ++column) {
      for (int i = 0; i < t; ++i) {
        d.treatment(i, column) = (c + i * b) % t + 1;
      }
    }
  }
  return d;
}

double trace_criterion(const CrossoverDesign& d, const WithinSubjectCovariance& cov, int g) {
  return information_matrix(d, cov, g).trace();
}

namespace {

// Orthonormal basis of the orthocomplement of 1_t (Helmert contrasts).
Eigen::MatrixXd helmert_basis(int t) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(t, t - 1);
  for (int k = 0; k < t - 1; ++k) {
    const double norm = std::sqrt(static_cast<double>(k + 1) * (k + 2));
    for (int i = 0; i <= k; ++i) B(i, k) = 1.0 / norm;
    B(k + 1, k) = -static_cast<double>(k + 1) / norm;
  }
  return B;
}

// Per-permutation precomputation for the exhaustive search. C22 always
// annihilates 1_t, so its pseudoinverse is taken on the Helmert-deflated
// (t-1)-dimensional restriction.
class TraceEvaluator {
 public:
  TraceEvaluator(int t, int n, const WithinSubjectCovariance& cov)
      : t_(t),
        n_(n),
        inv_n_(1.0 / static_cast<double>(n)),
        Vs_(cov.V_star),
        basis_(helmert_basis(t)) {
    const Eigen::MatrixXd psi = shift_matrix(t);
    const std::uint64_t count = factorial(t);
    tb_.reserve(count);
    fb_.reserve(count);
    g11_.reserve(count);
    g12_.reserve(count);
    g22_.reserve(count);
    for (std::uint64_t rank = 0; rank < count; ++rank) {
      const std::vector<int> perm = unrank_permutation(t, rank);
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(t, t);
      for (int i = 0; i < t; ++i) T(i, perm[i] - 1) = 1.0;
      const Eigen::MatrixXd F = psi * T;
      g11_.push_back(T.transpose() * Vs_ * T);
      g12_.push_back(T.transpose() * Vs_ * F);
      g22_.push_back(F.transpose() * Vs_ * F);
      tb_.push_back(std::move(T));
      fb_.push_back(F);
    }
    c11_.resize(t, t);
    c12_.resize(t, t);
    c22_.resize(t, t);
    sumT_.resize(t, t);
    sumF_.resize(t, t);
  }

  double block_trace(const std::vector<std::uint64_t>& ranks) {
    c11_.setZero();
    c12_.setZero();
    c22_.setZero();
    sumT_.setZero();
    sumF_.setZero();
    for (const std::uint64_t rank : ranks) {
      c11_ += g11_[rank];
      c12_ += g12_[rank];
      c22_ += g22_[rank];
      sumT_ += tb_[rank];
      sumF_ += fb_[rank];
    }
    const Eigen::MatrixXd VsT = Vs_ * sumT_;
    const Eigen::MatrixXd VsF = Vs_ * sumF_;
    c11_.noalias() -= inv_n_ * sumT_.transpose() * VsT;
    c12_.noalias() -= inv_n_ * sumT_.transpose() * VsF;
    c22_.noalias() -= inv_n_ * sumF_.transpose() * VsF;

    const Eigen::MatrixXd M = basis_.transpose() * c22_ * basis_;
    const Eigen::MatrixXd W = c12_ * basis_;
    solver_.compute(M);
    const Eigen::VectorXd& values = solver_.eigenvalues();
    const double max_abs = values.cwiseAbs().maxCoeff();
    double adjustment = 0.0;
    if (max_abs > 0.0) {
      const double cutoff = t_ * std::numeric_limits<double>::epsilon() * max_abs;
      const Eigen::MatrixXd WU = W * solver_.eigenvectors();
      for (int k = 0; k < t_ - 1; ++k) {
        if (std::abs(values[k]) > cutoff) {
          adjustment += WU.col(k).squaredNorm() / values[k];
        }
      }
    }
    return c11_.trace() - adjustment;
  }

 private:
  int t_;
  int n_;
  double inv_n_;
  Eigen::MatrixXd Vs_;
  Eigen::MatrixXd basis_;
  std::vector<Eigen::MatrixXd> tb_, fb_, g11_, g12_, g22_;
  Eigen::MatrixXd c11_, c12_, c22_, sumT_, sumF_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver_;
};

struct WorkerRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

std::vector<WorkerRange> partition(std::uint64_t total, int workers) {
  std::vector<WorkerRange> ranges;
  const std::uint64_t chunk = total / workers;
  std::uint64_t remainder = total % workers;
  std::uint64_t begin = 0;
  for (int w = 0; w < workers; ++w) {
    std::uint64_t size = chunk + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
    ranges.push_back({begin, begin + size});
    begin += size;
  }
  return ranges;
}

void run_workers(const std::vector<WorkerRange>& ranges,
                 const std::function<void(int, const WorkerRange&)>& body) {
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(ranges.size());
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    threads.emplace_back([&, w] {
      try {
        body(static_cast<int>(w), ranges[w]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& thread : threads) thread.join();
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

std::optional<CrossoverDesign> reference_oa(int t, int n, std::uint64_t cap) {
  if (t < 3) return std::nullopt;
  const std::uint64_t pair_slots =
      static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(t - 1);
  if (n <= 0 || static_cast<std::uint64_t>(n) % pair_slots != 0) return std::nullopt;
  const std::uint64_t lambda = static_cast<std::uint64_t>(n) / pair_slots;
  bool prime = true;
  for (int q = 2; q * q <= t; ++q) {
    if (t % q == 0) prime = false;
  }
  if (prime) {
    return replicate_subjects(construct_oa_modular(t), static_cast<int>(lambda));
  }
  const std::uint64_t base_lambda = factorial(t - 2);
  if (lambda % base_lambda != 0 || factorial(t) > cap) return std::nullopt;
  return replicate_subjects(construct_oa_all_permutations(t, cap),
                            static_cast<int>(lambda / base_lambda));
}

}  // namespace

SearchResult search_max_trace(int t, int n, const WithinSubjectCovariance& cov,
                              const SearchOptions& options) {
  if (cov.p() != t) {
    raise(errc::dimension_mismatch, "search over p = t = " + std::to_string(t) +
                                        " needs a matching covariance, got p = " +
                                        std::to_string(cov.p()));
  }
  if (options.g < 1) raise(errc::bad_parameter, "g must be >= 1");
  const std::uint64_t total = binary_design_count(t, n, options.cap);

  int workers = options.workers > 0
                    ? options.workers
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(workers), total));
  const std::vector<WorkerRange> ranges = partition(total, workers);

  // phase one: the maximum block trace
  std::vector<double> local_best(ranges.size(), -std::numeric_limits<double>::infinity());
  run_workers(ranges, [&](int w, const WorkerRange& range) {
    TraceEvaluator evaluator(t, n, cov);
    BinaryDesignEnumerator en(t, n, range.first, range.last);
    double best = -std::numeric_limits<double>::infinity();
    while (en.next() != nullptr) {
      best = std::max(best, evaluator.block_trace(en.column_ranks()));
    }
    local_best[w] = best;
  });
  const double best_block = *std::max_element(local_best.begin(), local_best.end());
  const double threshold = best_block - options.tie_rel_tol * std::abs(best_block);

  // phase two: collect tied designs in enumeration order
  std::vector<std::vector<CrossoverDesign>> local_ties(ranges.size());
  std::vector<std::uint64_t> local_tie_count(ranges.size(), 0);
  run_workers(ranges, [&](int w, const WorkerRange& range) {
    TraceEvaluator evaluator(t, n, cov);
    BinaryDesignEnumerator en(t, n, range.first, range.last);
    while (const CrossoverDesign* d = en.next()) {
      if (evaluator.block_trace(en.column_ranks()) >= threshold) {
        ++local_tie_count[w];
        if (local_ties[w].size() < options.argmax_cap) local_ties[w].push_back(*d);
      }
    }
  });

  SearchResult result;
  result.evaluated_count = total;
  result.best_trace = options.g * best_block;
  std::uint64_t total_ties = 0;
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    total_ties += local_tie_count[w];
    for (auto& d : local_ties[w]) {
      if (result.argmax_designs.size() >= options.argmax_cap) break;
      result.argmax_designs.push_back(std::move(d));
    }
  }
  result.argmax_truncated = total_ties > options.argmax_cap;

  if (auto oa = reference_oa(t, n, options.cap)) {
    const OACertificate cert = verify_oa(*oa);
    if (cert.passed) {
      const double oa_trace = information_matrix(*oa, cov, 1).block.trace();
      result.oa_attains_max =
          std::abs(oa_trace - best_block) <= options.tie_rel_tol * std::abs(best_block);
    }
  }
  return result;
}

double efficiency(const CrossoverDesign& d, const CrossoverDesign& d_star,
                  const WithinSubjectCovariance& cov, int g) {
  if (d.t != d_star.t || d.n != d_star.n || d.p != d_star.p) {
    raise(errc::dimension_mismatch,
          "efficiency compares designs sharing (t, n, p); got (" + std::to_string(d.t) + "," +
              std::to_string(d.n) + "," + std::to_string(d.p) + ") vs (" +
              std::to_string(d_star.t) + "," + std::to_string(d_star.n) + "," +
              std::to_string(d_star.p) + ")");
  }
  const double reference = trace_criterion(d_star, cov, g);
  if (!(reference > 1e-12)) {
    raise(errc::degenerate_reference,
          "reference design trace " + std::to_string(reference) + " is not positive");
  }
  return trace_criterion(d, cov, g) / reference;
}

void default_grid(CovKind family, double& r_min, double& r_max, double& step) {
  switch (family) {
    case CovKind::ar1:
      r_min = -0.99;
      r_max = 0.99;
      step = 0.01;
      return;
    case CovKind::tridiagonal:
      r_min = -0.70;
      r_max = 0.70;
      step = 0.01;
      return;
    default:
      raise(errc::bad_grid, "efficiency curves are defined for the ar1 and tridiag families");
  }
}

EfficiencyCurve efficiency_curve(const CrossoverDesign& d, const CrossoverDesign& d_star,
                                 CovKind family, double r_min, double r_max, double step,
                                 int g) {
  if (family != CovKind::ar1 && family != CovKind::tridiagonal) {
    raise(errc::bad_grid, "efficiency curves are defined for the ar1 and tridiag families");
  }
  if (!(step > 0.0)) raise(errc::bad_grid, "step must be positive");
  if (r_max < r_min) raise(errc::bad_grid, "r_max is below r_min");

  const auto points = static_cast<std::int64_t>(
      std::floor((r_max - r_min) / step + 1e-9)) + 1;
  EfficiencyCurve curve;
  curve.family = family;
  curve.points.reserve(static_cast<std::size_t>(points));
  for (std::int64_t i = 0; i < points; ++i) {
    const double r = r_min + static_cast<double>(i) * step;
    WithinSubjectCovariance cov;
    try {
      cov = build_V(family == CovKind::ar1 ? CovarianceSpec::ar1(r, d.p)
                                           : CovarianceSpec::tridiagonal(r, d.p));
    } catch (const Error& e) {
      if (e.code() == errc::bad_parameter || e.code() == errc::not_positive_definite) {
        raise(errc::bad_grid, "grid point r = " + std::to_string(r) +
                                  " is outside the family's validity interval (" + e.what() + ")");
      }
      throw;
    }
    CurvePoint point;
    point.r = r;
    point.trace_d = trace_criterion(d, cov, g);
    point.trace_dstar = trace_criterion(d_star, cov, g);
    if (!(point.trace_dstar > 1e-12)) {
      raise(errc::degenerate_reference, "reference trace vanished at r = " + std::to_string(r));
    }
    point.efficiency = point.trace_d / point.trace_dstar;
    curve.points.push_back(point);
  }
  const auto best = std::max_element(
      curve.points.begin(), curve.points.end(),
      [](const CurvePoint& a, const CurvePoint& b) { return a.efficiency < b.efficiency; });
  curve.e_max = best->efficiency;
  curve.argmax_r = best->r;
  return curve;
}

std::string curve_to_csv(const EfficiencyCurve& curve) {
  std::string out = "r,trace_d,trace_dstar,efficiency\n";
  char line[160];
  for (const CurvePoint& point : curve.points) {
    std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g\n", point.r, point.trace_d,
                  point.trace_dstar, point.efficiency);
    out += line;
  }
  return out;
}

std::vector<Eigen::MatrixXd> permutation_matrices(int t) {
  if (t < 1 || t > 8) {
    raise(errc::bad_parameter, "permutation-matrix enumeration supports 1 <= t <= 8");
  }
  const std::uint64_t count = factorial(t);
  std::vector<Eigen::MatrixXd> matrices;
  matrices.reserve(count);
  for (std::uint64_t rank = 0; rank < count; ++rank) {
    const std::vector<int> perm = unrank_permutation(t, rank);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(t, t);
    for (int i = 0; i < t; ++i) Q(i, perm[i] - 1) = 1.0;
    matrices.push_back(std::move(Q));
  }
  return matrices;
}

DecompositionReport verify_decomposition(const CrossoverDesign& d,
                                         const CrossoverDesign& d_star,
                                         const WithinSubjectCovariance& cov) {
  if (d.t != d_star.t) {
    raise(errc::dimension_mismatch, "decomposition compares designs with equal t");
  }
  const Eigen::MatrixXd Cd = information_matrix(d, cov, 1).block;
  const Eigen::MatrixXd Cs = information_matrix(d_star, cov, 1).block;
  const int t = d.t;
  const double trace_d = Cd.trace();
  if (!(trace_d > 1e-12 * std::max(1.0, Cd.cwiseAbs().maxCoeff()))) {
    raise(errc::zero_trace, "candidate information matrix is zero; decomposition undefined");
  }
  const double c_d = Cs.trace() / (static_cast<double>(factorial(t)) * trace_d);

  Eigen::MatrixXd conjugation_sum = Eigen::MatrixXd::Zero(t, t);
  const std::vector<Eigen::MatrixXd> perms = permutation_matrices(t);
  for (const Eigen::MatrixXd& Q : perms) {
    conjugation_sum.noalias() += Q * Cd * Q.transpose();
  }

  DecompositionReport report;
  report.c_d = c_d;
  report.residual = (Cs - c_d * conjugation_sum).cwiseAbs().maxCoeff();

  // g = 2 lift with P = I_2 ⊗ Q and the same scalars
  const int two_t = 2 * t;
  Eigen::MatrixXd Cd2 = Eigen::MatrixXd::Zero(two_t, two_t);
  Eigen::MatrixXd Cs2 = Eigen::MatrixXd::Zero(two_t, two_t);
  Cd2.topLeftCorner(t, t) = Cd;
  Cd2.bottomRightCorner(t, t) = Cd;
  Cs2.topLeftCorner(t, t) = Cs;
  Cs2.bottomRightCorner(t, t) = Cs;
  Eigen::MatrixXd lift_sum = Eigen::MatrixXd::Zero(two_t, two_t);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(two_t, two_t);
  for (const Eigen::MatrixXd& Q : perms) {
    P.setZero();
    P.topLeftCorner(t, t) = Q;
    P.bottomRightCorner(t, t) = Q;
    lift_sum.noalias() += P * Cd2 * P.transpose();
  }
  report.residual_lift_g2 = (Cs2 - c_d * lift_sum).cwiseAbs().maxCoeff();
  return report;
}

}  // namespace xover
