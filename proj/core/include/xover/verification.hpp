#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xover/design.hpp"

namespace xover {

struct SuiteResult {
  std::string name;
  bool passed = false;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyOptions {
  int t = 3;
  std::optional<double> tol;  // overrides every suite's tolerance when set
};

/// Names accepted by run_verification_suites: oracle-equivalence,
/// classification, complete-symmetry, closed-form, ginverse-invariance,
/// decomposition, oa-certification.
std::vector<std::string> verification_suite_names();

/// Runs the numeric invariant suites (all of them, or the subset named in
/// `only`). Each suite reports its worst measured residual against its
/// tolerance; failures are reported, not thrown.
std::vector<SuiteResult> run_verification_suites(
    const VerifyOptions& options = {},
    const std::vector<std::string>& only = {});

/// Uniform binary design (p = t, columns independent uniform permutations)
/// from a deterministic generator; draws map through modulo so results are
/// identical across standard-library implementations.
CrossoverDesign sample_binary_design(int t, int n, std::mt19937_64& rng);

}  // namespace xover
