// Command-line front end: evaluate designs, construct and certify
// orthogonal arrays, run exhaustive trace searches, produce efficiency
// curves, and run the numeric verification suites.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "xover/covariance.hpp"
#include "xover/design.hpp"
#include "xover/errors.hpp"
#include "xover/information.hpp"
#include "xover/matrix_io.hpp"
#include "xover/optimality.hpp"
#include "xover/verification.hpp"
#include "xover/version.hpp"

namespace {

using nlohmann::json;

std::uint64_t enumeration_cap() {
  if (const char* env = std::getenv("XOVER_CAP")) {
    char* end = nullptr;
    const unsigned long long value = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0' || value == 0) {
      xover::raise(xover::errc::bad_parameter,
                   "XOVER_CAP must be a positive integer, got '" + std::string(env) + "'");
    }
    return value;
  }
  return xover::kDefaultEnumerationCap;
}

json design_json(const xover::CrossoverDesign& d) {
  json doc = json::parse(xover::design_to_json(d));
  doc["n"] = d.n;
  doc["p"] = d.p;
  doc["binary"] = d.binary();
  return doc;
}

json matrix_json(const Eigen::MatrixXd& M) { return json::parse(xover::matrix_to_json(M)); }

json classification_json(const xover::MatrixClassReport& rep) {
  return json{{"is_symmetric", rep.is_symmetric},
              {"is_nnd", rep.is_nnd},
              {"zero_row_sums", rep.zero_row_sums},
              {"zero_col_sums", rep.zero_col_sums},
              {"is_completely_symmetric", rep.is_completely_symmetric},
              {"symmetry_residual", rep.symmetry_residual},
              {"nnd_residual", rep.nnd_residual},
              {"row_sum_residual", rep.row_sum_residual},
              {"col_sum_residual", rep.col_sum_residual},
              {"complete_symmetry_residual", rep.complete_symmetry_residual},
              {"tolerance", rep.tolerance},
              {"cs_tolerance", rep.cs_tolerance}};
}

json certificate_json(const xover::OACertificate& cert) {
  json tables = json::array();
  for (std::size_t k = 0; k < cert.pair_counts.size(); ++k) {
    json counts = json::array();
    for (int a = 0; a < cert.t; ++a) {
      json row = json::array();
      for (int b = 0; b < cert.t; ++b) row.push_back(cert.pair_counts[k](a, b));
      counts.push_back(std::move(row));
    }
    tables.push_back(json{{"rows", {cert.row_pairs[k].first, cert.row_pairs[k].second}},
                          {"counts", std::move(counts)}});
  }
  json doc{{"t", cert.t},       {"p", cert.p},           {"n", cert.n},
           {"lambda", cert.lambda}, {"passed", cert.passed}, {"pair_counts", std::move(tables)}};
  if (!cert.witness.empty()) doc["witness"] = cert.witness;
  return doc;
}

void emit_report(const json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    xover::write_text_file(out_path, report.dump(2) + "\n");
  }
}

struct EvaluateArgs {
  std::string design_path, cov, out;
  int g = 1;
};

int run_evaluate(const EvaluateArgs& args) {
  const xover::CrossoverDesign d = xover::load_design(args.design_path);
  const auto cov = xover::build_V(xover::CovarianceSpec::parse(args.cov, d.p));
  const xover::InformationMatrix info = xover::information_matrix(d, cov, args.g);

  json report{{"version", std::string(xover::kVersion)},
              {"config", {{"command", "evaluate"},
                          {"design", args.design_path},
                          {"cov", args.cov},
                          {"g", args.g},
                          {"out", args.out}}},
              {"design", design_json(d)},
              {"g", args.g},
              {"block", matrix_json(info.block)},
              {"trace_full", info.trace()},
              {"classification", classification_json(info.report)}};
  report["oa_certificate"] = d.p == d.t ? certificate_json(xover::verify_oa(d)) : json();
  emit_report(report, args.out);
  return 0;
}

struct ConstructArgs {
  int t = 3;
  std::string method = "all-perms", out;
  int copies = 1;
};

int run_construct(const ConstructArgs& args) {
  xover::CrossoverDesign d;
  if (args.method == "all-perms") {
    d = xover::construct_oa_all_permutations(args.t, enumeration_cap());
  } else if (args.method == "modular") {
    d = xover::construct_oa_modular(args.t);
  } else {
    xover::raise(xover::errc::bad_parameter,
                 "method must be all-perms or modular, got '" + args.method + "'");
  }
  if (args.copies > 1) d = xover::replicate_subjects(d, args.copies);
  const xover::OACertificate cert = xover::verify_oa(d);
  if (!cert.passed) xover::raise(xover::errc::not_an_oa, "construction failed certification");

  std::ostream& info_stream = args.out.empty() ? std::cerr : std::cout;
  info_stream << "lambda = " << cert.lambda << ", n = " << cert.n << "\n";
  if (args.out.empty()) {
    std::cout << xover::design_to_json(d);
  } else {
    xover::save_design(d, args.out);
  }
  return 0;
}

struct SearchArgs {
  int t = 3, n = 1, g = 1, workers = 0;
  std::string cov, out;
};

int run_search(const SearchArgs& args) {
  const auto cov = xover::build_V(xover::CovarianceSpec::parse(args.cov, args.t));
  xover::SearchOptions options;
  options.g = args.g;
  options.workers = args.workers;
  options.cap = enumeration_cap();
  const xover::SearchResult result = xover::search_max_trace(args.t, args.n, cov, options);

  json argmax = json::array();
  for (const auto& d : result.argmax_designs) argmax.push_back(design_json(d));
  json report{{"version", std::string(xover::kVersion)},
              {"config", {{"command", "search"},
                          {"t", args.t},
                          {"n", args.n},
                          {"cov", args.cov},
                          {"g", args.g},
                          {"workers", args.workers},
                          {"cap", options.cap},
                          {"out", args.out}}},
              {"best_trace", result.best_trace},
              {"evaluated_count", result.evaluated_count},
              {"argmax", std::move(argmax)},
              {"argmax_truncated", result.argmax_truncated}};
  report["oa_attains_max"] =
      result.oa_attains_max.has_value() ? json(*result.oa_attains_max) : json();
  emit_report(report, args.out);
  return 0;
}

struct CurveArgs {
  std::string design_path, dstar_path, family = "ar1", out;
  std::optional<double> r_min, r_max, step;
  int g = 1;
};

int run_curve(const CurveArgs& args) {
  const xover::CrossoverDesign d = xover::load_design(args.design_path);
  const xover::CrossoverDesign d_star = xover::load_design(args.dstar_path);
  xover::CovKind family;
  if (args.family == "ar1") {
    family = xover::CovKind::ar1;
  } else if (args.family == "tridiag") {
    family = xover::CovKind::tridiagonal;
  } else {
    xover::raise(xover::errc::bad_grid, "family must be ar1 or tridiag, got '" + args.family + "'");
  }
  double r_min = 0.0, r_max = 0.0, step = 0.0;
  xover::default_grid(family, r_min, r_max, step);
  r_min = args.r_min.value_or(r_min);
  r_max = args.r_max.value_or(r_max);
  step = args.step.value_or(step);

  const xover::EfficiencyCurve curve =
      xover::efficiency_curve(d, d_star, family, r_min, r_max, step, args.g);
  const std::string csv = xover::curve_to_csv(curve);
  if (args.out.empty()) {
    std::cout << csv;
    std::fprintf(stderr, "e_max = %.12g at r = %.12g\n", curve.e_max, curve.argmax_r);
  } else {
    xover::write_text_file(args.out, csv);
    std::printf("e_max = %.12g at r = %.12g\n", curve.e_max, curve.argmax_r);
  }
  return 0;
}

struct VerifyArgs {
  std::vector<std::string> suites;
  int t = 3;
  std::optional<double> tol;
  std::string out;
};

int run_verify(const VerifyArgs& args) {
  xover::VerifyOptions options;
  options.t = args.t;
  options.tol = args.tol;
  const std::vector<xover::SuiteResult> results =
      xover::run_verification_suites(options, args.suites);

  bool all_passed = true;
  json suites = json::array();
  for (const auto& suite : results) {
    all_passed = all_passed && suite.passed;
    std::printf("[%s] %-20s max_residual = %.3g (tol %.3g) %s\n",
                suite.passed ? "PASS" : "FAIL", suite.name.c_str(), suite.max_residual,
                suite.tolerance, suite.detail.c_str());
    suites.push_back(json{{"name", suite.name},
                          {"passed", suite.passed},
                          {"max_residual", suite.max_residual},
                          {"tolerance", suite.tolerance},
                          {"detail", suite.detail}});
  }
  json report{{"version", std::string(xover::kVersion)},
              {"config", {{"command", "verify"},
                          {"t", args.t},
                          {"suites", args.suites},
                          {"tol", args.tol.has_value() ? json(*args.tol) : json()},
                          {"out", args.out}}},
              {"suites", std::move(suites)},
              {"all_passed", all_passed}};
  if (!args.out.empty()) emit_report(report, args.out);
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multivariate crossover designs: information matrices, orthogonal arrays, "
               "trace optimality, efficiency curves"};
  app.require_subcommand(1);

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "information matrix, classification, and certificate for a design");
  evaluate->add_option("--design", ev.design_path, "design file (JSON or CSV)")->required();
  evaluate->add_option("--cov", ev.cov, "identity | ar1:<r> | tridiag:<r> | custom:<csv>")
      ->required();
  evaluate->add_option("--g", ev.g, "response count")->check(CLI::PositiveNumber);
  evaluate->add_option("--out", ev.out, "report path (stdout when omitted)");

  ConstructArgs co;
  CLI::App* construct = app.add_subcommand("construct-oa", "build a certified strength-2 array");
  construct->add_option("--t", co.t, "treatment count (>= 3)")->required();
  construct->add_option("--method", co.method, "all-perms | modular");
  construct->add_option("--copies", co.copies, "column-wise copies (scales lambda)")
      ->check(CLI::PositiveNumber);
  construct->add_option("--out", co.out, "design path (stdout when omitted)");

  SearchArgs se;
  CLI::App* search = app.add_subcommand(
      "search", "exhaustive trace maximization over binary designs with p = t");
  search->add_option("--t", se.t, "treatment count")->required();
  search->add_option("--n", se.n, "subject count")->required();
  search->add_option("--cov", se.cov, "covariance spec")->required();
  search->add_option("--g", se.g, "response count")->check(CLI::PositiveNumber);
  search->add_option("--workers", se.workers, "worker threads (0 = hardware)");
  search->add_option("--out", se.out, "report path (stdout when omitted)");

  CurveArgs cu;
  CLI::App* curve = app.add_subcommand("curve", "efficiency versus correlation parameter");
  curve->add_option("--design", cu.design_path, "candidate design file")->required();
  curve->add_option("--dstar", cu.dstar_path, "reference design file")->required();
  curve->add_option("--family", cu.family, "ar1 | tridiag");
  curve->add_option("--r-min", cu.r_min, "grid start (family default when omitted)");
  curve->add_option("--r-max", cu.r_max, "grid end");
  curve->add_option("--step", cu.step, "grid step");
  curve->add_option("--g", cu.g, "response count")->check(CLI::PositiveNumber);
  curve->add_option("--out", cu.out, "CSV path (stdout when omitted)");

  VerifyArgs ve;
  CLI::App* verify = app.add_subcommand("verify", "run the numeric verification suites");
  verify->add_option("--suite", ve.suites, "suite name (repeatable; all when omitted)");
  verify->add_option("--t", ve.t, "treatment count for generated cases");
  verify->add_option("--tol", ve.tol, "tolerance override for every suite");
  verify->add_option("--out", ve.out, "JSON summary path");

  try {
    app.parse(argc, argv);
    if (evaluate->parsed()) return run_evaluate(ev);
    if (construct->parsed()) return run_construct(co);
    if (search->parsed()) return run_search(se);
    if (curve->parsed()) return run_curve(cu);
    if (verify->parsed()) return run_verify(ve);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0, parse failures are validation errors
  } catch (const xover::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
