#pragma once

// Oracle-equivalence and property checks run by `avshap selftest` and the
// acceptance test binary.

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace avshap::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  // Scratch space for the report-determinism check.
  std::filesystem::path scratch_dir;
  // Informational lines (benchmarks) go here when set.
  std::ostream* info = nullptr;
};

std::vector<CriterionResult> run_all(const Options& options);

CriterionResult exact_matches_brute_force();
CriterionResult shapley_axioms();
CriterionResult estimator_convergence(std::ostream* info);
CriterionResult snr_modality_shift();
CriterionResult metric_identities();
CriterionResult temporal_alignment_shape();
CriterionResult report_determinism(const std::filesystem::path& scratch_dir);

// "PASS [n] name (detail, 0.12 s)" or FAIL.
std::string format_line(const CriterionResult& r);

}  // namespace avshap::selftest
