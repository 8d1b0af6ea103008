#pragma once

// Randomized property suites behind `cpo verify`. Each trial draws its own
// seed from the suite seed, so a failing seed reproduces one trial.

#include "cpo/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cpo {

struct CheckRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string check;
  double value = 0.0;      // measured quantity (error or slack)
  double threshold = 0.0;  // pass iff value <= threshold
  bool pass = false;
};

/// Descriptive values of one trial, in the suite's column order.
struct TrialRow {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> fields;
  bool pass = false;
};

struct VerifyReport {
  std::string suite;
  std::vector<std::string> columns;
  std::vector<TrialRow> trials;
  std::vector<CheckRecord> records;
  double seconds = 0.0;

  bool ok() const;
  std::vector<std::uint64_t> failing_seeds() const;
  int count(const std::string& check_prefix) const;
  int failures(const std::string& check_prefix) const;
  /// Largest value among records whose check name starts with the prefix.
  double worst(const std::string& check_prefix) const;
};

/// Bound sandwich, state-distribution shift and Pinsker checks on random
/// finite CMDPs (up to 6 states and 3 actions), plus the tightness cases.
VerifyReport verify_theory(int trials, std::uint64_t seed);
/// Closed-form single-constraint solutions against the dual and planar
/// searches, with KKT residuals and feasibility agreement.
VerifyReport verify_solver(int trials, std::uint64_t seed);
/// Log-probability, surrogate, KL gradient and KL Hessian-vector products
/// against central differences.
VerifyReport verify_gradients(int trials, std::uint64_t seed);

VerifyReport run_suite(const std::string& suite, int trials, std::uint64_t seed);

/// One row per trial: trial, seed, the suite's columns, worst_check, pass.
void write_report_csv(std::ostream& os, const VerifyReport& report);
/// One row per individual check: trial, seed, check, value, threshold, pass.
void write_checks_csv(std::ostream& os, const VerifyReport& report);

}  // namespace cpo
