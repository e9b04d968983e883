#pragma once

#include <string>
#include <vector>

namespace decopt {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
};

// equivalence | counterexamples | gradients | oracles | mixing | all
std::vector<std::string> suite_names();
std::vector<SuiteReport> run_suite(const std::string& name);

// Central-difference check of local_grad at `points` random stacks.
struct GradientCheck {
  std::string family;
  double worst_relative_error = 0.0;
};
std::vector<GradientCheck> finite_difference_checks(int points = 20, double step = 1e-6);

}  // namespace decopt
