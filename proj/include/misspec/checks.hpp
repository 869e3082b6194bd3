#pragma once

#include "misspec/experiments.hpp"

#include <functional>
#include <string>
#include <vector>

namespace misspec {

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Set when the check does not apply (e.g. the tilt has no normalizer).
  bool skipped = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Numerical invariants of every module on the instance described by `config`.
/// `report`, when set, is called as each check finishes.
std::vector<CheckResult> run_invariant_checks(const ExperimentConfig& config,
                                              const std::function<void(const CheckResult&)>& report = {});

}  // namespace misspec
