#pragma once

#include <string>
#include <vector>

namespace taskvec {

struct GradCheckResult {
  int checks = 0;
  int failures = 0;
  double max_rel_err = 0.0;
  std::vector<std::string> messages;  // one per failing element

  bool passed() const { return failures == 0; }
};

/// Central finite-difference validation of every tape primitive and the four
/// losses. Each seed rebuilds fresh random instances; an element fails when
/// |analytic - numeric| > tol * max(1, |analytic|, |numeric|).
GradCheckResult run_grad_check(int seeds, double tol = 1e-4);

}  // namespace taskvec
