#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "canonlift/diff/gradcheck.hpp"

namespace canonlift {

/// A registered differentiable op: builds random f64 inputs for a seed and
/// reduces the op's output to a scalar with random weights.
struct GradCheckCase {
  std::string name;
  std::function<diff::GradCheckReport(std::uint64_t seed, const diff::GradCheckOptions&)> run;
};

std::vector<GradCheckCase> gradcheck_cases();

struct GradCheckSummary {
  std::string name;
  int seeds = 0;
  int passed = 0;
  double max_rel_error = 0.0;
  /// Status of the first non-passing seed, or Pass.
  diff::GradCheckStatus worst = diff::GradCheckStatus::Pass;
  std::uint64_t first_failing_seed = 0;
  double seconds = 0.0;

  bool ok() const { return passed == seeds; }
};

/// Runs every case whose name contains `filter` (empty = all) for seeds
/// 0..seeds-1.
std::vector<GradCheckSummary> run_gradcheck_suite(int seeds, const diff::GradCheckOptions& options,
                                                  const std::string& filter = {});

}  // namespace canonlift
