#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "canonlift/diff/tape.hpp"

namespace canonlift::diff {

/// A scalar-valued program over marked inputs. It must be deterministic:
/// gradient checking re-runs it many times on fresh tapes.
using TapeProgram = std::function<Var(Tape<double>&, std::span<const Var> inputs)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Smallest denominator of the relative error, so gradients at the
  /// round-off level of the central difference are compared absolutely.
  double error_floor = 1e-2;
  /// One-sided differences disagreeing by more than this (relative to
  /// max(1, |fwd|, |bwd|)) mark a non-differentiable point.
  double kink_threshold = 1e-3;
  int max_retries = 4;
  double perturbation = 1e-3;
  std::uint64_t seed = 0;
};

enum class GradCheckStatus {
  Pass,
  Fail,
  /// Mismatch on a program containing stop-gradient nodes, where analytic
  /// and numeric gradients are not supposed to agree.
  ExpectedMismatch,
  /// Still sitting on a kink after all retries.
  Kink,
  NonFinite,
};

std::string_view to_string(GradCheckStatus s);

struct GradMismatch {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  GradCheckStatus status = GradCheckStatus::Pass;
  double max_rel_error = 0.0;
  std::vector<GradMismatch> failures;
  std::size_t coordinates = 0;
  int kink_retries = 0;
  bool has_stop_gradient = false;

  bool passed() const { return status == GradCheckStatus::Pass; }
};

/// Relative error with a max(|a|, |b|, floor) denominator.
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Compares backward() against central differences for every coordinate of
/// every input. On a kink the inputs are perturbed and the check restarts.
GradCheckReport grad_check(const TapeProgram& program, std::vector<Buffer<double>> inputs,
                           const GradCheckOptions& options = {});

}  // namespace canonlift::diff
