#include "canonlift/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "canonlift/rng.hpp"

namespace canonlift::diff {

namespace {

struct Evaluation {
  double value = 0.0;
  bool finite = true;
};

Evaluation evaluate(const TapeProgram& program, const std::vector<Buffer<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& b : inputs) vars.push_back(tape.constant(b));
  Var out = program(tape, vars);
  const auto& v = tape.value(out);
  if (v.size() != 1) throw std::invalid_argument("grad_check: program must return a scalar");
  return {v[0], std::isfinite(v[0])};
}

}  // namespace

std::string_view to_string(GradCheckStatus s) {
  switch (s) {
    case GradCheckStatus::Pass: return "pass";
    case GradCheckStatus::Fail: return "FAIL";
    case GradCheckStatus::ExpectedMismatch: return "expected-mismatch";
    case GradCheckStatus::Kink: return "kink";
    case GradCheckStatus::NonFinite: return "non-finite";
  }
  return "?";
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const TapeProgram& program, std::vector<Buffer<double>> inputs,
                           const GradCheckOptions& options) {
  Rng rng(options.seed);
  GradCheckReport report;
  for (int attempt = 0;; ++attempt) {
    report = GradCheckReport{};
    report.kink_retries = attempt;

    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& b : inputs) vars.push_back(tape.input(b));
    Var loss = program(tape, vars);
    report.has_stop_gradient = tape.stop_gradient_count() > 0;
    const double f0 = tape.value(loss).size() == 1 ? tape.value(loss)[0] : NAN;
    if (!std::isfinite(f0)) {
      report.status = GradCheckStatus::NonFinite;
      return report;
    }
    tape.backward(loss);

    bool kink = false;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto analytic = tape.grad(vars[i]);
      for (std::size_t j = 0; j < inputs[i].size(); ++j) {
        const double a = analytic.empty() ? 0.0 : analytic[j];
        const double x0 = inputs[i][j];
        inputs[i][j] = x0 + options.step;
        const Evaluation fp = evaluate(program, inputs);
        inputs[i][j] = x0 - options.step;
        const Evaluation fm = evaluate(program, inputs);
        inputs[i][j] = x0;
        ++report.coordinates;
        if (!fp.finite || !fm.finite || !std::isfinite(a)) {
          report.status = GradCheckStatus::NonFinite;
          report.failures.push_back({i, j, a, NAN});
          return report;
        }
        const double numeric = (fp.value - fm.value) / (2.0 * options.step);
        const double err = relative_error(a, numeric, options.error_floor);
        if (err <= options.tolerance) {
          report.max_rel_error = std::max(report.max_rel_error, err);
          continue;
        }
        const double fwd = (fp.value - f0) / options.step;
        const double bwd = (f0 - fm.value) / options.step;
        if (std::abs(fwd - bwd) >
            options.kink_threshold * std::max({1.0, std::abs(fwd), std::abs(bwd)})) {
          kink = true;
          continue;
        }
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.failures.push_back({i, j, a, numeric});
      }
    }

    if (!report.failures.empty()) {
      report.status = report.has_stop_gradient ? GradCheckStatus::ExpectedMismatch
                                               : GradCheckStatus::Fail;
      return report;
    }
    if (!kink) {
      report.status = GradCheckStatus::Pass;
      return report;
    }
    if (attempt >= options.max_retries) {
      report.status = GradCheckStatus::Kink;
      return report;
    }
    for (auto& b : inputs) {
      for (auto& v : b.data) v += rng.uniform(-options.perturbation, options.perturbation);
    }
  }
}

}  // namespace canonlift::diff
