#pragma once

#include <map>
#include <string>
#include <vector>

#include "canonlift/diff/buffer.hpp"

namespace canonlift::diff {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct StepReport {
  std::size_t updated = 0;
  std::size_t skipped = 0;  // parameters with a non-finite gradient
};

/// Adaptive-moment update with bias correction. Moment buffers are keyed by
/// parameter name and created on first use.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  StepReport step(ParamStore<T>& params);
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  long steps() const { return steps_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;
  };
  AdamConfig config_;
  std::map<std::string, Moments> moments_;
  long steps_ = 0;
};

}  // namespace canonlift::diff
