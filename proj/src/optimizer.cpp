#include "canonlift/diff/optimizer.hpp"

#include <cmath>

namespace canonlift::diff {

template <typename T>
StepReport Adam<T>::step(ParamStore<T>& params) {
  StepReport report;
  ++steps_;
  for (auto& [name, entry] : params) {
    bool finite = true;
    for (T g : entry.grad.data) {
      if (!std::isfinite(g)) {
        finite = false;
        break;
      }
    }
    if (!finite) {
      ++report.skipped;
      continue;
    }
    auto& mom = moments_[name];
    if (mom.m.size() != entry.value.size()) {
      mom.m.assign(entry.value.size(), 0.0);
      mom.v.assign(entry.value.size(), 0.0);
      mom.t = 0;
    }
    ++mom.t;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(mom.t));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(mom.t));
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double g = entry.grad[i];
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g;
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      entry.value[i] -= static_cast<T>(config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
    ++report.updated;
  }
  return report;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace canonlift::diff
