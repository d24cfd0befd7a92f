#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "canonlift/diff/buffer.hpp"
#include "canonlift/rng.hpp"

namespace canonlift::testing {

inline Eigen::Vector3d random_point(Rng& rng, double half = 0.5) {
  return {rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)};
}

inline diff::Buffer<double> random_buffer(Rng& rng, diff::Shape shape, double lo = -1.0,
                                          double hi = 1.0) {
  diff::Buffer<double> b(std::move(shape));
  for (auto& v : b.data) v = rng.uniform(lo, hi);
  return b;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace canonlift::testing
