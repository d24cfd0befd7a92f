#include "canonlift/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include <omp.h>

namespace canonlift::kernels {

namespace {

std::atomic<int> g_threads{1};

// Per-thread scratch grids reduced in ascending thread order, so a given
// thread count always produces the same bits.
template <typename T, typename Body>
void scatter_parallel(std::size_t count, std::span<T> target, Body body) {
  const int threads = std::max(1, g_threads.load());
  std::vector<std::vector<T>> partial(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
  {
    const int tid = omp_get_thread_num();
    auto& local = partial[static_cast<std::size_t>(tid)];
    local.assign(target.size(), T{0});
#pragma omp for schedule(static)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(count); ++m) {
      body(static_cast<std::size_t>(m), std::span<T>(local));
    }
  }
  for (const auto& local : partial) {
    if (local.empty()) continue;
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += local[i];
  }
}

template <typename Body>
void for_each_index(std::size_t count, Exec exec, Body body) {
  if (exec == Exec::Serial) {
    for (std::size_t m = 0; m < count; ++m) body(m);
    return;
  }
  const int threads = std::max(1, g_threads.load());
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(count); ++m) {
    body(static_cast<std::size_t>(m));
  }
}

template <typename T>
void splat_point(int cells, std::size_t channels, const T* p, const T* value, T scale,
                 std::span<T> grid) {
  const Stencil s = trilinear_stencil(cells, p[0], p[1], p[2]);
  for (int a = 0; a < s.axis[0].count; ++a) {
    for (int b = 0; b < s.axis[1].count; ++b) {
      for (int c = 0; c < s.axis[2].count; ++c) {
        const double w = s.axis[0].weight[a] * s.axis[1].weight[b] * s.axis[2].weight[c];
        if (w == 0.0) continue;
        const T ws = static_cast<T>(w) * scale;
        T* dst = grid.data() + s.cell(cells, a, b, c) * channels;
        for (std::size_t e = 0; e < channels; ++e) dst[e] += ws * value[e];
      }
    }
  }
}

// Shared corner walk for the two adjoints: calls fn(cell, w, dw[3]).
template <typename Fn>
void walk_corners(int cells, const Stencil& s, Fn fn) {
  for (int a = 0; a < s.axis[0].count; ++a) {
    for (int b = 0; b < s.axis[1].count; ++b) {
      for (int c = 0; c < s.axis[2].count; ++c) {
        const double wa = s.axis[0].weight[a], wb = s.axis[1].weight[b],
                     wc = s.axis[2].weight[c];
        const double w = wa * wb * wc;
        const std::array<double, 3> dw = {s.axis[0].dweight[a] * wb * wc,
                                          wa * s.axis[1].dweight[b] * wc,
                                          wa * wb * s.axis[2].dweight[c]};
        fn(s.cell(cells, a, b, c), w, dw);
      }
    }
  }
}

}  // namespace

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }
int num_threads() { return g_threads.load(); }
Exec default_exec() { return g_threads.load() > 1 ? Exec::Parallel : Exec::Serial; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec) {
  for_each_index(n, exec, body);
}

AxisStencil axis_stencil(int cells, double x) {
  AxisStencil s;
  if (cells <= 1) {
    s.index = {0, 0};
    s.weight = {1.0, 0.0};
    s.count = 1;
    return s;
  }
  const double C = static_cast<double>(cells);
  const double h = 1.0 / C;
  const double lo = -0.5 + 0.5 * h;
  const double hi = 0.5 - 0.5 * h;
  bool clamped = false;
  if (x < lo) {
    x = lo;
    clamped = true;
  } else if (x > hi) {
    x = hi;
    clamped = true;
  }
  const double u = (x + 0.5) * C - 0.5;
  // Clamp in floating point: u may round just below 0 at the lower band edge.
  const double f = std::clamp(std::floor(u), 0.0, C - 2.0);
  const auto i0 = static_cast<std::size_t>(f);
  const double t = std::clamp(u - f, 0.0, 1.0);
  s.index = {i0, i0 + 1};
  s.weight = {1.0 - t, t};
  s.dweight = clamped ? std::array<double, 2>{0.0, 0.0} : std::array<double, 2>{-C, C};
  s.count = 2;
  return s;
}

Stencil trilinear_stencil(int cells, double x, double y, double z) {
  return Stencil{{axis_stencil(cells, x), axis_stencil(cells, y), axis_stencil(cells, z)}};
}

bool inside_extent(double x, double y, double z) {
  return std::abs(x) <= 0.5 && std::abs(y) <= 0.5 && std::abs(z) <= 0.5;
}

template <typename T>
void dense_forward(std::span<const T> x, std::size_t rows, std::size_t in, std::span<const T> W,
                   std::size_t out, std::span<const T> b, std::span<T> y, Exec exec) {
  for_each_index(rows, exec, [&](std::size_t n) {
    T* yr = y.data() + n * out;
    const T* xr = x.data() + n * in;
    for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) {
      const T xi = xr[i];
      const T* wr = W.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
    }
  });
}

template <typename T>
void dense_backward(std::span<const T> x, std::size_t rows, std::size_t in, std::span<const T> W,
                    std::size_t out, std::span<const T> dy, std::span<T> dx, std::span<T> dW,
                    std::span<T> db, Exec exec) {
  if (!dx.empty()) {
    for_each_index(rows, exec, [&](std::size_t n) {
      const T* g = dy.data() + n * out;
      T* d = dx.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) {
        const T* wr = W.data() + i * out;
        T acc{0};
        for (std::size_t o = 0; o < out; ++o) acc += g[o] * wr[o];
        d[i] += acc;
      }
    });
  }
  if (!dW.empty()) {
    for_each_index(in, exec, [&](std::size_t i) {
      T* dwr = dW.data() + i * out;
      for (std::size_t n = 0; n < rows; ++n) {
        const T xi = x[n * in + i];
        if (xi == T{0}) continue;
        const T* g = dy.data() + n * out;
        for (std::size_t o = 0; o < out; ++o) dwr[o] += xi * g[o];
      }
    });
  }
  if (!db.empty()) {
    for (std::size_t n = 0; n < rows; ++n) {
      const T* g = dy.data() + n * out;
      for (std::size_t o = 0; o < out; ++o) db[o] += g[o];
    }
  }
}

template <typename T>
void splat(int cells, std::size_t channels, std::span<const T> points, std::span<const T> values,
           std::span<const T> scales, std::span<T> grid, Exec exec) {
  const std::size_t count = scales.size();
  if (exec == Exec::Serial) {
    for (std::size_t m = 0; m < count; ++m) {
      splat_point(cells, channels, points.data() + 3 * m, values.data() + channels * m,
                  scales[m], grid);
    }
    return;
  }
  scatter_parallel<T>(count, grid, [&](std::size_t m, std::span<T> local) {
    splat_point(cells, channels, points.data() + 3 * m, values.data() + channels * m,
                scales[m], local);
  });
}

template <typename T>
void splat_backward(int cells, std::size_t channels, std::span<const T> points,
                    std::span<const T> values, std::span<const T> scales,
                    std::span<const T> grid_grad, std::span<T> points_grad,
                    std::span<T> values_grad, std::span<T> scales_grad, Exec exec) {
#ifdef CANONLIFT_MUTATE_SPLAT_ADJOINT
  constexpr double kPointSign = -1.0;
#else
  constexpr double kPointSign = 1.0;
#endif
  for_each_index(scales.size(), exec, [&](std::size_t m) {
    const T* p = points.data() + 3 * m;
    const T* v = values.data() + channels * m;
    const T scale = scales[m];
    const Stencil s = trilinear_stencil(cells, p[0], p[1], p[2]);
    double dscale = 0.0;
    std::array<double, 3> dpoint{0.0, 0.0, 0.0};
    walk_corners(cells, s, [&](std::size_t cell, double w, const std::array<double, 3>& dw) {
      const T* g = grid_grad.data() + cell * channels;
      double gv = 0.0;
      for (std::size_t e = 0; e < channels; ++e) gv += static_cast<double>(g[e]) * v[e];
      dscale += w * gv;
      for (int d = 0; d < 3; ++d) dpoint[static_cast<std::size_t>(d)] += dw[static_cast<std::size_t>(d)] * gv;
      if (!values_grad.empty() && w != 0.0) {
        T* dv = values_grad.data() + channels * m;
        const T ws = static_cast<T>(w) * scale;
        for (std::size_t e = 0; e < channels; ++e) dv[e] += ws * g[e];
      }
    });
    if (!scales_grad.empty()) scales_grad[m] += static_cast<T>(dscale);
    if (!points_grad.empty()) {
      for (std::size_t d = 0; d < 3; ++d) {
        points_grad[3 * m + d] += static_cast<T>(kPointSign * dpoint[d] * scale);
      }
    }
  });
}

template <typename T>
void sample(int cells, std::size_t channels, std::span<const T> grid, std::span<const T> points,
            std::span<T> out, Exec exec) {
  for_each_index(points.size() / 3, exec, [&](std::size_t m) {
    const T* p = points.data() + 3 * m;
    T* o = out.data() + channels * m;
    std::fill(o, o + channels, T{0});
    if (!inside_extent(p[0], p[1], p[2])) return;
    const Stencil s = trilinear_stencil(cells, p[0], p[1], p[2]);
    walk_corners(cells, s, [&](std::size_t cell, double w, const std::array<double, 3>&) {
      if (w == 0.0) return;
      const T* g = grid.data() + cell * channels;
      const T wt = static_cast<T>(w);
      for (std::size_t e = 0; e < channels; ++e) o[e] += wt * g[e];
    });
  });
}

template <typename T>
void sample_backward(int cells, std::size_t channels, std::span<const T> grid,
                     std::span<const T> points, std::span<const T> out_grad,
                     std::span<T> grid_grad, std::span<T> points_grad, Exec exec) {
  const std::size_t count = points.size() / 3;
  auto scatter_one = [&](std::size_t m, std::span<T> target) {
    const T* p = points.data() + 3 * m;
    if (!inside_extent(p[0], p[1], p[2])) return;
    const T* go = out_grad.data() + channels * m;
    const Stencil s = trilinear_stencil(cells, p[0], p[1], p[2]);
    walk_corners(cells, s, [&](std::size_t cell, double w, const std::array<double, 3>&) {
      if (w == 0.0) return;
      T* dst = target.data() + cell * channels;
      const T wt = static_cast<T>(w);
      for (std::size_t e = 0; e < channels; ++e) dst[e] += wt * go[e];
    });
  };
  if (!grid_grad.empty()) {
    if (exec == Exec::Serial) {
      for (std::size_t m = 0; m < count; ++m) scatter_one(m, grid_grad);
    } else {
      scatter_parallel<T>(count, grid_grad, scatter_one);
    }
  }
  if (points_grad.empty()) return;
  for_each_index(count, exec, [&](std::size_t m) {
    const T* p = points.data() + 3 * m;
    if (!inside_extent(p[0], p[1], p[2])) return;
    const T* go = out_grad.data() + channels * m;
    const Stencil s = trilinear_stencil(cells, p[0], p[1], p[2]);
    std::array<double, 3> dpoint{0.0, 0.0, 0.0};
    walk_corners(cells, s, [&](std::size_t cell, double, const std::array<double, 3>& dw) {
      const T* g = grid.data() + cell * channels;
      double gg = 0.0;
      for (std::size_t e = 0; e < channels; ++e) gg += static_cast<double>(g[e]) * go[e];
      for (std::size_t d = 0; d < 3; ++d) dpoint[d] += dw[d] * gg;
    });
    for (std::size_t d = 0; d < 3; ++d) points_grad[3 * m + d] += static_cast<T>(dpoint[d]);
  });
}

#define CANONLIFT_INSTANTIATE(T)                                                               \
  template void dense_forward<T>(std::span<const T>, std::size_t, std::size_t,                 \
                                 std::span<const T>, std::size_t, std::span<const T>,          \
                                 std::span<T>, Exec);                                          \
  template void dense_backward<T>(std::span<const T>, std::size_t, std::size_t,                \
                                  std::span<const T>, std::size_t, std::span<const T>,         \
                                  std::span<T>, std::span<T>, std::span<T>, Exec);             \
  template void splat<T>(int, std::size_t, std::span<const T>, std::span<const T>,             \
                         std::span<const T>, std::span<T>, Exec);                              \
  template void splat_backward<T>(int, std::size_t, std::span<const T>, std::span<const T>,    \
                                  std::span<const T>, std::span<const T>, std::span<T>,        \
                                  std::span<T>, std::span<T>, Exec);                           \
  template void sample<T>(int, std::size_t, std::span<const T>, std::span<const T>,            \
                          std::span<T>, Exec);                                                 \
  template void sample_backward<T>(int, std::size_t, std::span<const T>, std::span<const T>,   \
                                   std::span<const T>, std::span<T>, std::span<T>, Exec);

CANONLIFT_INSTANTIATE(float)
CANONLIFT_INSTANTIATE(double)

#undef CANONLIFT_INSTANTIATE

}  // namespace canonlift::kernels
