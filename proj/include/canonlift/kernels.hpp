#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>

namespace canonlift::kernels {

/// Worker count for the OpenMP kernels. 1 selects the serial reference path,
/// which every determinism test compares against.
void set_num_threads(int n);
int num_threads();

enum class Exec { Serial, Parallel };
Exec default_exec();

/// Runs body(i) for i in [0, n): in order when serial, statically
/// partitioned across the workers otherwise. Bodies must write disjoint data.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  Exec exec = default_exec());

/// Per-axis trilinear footprint of a point in a C-cell unit grid centred at
/// the origin. The point is clamped into [-0.5 + h/2, 0.5 - h/2]; clamped
/// axes carry zero derivative.
struct AxisStencil {
  std::array<std::size_t, 2> index{};
  std::array<double, 2> weight{};
  std::array<double, 2> dweight{};  // d weight / d x
  int count = 0;
};

AxisStencil axis_stencil(int cells, double x);

struct Stencil {
  std::array<AxisStencil, 3> axis;
  /// Cell index of corner (a, b, c) in (i*C + j)*C + k order.
  std::size_t cell(int cells, int a, int b, int c) const {
    const auto C = static_cast<std::size_t>(cells);
    return (axis[0].index[a] * C + axis[1].index[b]) * C + axis[2].index[c];
  }
};

Stencil trilinear_stencil(int cells, double x, double y, double z);

/// True when every coordinate lies in [-0.5, 0.5].
bool inside_extent(double x, double y, double z);

// y[n, out] = x[n, in] * W[in, out] + b[out]
template <typename T>
void dense_forward(std::span<const T> x, std::size_t rows, std::size_t in,
                   std::span<const T> W, std::size_t out, std::span<const T> b, std::span<T> y,
                   Exec exec);

// Accumulates dx (if non-empty), dW, db from dy.
template <typename T>
void dense_backward(std::span<const T> x, std::size_t rows, std::size_t in,
                    std::span<const T> W, std::size_t out, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dW, std::span<T> db, Exec exec);

/// grid[cell, e] += scale[m] * w_cell(point[m]) * values[m, e]
template <typename T>
void splat(int cells, std::size_t channels, std::span<const T> points,
           std::span<const T> values, std::span<const T> scales, std::span<T> grid, Exec exec);

/// Adjoint of splat given dL/dgrid. Output spans may be empty to skip them.
template <typename T>
void splat_backward(int cells, std::size_t channels, std::span<const T> points,
                    std::span<const T> values, std::span<const T> scales,
                    std::span<const T> grid_grad, std::span<T> points_grad,
                    std::span<T> values_grad, std::span<T> scales_grad, Exec exec);

/// out[m, e] = sum_cell w_cell(point[m]) grid[cell, e]; zero outside the extent.
template <typename T>
void sample(int cells, std::size_t channels, std::span<const T> grid, std::span<const T> points,
            std::span<T> out, Exec exec);

/// Adjoint of sample given dL/dout. Output spans may be empty to skip them.
template <typename T>
void sample_backward(int cells, std::size_t channels, std::span<const T> grid,
                     std::span<const T> points, std::span<const T> out_grad,
                     std::span<T> grid_grad, std::span<T> points_grad, Exec exec);

}  // namespace canonlift::kernels
