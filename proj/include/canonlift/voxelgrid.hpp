#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "canonlift/diff/tape.hpp"

namespace canonlift {

/// C^3 cells over the unit cube [-0.5, 0.5]^3, D channels per cell.
/// Cell (i, j, k) has index (i*C + j)*C + k with i along x, j along y, k
/// along z; channels are the fastest axis.
struct GridSpec {
  int cells = 16;
  int feature_dim = 8;

  double cell_size() const { return 1.0 / cells; }
  double cell_center(int i) const { return -0.5 + (i + 0.5) * cell_size(); }
  std::size_t voxel_count() const {
    const auto c = static_cast<std::size_t>(cells);
    return c * c * c;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * cells + j) * cells + k;
  }
  Eigen::Vector3d center(std::size_t cell) const;
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

struct CellWeight {
  std::size_t cell = 0;
  double weight = 0.0;
};

/// Non-zero trilinear weights of x (clamped into the interior band).
std::vector<CellWeight> splat_weights(const GridSpec& spec, const Eigen::Vector3d& x);

template <typename T>
struct FeatureGrid {
  GridSpec spec;
  std::vector<T> values;

  FeatureGrid() = default;
  explicit FeatureGrid(GridSpec s)
      : spec(s), values(s.voxel_count() * static_cast<std::size_t>(s.feature_dim), T{0}) {}
  FeatureGrid(GridSpec s, std::vector<T> v);

  std::size_t channels() const { return static_cast<std::size_t>(spec.feature_dim); }
  std::span<T> cell(std::size_t c) { return {values.data() + c * channels(), channels()}; }
  std::span<const T> cell(std::size_t c) const {
    return {values.data() + c * channels(), channels()};
  }
};

/// Scalar splat mass per cell (a FeatureGrid with one channel).
template <typename T>
using WeightGrid = FeatureGrid<T>;

/// Adds scale * w_cell * f into the cells around x. Rejects non-finite f.
template <typename T>
void splat(FeatureGrid<T>& grid, const Eigen::Vector3d& x, std::span<const T> f, T scale);

/// Trilinear interpolation at x; zeros outside the cube.
template <typename T>
std::vector<T> sample(const FeatureGrid<T>& grid, const Eigen::Vector3d& x);

// Tape ops. Points are [M, 3] rows of canonical coordinates.

/// Scatters values[M, E] * scales[M] into a [C^3, E] grid.
template <typename T>
diff::Var splat_points(diff::Tape<T>& tape, int cells, diff::Var points, diff::Var values,
                       diff::Var scales);

/// Gathers [M, E] trilinear samples from a [C^3, E] grid.
template <typename T>
diff::Var sample_points(diff::Tape<T>& tape, int cells, diff::Var grid, diff::Var points);

/// [C^3, E] -> [C^3, 2E]: each cell's own channels followed by the mean over
/// its in-bounds face neighbours.
template <typename T>
diff::Var neighbor_concat(diff::Tape<T>& tape, int cells, diff::Var grid);

/// "CVGF" grid file: magic, version u32, C u32, D u32, dtype u8 (0 = f32),
/// then the little-endian payload in cell-major, channel-fastest order.
std::vector<std::uint8_t> encode_grid(const FeatureGrid<float>& grid);
FeatureGrid<float> decode_grid(std::vector<std::uint8_t> bytes);
void write_grid(const std::filesystem::path& path, const FeatureGrid<float>& grid);
FeatureGrid<float> read_grid(const std::filesystem::path& path);

}  // namespace canonlift
