#include "canonlift/voxelgrid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "canonlift/binary_io.hpp"
#include "canonlift/kernels.hpp"

namespace canonlift {

using diff::Buffer;
using diff::Shape;
using diff::Tape;
using diff::Var;

Eigen::Vector3d GridSpec::center(std::size_t cell) const {
  const auto C = static_cast<std::size_t>(cells);
  const int k = static_cast<int>(cell % C);
  const int j = static_cast<int>((cell / C) % C);
  const int i = static_cast<int>(cell / (C * C));
  return {cell_center(i), cell_center(j), cell_center(k)};
}

void GridSpec::validate() const {
  if (cells < 1) throw std::invalid_argument("grid cells must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("grid feature_dim must be >= 1");
}

std::vector<CellWeight> splat_weights(const GridSpec& spec, const Eigen::Vector3d& x) {
  const auto s = kernels::trilinear_stencil(spec.cells, x.x(), x.y(), x.z());
  std::vector<CellWeight> out;
  for (int a = 0; a < s.axis[0].count; ++a) {
    for (int b = 0; b < s.axis[1].count; ++b) {
      for (int c = 0; c < s.axis[2].count; ++c) {
        const double w = s.axis[0].weight[a] * s.axis[1].weight[b] * s.axis[2].weight[c];
        if (w > 0.0) out.push_back({s.cell(spec.cells, a, b, c), w});
      }
    }
  }
  return out;
}

template <typename T>
FeatureGrid<T>::FeatureGrid(GridSpec s, std::vector<T> v) : spec(s), values(std::move(v)) {
  if (values.size() != spec.voxel_count() * static_cast<std::size_t>(spec.feature_dim)) {
    throw std::invalid_argument("feature grid payload size does not match its spec");
  }
}

template <typename T>
void splat(FeatureGrid<T>& grid, const Eigen::Vector3d& x, std::span<const T> f, T scale) {
  if (f.size() != grid.channels()) {
    throw std::invalid_argument("splat: feature has " + std::to_string(f.size()) +
                                " channels, grid expects " + std::to_string(grid.channels()));
  }
  for (T v : f) {
    if (!std::isfinite(v)) throw std::invalid_argument("splat: non-finite feature");
  }
  const T p[3] = {static_cast<T>(x.x()), static_cast<T>(x.y()), static_cast<T>(x.z())};
  const T s[1] = {scale};
  kernels::splat<T>(grid.spec.cells, grid.channels(), p, f, s, grid.values, kernels::Exec::Serial);
}

template <typename T>
std::vector<T> sample(const FeatureGrid<T>& grid, const Eigen::Vector3d& x) {
  std::vector<T> out(grid.channels());
  const T p[3] = {static_cast<T>(x.x()), static_cast<T>(x.y()), static_cast<T>(x.z())};
  kernels::sample<T>(grid.spec.cells, grid.channels(), grid.values, p, out,
                     kernels::Exec::Serial);
  return out;
}

template <typename T>
Var splat_points(Tape<T>& tape, int cells, Var points, Var values, Var scales) {
  const auto& pv = tape.value(points);
  const auto& vv = tape.value(values);
  const auto& sv = tape.value(scales);
  const std::size_t count = sv.size();
  if (pv.size() != 3 * count || vv.rows() != count) {
    throw std::invalid_argument("splat_points: incompatible shapes points" +
                                diff::shape_str(pv.shape) + " values" +
                                diff::shape_str(vv.shape) + " scales" + diff::shape_str(sv.shape));
  }
  if (!vv.all_finite()) throw std::invalid_argument("splat_points: non-finite feature values");
  const std::size_t channels = vv.cols();
  const auto C = static_cast<std::size_t>(cells);
  Buffer<T> grid(Shape{C * C * C, channels});
  kernels::splat<T>(cells, channels, pv.span(), vv.span(), sv.span(), grid.span(),
                    kernels::default_exec());
  return tape.record("splat", std::move(grid), {points, values, scales},
                     [=](Tape<T>& tp, std::span<const T> g) {
                       kernels::splat_backward<T>(cells, channels, tp.value(points).span(),
                                                  tp.value(values).span(),
                                                  tp.value(scales).span(), g,
                                                  tp.grad_target(points), tp.grad_target(values),
                                                  tp.grad_target(scales), kernels::default_exec());
                     });
}

template <typename T>
Var sample_points(Tape<T>& tape, int cells, Var grid, Var points) {
  const auto& gv = tape.value(grid);
  const auto& pv = tape.value(points);
  const auto C = static_cast<std::size_t>(cells);
  if (gv.rows() != C * C * C || pv.size() % 3 != 0) {
    throw std::invalid_argument("sample_points: incompatible shapes grid" +
                                diff::shape_str(gv.shape) + " points" + diff::shape_str(pv.shape));
  }
  const std::size_t channels = gv.cols();
  const std::size_t count = pv.size() / 3;
  Buffer<T> out(Shape{count, channels});
  kernels::sample<T>(cells, channels, gv.span(), pv.span(), out.span(), kernels::default_exec());
  return tape.record("sample", std::move(out), {grid, points},
                     [=](Tape<T>& tp, std::span<const T> g) {
                       kernels::sample_backward<T>(cells, channels, tp.value(grid).span(),
                                                   tp.value(points).span(), g,
                                                   tp.grad_target(grid), tp.grad_target(points),
                                                   kernels::default_exec());
                     });
}

namespace {

// Face-neighbour lists for every cell, in a fixed order.
struct Neighbors {
  std::vector<std::uint32_t> offsets;  // cell -> [offsets[c], offsets[c+1])
  std::vector<std::uint32_t> cells;
};

Neighbors face_neighbors(int C) {
  Neighbors n;
  const GridSpec spec{C, 1};
  n.offsets.push_back(0);
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) {
      for (int k = 0; k < C; ++k) {
        const int d[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
        for (const auto& o : d) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (a < 0 || b < 0 || c < 0 || a >= C || b >= C || c >= C) continue;
          n.cells.push_back(static_cast<std::uint32_t>(spec.index(a, b, c)));
        }
        n.offsets.push_back(static_cast<std::uint32_t>(n.cells.size()));
      }
    }
  }
  return n;
}

}  // namespace

template <typename T>
Var neighbor_concat(Tape<T>& tape, int cells, Var grid) {
  const auto& gv = tape.value(grid);
  const auto C = static_cast<std::size_t>(cells);
  const std::size_t voxels = C * C * C;
  if (gv.rows() != voxels) {
    throw std::invalid_argument("neighbor_concat: grid shape " + diff::shape_str(gv.shape) +
                                " does not have " + std::to_string(voxels) + " cells");
  }
  const std::size_t E = gv.cols();
  auto nb = std::make_shared<Neighbors>(face_neighbors(cells));
  Buffer<T> out(Shape{voxels, 2 * E});
  for (std::size_t c = 0; c < voxels; ++c) {
    T* dst = out.data.data() + c * 2 * E;
    std::copy_n(gv.data.data() + c * E, E, dst);
    const auto begin = nb->offsets[c], end = nb->offsets[c + 1];
    const T inv = T{1} / static_cast<T>(end - begin);
    for (auto n = begin; n < end; ++n) {
      const T* src = gv.data.data() + static_cast<std::size_t>(nb->cells[n]) * E;
      for (std::size_t e = 0; e < E; ++e) dst[E + e] += src[e] * inv;
    }
  }
  return tape.record("neighbor_concat", std::move(out), {grid},
                     [grid, nb, voxels, E](Tape<T>& tp, std::span<const T> g) {
                       auto dg = tp.grad_target(grid);
                       for (std::size_t c = 0; c < voxels; ++c) {
                         const T* src = g.data() + c * 2 * E;
                         for (std::size_t e = 0; e < E; ++e) dg[c * E + e] += src[e];
                         const auto begin = nb->offsets[c], end = nb->offsets[c + 1];
                         const T inv = T{1} / static_cast<T>(end - begin);
                         for (auto n = begin; n < end; ++n) {
                           T* d = dg.data() + static_cast<std::size_t>(nb->cells[n]) * E;
                           for (std::size_t e = 0; e < E; ++e) d[e] += src[E + e] * inv;
                         }
                       }
                     });
}

namespace {
constexpr std::uint32_t kGridVersion = 1;
}

std::vector<std::uint8_t> encode_grid(const FeatureGrid<float>& grid) {
  ByteWriter w;
  w.put_magic("CVGF");
  w.put<std::uint32_t>(kGridVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.spec.cells));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.spec.feature_dim));
  w.put<std::uint8_t>(0);
  w.put_array<float>(grid.values);
  return w.bytes();
}

namespace {
FeatureGrid<float> decode_grid_from(ByteReader& r) {
  r.expect_magic("CVGF");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kGridVersion) r.fail("unsupported grid version " + std::to_string(version));
  GridSpec spec;
  spec.cells = static_cast<int>(r.get<std::uint32_t>("cells"));
  spec.feature_dim = static_cast<int>(r.get<std::uint32_t>("feature dim"));
  const auto dtype = r.get<std::uint8_t>("dtype");
  if (dtype != 0) r.fail("unsupported grid dtype " + std::to_string(dtype));
  if (spec.cells < 1 || spec.feature_dim < 1) r.fail("invalid grid dimensions");
  FeatureGrid<float> grid(spec);
  r.get_array<float>(std::span<float>(grid.values), "grid payload");
  if (!r.at_end()) r.fail("trailing bytes after grid payload");
  return grid;
}
}  // namespace

FeatureGrid<float> decode_grid(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes), "grid");
  return decode_grid_from(r);
}

void write_grid(const std::filesystem::path& path, const FeatureGrid<float>& grid) {
  ByteWriter w;
  const auto bytes = encode_grid(grid);
  w.put_array<std::uint8_t>(bytes);
  w.write_file(path);
}

FeatureGrid<float> read_grid(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  return decode_grid_from(r);
}

#define CANONLIFT_INSTANTIATE(T)                                                        \
  template struct FeatureGrid<T>;                                                       \
  template void splat<T>(FeatureGrid<T>&, const Eigen::Vector3d&, std::span<const T>, T); \
  template std::vector<T> sample<T>(const FeatureGrid<T>&, const Eigen::Vector3d&);     \
  template Var splat_points<T>(Tape<T>&, int, Var, Var, Var);                           \
  template Var sample_points<T>(Tape<T>&, int, Var, Var);                               \
  template Var neighbor_concat<T>(Tape<T>&, int, Var);

CANONLIFT_INSTANTIATE(float)
CANONLIFT_INSTANTIATE(double)

#undef CANONLIFT_INSTANTIATE

}  // namespace canonlift
