#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "canonlift/diff/parametric_map.hpp"
#include "canonlift/diff/tape.hpp"

namespace canonlift {

/// Pinhole camera orbiting the object. The centre sits at
/// translation + distance * (cos el cos az, cos el sin az, sin el) and looks
/// at `translation`, z up. Angles in degrees; focal is normalized by the
/// image half-size.
struct Camera {
  double azimuth = 0.0;
  double elevation = 0.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double distance = 1.5;
  double focal = 1.2;

  Eigen::Vector3d center() const;
  /// Columns: right, up, forward.
  Eigen::Matrix3d basis() const;
  bool operator==(const Camera&) const = default;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit length
  double t_enter = 0.0;
  double t_exit = -1.0;
  bool hit() const { return t_enter <= t_exit; }
};

/// Slab-method intersection with [-0.5, 0.5]^3; a miss leaves t_enter > t_exit.
void intersect_unit_cube(Ray& ray);

/// Ray through the centre of pixel (r, c) of a rows x cols image, row 0 at
/// the top.
Ray cast_ray(const Camera& cam, int r, int c, int rows, int cols);

struct RenderSettings {
  int ray_grid = 16;       // S
  int depth_samples = 16;  // N_d
  int output_size = 32;    // must be ray_grid * 2^k
  void validate() const;
  int upsample_stages() const;
};

/// Per-voxel occupancy logits from neighbor_concat(V) through a 2-layer map.
class OccupancyHead {
 public:
  OccupancyHead() = default;
  OccupancyHead(std::size_t feature_dim, std::size_t hidden);

  const diff::ParametricMap& map() const { return map_; }
  template <typename T>
  void initialize(diff::ParamStore<T>& store, Rng& rng) const {
    map_.initialize(store, rng);
  }
  /// V [C^3, D] -> logits [C^3, 1].
  template <typename T>
  diff::Var apply(diff::Tape<T>& tape, const diff::ParamBinder& bind, int cells,
                  diff::Var V) const;

 private:
  diff::ParametricMap map_;
};

/// Mean BCE between logits and a {0, 1} occupancy grid.
template <typename T>
diff::Var occupancy_loss(diff::Tape<T>& tape, diff::Var logits, std::span<const std::uint8_t> gt);

/// Occlusion network plus per-pixel decoder.
class Renderer {
 public:
  Renderer() = default;
  Renderer(std::size_t feature_dim, std::size_t hidden, RenderSettings settings);

  const RenderSettings& settings() const { return settings_; }
  const diff::ParametricMap& occlusion() const { return occlusion_; }
  const diff::ParametricMap& decoder() const { return decoder_; }

  template <typename T>
  void initialize(diff::ParamStore<T>& store, Rng& rng) const {
    occlusion_.initialize(store, rng);
    decoder_.initialize(store, rng);
  }

  /// V [C^3, D] -> [S*S, D] occlusion-pooled ray features.
  template <typename T>
  diff::Var project(diff::Tape<T>& tape, const diff::ParamBinder& bind, int cells, diff::Var V,
                    const Camera& cam) const;
  /// [S*S, D] -> [out*out, 3] image in [0, 1].
  template <typename T>
  diff::Var decode(diff::Tape<T>& tape, const diff::ParamBinder& bind, diff::Var features) const;

  template <typename T>
  diff::Var render(diff::Tape<T>& tape, const diff::ParamBinder& bind, int cells, diff::Var V,
                   const Camera& cam) const {
    return decode(tape, bind, project(tape, bind, cells, V, cam));
  }

 private:
  RenderSettings settings_;
  diff::ParametricMap occlusion_;
  diff::ParametricMap decoder_;
};

/// weights [R, N_d] (rows on the simplex), samples [R*N_d, D] -> [R, D].
template <typename T>
diff::Var depth_pool(diff::Tape<T>& tape, diff::Var weights, diff::Var samples);

/// Nearest-neighbour 2x upsampling of a [size*size, ch] image.
template <typename T>
diff::Var upsample2x(diff::Tape<T>& tape, diff::Var image, int size);

/// Mean absolute error between a rendered [H*W, 3] image and the target.
template <typename T>
diff::Var view_synthesis_loss(diff::Tape<T>& tape, diff::Var rendered,
                              std::span<const float> target);

}  // namespace canonlift
