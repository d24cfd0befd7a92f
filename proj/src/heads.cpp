#include "canonlift/heads.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "canonlift/diff/ops.hpp"
#include "canonlift/voxelgrid.hpp"

namespace canonlift {

using diff::Buffer;
using diff::Shape;
using diff::Tape;
using diff::Var;

namespace {
double radians(double deg) { return deg * std::numbers::pi / 180.0; }
}  // namespace

Eigen::Vector3d Camera::center() const {
  const double az = radians(azimuth);
  const double el = radians(elevation);
  return translation +
         distance * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                    std::sin(el));
}

Eigen::Matrix3d Camera::basis() const {
  const Eigen::Vector3d forward = (translation - center()).normalized();
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d up = right.cross(forward);
  Eigen::Matrix3d B;
  B.col(0) = right;
  B.col(1) = up;
  B.col(2) = forward;
  return B;
}

void intersect_unit_cube(Ray& ray) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int d = 0; d < 3; ++d) {
    const double o = ray.origin[d];
    const double v = ray.direction[d];
    if (std::abs(v) < 1e-15) {
      if (o < -0.5 || o > 0.5) {
        ray.t_enter = 1.0;
        ray.t_exit = 0.0;
        return;
      }
      continue;
    }
    double a = (-0.5 - o) / v;
    double b = (0.5 - o) / v;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  t0 = std::max(t0, 0.0);
  if (t0 > t1) {
    ray.t_enter = 1.0;
    ray.t_exit = 0.0;
    return;
  }
  ray.t_enter = t0;
  ray.t_exit = t1;
}

Ray cast_ray(const Camera& cam, int r, int c, int rows, int cols) {
  const Eigen::Matrix3d B = cam.basis();
  const double u = 2.0 * (c + 0.5) / cols - 1.0;
  const double v = 1.0 - 2.0 * (r + 0.5) / rows;
  Ray ray;
  ray.origin = cam.center();
  ray.direction = (cam.focal * B.col(2) + u * B.col(0) + v * B.col(1)).normalized();
  intersect_unit_cube(ray);
  return ray;
}

void RenderSettings::validate() const {
  if (ray_grid < 1 || depth_samples < 1) {
    throw std::invalid_argument("render settings: ray_grid and depth_samples must be >= 1");
  }
  upsample_stages();
}

int RenderSettings::upsample_stages() const {
  int size = ray_grid;
  int stages = 0;
  while (size < output_size) {
    size *= 2;
    ++stages;
  }
  if (size != output_size) {
    throw std::invalid_argument("render settings: output_size " + std::to_string(output_size) +
                                " is not ray_grid " + std::to_string(ray_grid) +
                                " times a power of two");
  }
  return stages;
}

OccupancyHead::OccupancyHead(std::size_t feature_dim, std::size_t hidden)
    : map_("occupancy", {2 * feature_dim, hidden, 1}) {}

template <typename T>
Var OccupancyHead::apply(Tape<T>& tape, const diff::ParamBinder& bind, int cells, Var V) const {
  return map_.apply(tape, bind, neighbor_concat(tape, cells, V));
}

template <typename T>
Var occupancy_loss(Tape<T>& tape, Var logits, std::span<const std::uint8_t> gt) {
  const auto& lv = tape.value(logits);
  if (lv.size() != gt.size()) {
    throw std::invalid_argument("occupancy_loss: logits " + diff::shape_str(lv.shape) + " vs " +
                                std::to_string(gt.size()) + " ground-truth voxels");
  }
  Buffer<T> target(lv.shape);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 1) {
      throw std::invalid_argument("occupancy_loss: ground-truth voxel " + std::to_string(i) +
                                  " is " + std::to_string(gt[i]) + ", expected 0 or 1");
    }
    target[i] = static_cast<T>(gt[i]);
  }
  return diff::bce_with_logits(tape, logits, tape.constant(std::move(target)));
}

Renderer::Renderer(std::size_t feature_dim, std::size_t hidden, RenderSettings settings)
    : settings_(settings),
      occlusion_("occlusion", {feature_dim + 1, hidden, 1}),
      decoder_("decoder", {feature_dim, hidden, 3}) {
  settings_.validate();
}

template <typename T>
Var depth_pool(Tape<T>& tape, Var weights, Var samples) {
  const auto& wv = tape.value(weights);
  const auto& sv = tape.value(samples);
  const std::size_t R = wv.rows();
  const std::size_t Nd = wv.cols();
  const std::size_t D = sv.cols();
  if (sv.rows() != R * Nd) {
    throw std::invalid_argument("depth_pool: weights " + diff::shape_str(wv.shape) +
                                " incompatible with samples " + diff::shape_str(sv.shape));
  }
  Buffer<T> out(Shape{R, D});
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < Nd; ++i) {
      const T w = wv[r * Nd + i];
      const T* s = sv.data.data() + (r * Nd + i) * D;
      for (std::size_t d = 0; d < D; ++d) out[r * D + d] += w * s[d];
    }
  }
  return tape.record("depth_pool", std::move(out), {weights, samples},
                     [weights, samples, R, Nd, D](Tape<T>& tp, std::span<const T> g) {
                       const auto& w = tp.value(weights);
                       const auto& s = tp.value(samples);
                       auto gw = tp.grad_target(weights);
                       auto gs = tp.grad_target(samples);
                       for (std::size_t r = 0; r < R; ++r) {
                         for (std::size_t i = 0; i < Nd; ++i) {
                           const std::size_t row = r * Nd + i;
                           T acc{0};
                           for (std::size_t d = 0; d < D; ++d) {
                             acc += g[r * D + d] * s[row * D + d];
                             if (!gs.empty()) gs[row * D + d] += g[r * D + d] * w[row];
                           }
                           if (!gw.empty()) gw[row] += acc;
                         }
                       }
                     });
}

template <typename T>
Var upsample2x(Tape<T>& tape, Var image, int size) {
  const auto& iv = tape.value(image);
  const auto S = static_cast<std::size_t>(size);
  if (iv.rows() != S * S) {
    throw std::invalid_argument("upsample2x: image " + diff::shape_str(iv.shape) + " is not " +
                                std::to_string(size) + "x" + std::to_string(size));
  }
  const std::size_t ch = iv.cols();
  const std::size_t S2 = 2 * S;
  Buffer<T> out(Shape{S2 * S2, ch});
  for (std::size_t r = 0; r < S2; ++r) {
    for (std::size_t c = 0; c < S2; ++c) {
      std::copy_n(iv.data.data() + ((r / 2) * S + c / 2) * ch, ch,
                  out.data.data() + (r * S2 + c) * ch);
    }
  }
  return tape.record("upsample2x", std::move(out), {image},
                     [image, S, S2, ch](Tape<T>& tp, std::span<const T> g) {
                       auto gi = tp.grad_target(image);
                       for (std::size_t r = 0; r < S2; ++r) {
                         for (std::size_t c = 0; c < S2; ++c) {
                           for (std::size_t e = 0; e < ch; ++e) {
                             gi[((r / 2) * S + c / 2) * ch + e] += g[(r * S2 + c) * ch + e];
                           }
                         }
                       }
                     });
}

template <typename T>
Var Renderer::project(Tape<T>& tape, const diff::ParamBinder& bind, int cells, Var V,
                      const Camera& cam) const {
  const auto& vv = tape.value(V);
  const auto C = static_cast<std::size_t>(cells);
  const std::size_t D = occlusion_.input_dim() - 1;
  if (vv.rows() != C * C * C || vv.cols() != D) {
    throw std::invalid_argument("project: grid " + diff::shape_str(vv.shape) + " expected [" +
                                std::to_string(C * C * C) + ", " + std::to_string(D) + "]");
  }
  const int S = settings_.ray_grid;
  const auto Nd = static_cast<std::size_t>(settings_.depth_samples);
  const std::size_t R = static_cast<std::size_t>(S) * S;
  Buffer<T> points(Shape{R * Nd, 3}, T(2));  // misses sample outside the cube
  Buffer<T> depth(Shape{R * Nd, 1});
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const std::size_t ray_index = static_cast<std::size_t>(r) * S + c;
      const Ray ray = cast_ray(cam, r, c, S, S);
      for (std::size_t i = 0; i < Nd; ++i) {
        const std::size_t row = ray_index * Nd + i;
        const double frac = (static_cast<double>(i) + 0.5) / static_cast<double>(Nd);
        depth[row] = static_cast<T>(frac);
        if (!ray.hit()) continue;
        const Eigen::Vector3d p =
            ray.origin + (ray.t_enter + frac * (ray.t_exit - ray.t_enter)) * ray.direction;
        for (int d = 0; d < 3; ++d) points[3 * row + d] = static_cast<T>(p[d]);
      }
    }
  }
  Var samples = sample_points(tape, cells, V, tape.constant(std::move(points)));
  const Var parts[2] = {samples, tape.constant(std::move(depth))};
  Var logits = occlusion_.apply(tape, bind, diff::concat<T>(tape, parts));
  Var weights = diff::softmax(tape, diff::reshape(tape, logits, Shape{R, Nd}));
  return depth_pool(tape, weights, samples);
}

template <typename T>
Var Renderer::decode(Tape<T>& tape, const diff::ParamBinder& bind, Var features) const {
  const auto S = static_cast<std::size_t>(settings_.ray_grid);
  if (tape.value(features).rows() != S * S) {
    throw std::invalid_argument("decode: feature map " +
                                diff::shape_str(tape.shape(features)) + " is not " +
                                std::to_string(S) + "x" + std::to_string(S));
  }
  Var img = diff::sigmoid(tape, decoder_.apply(tape, bind, features));
  int size = settings_.ray_grid;
  for (int k = 0; k < settings_.upsample_stages(); ++k) {
    img = upsample2x(tape, img, size);
    size *= 2;
  }
  return img;
}

template <typename T>
Var view_synthesis_loss(Tape<T>& tape, Var rendered, std::span<const float> target) {
  const auto& rv = tape.value(rendered);
  if (rv.size() != target.size()) {
    throw std::invalid_argument("view_synthesis_loss: rendered " + diff::shape_str(rv.shape) +
                                " vs target of " + std::to_string(target.size()) + " values");
  }
  Buffer<T> t(rv.shape);
  std::copy(target.begin(), target.end(), t.data.begin());
  return diff::l1_loss(tape, rendered, tape.constant(std::move(t)));
}

#define CANONLIFT_INSTANTIATE(T)                                                              \
  template Var OccupancyHead::apply<T>(Tape<T>&, const diff::ParamBinder&, int, Var) const;  \
  template Var occupancy_loss<T>(Tape<T>&, Var, std::span<const std::uint8_t>);              \
  template Var Renderer::project<T>(Tape<T>&, const diff::ParamBinder&, int, Var,            \
                                    const Camera&) const;                                    \
  template Var Renderer::decode<T>(Tape<T>&, const diff::ParamBinder&, Var) const;           \
  template Var depth_pool<T>(Tape<T>&, Var, Var);                                            \
  template Var upsample2x<T>(Tape<T>&, Var, int);                                            \
  template Var view_synthesis_loss<T>(Tape<T>&, Var, std::span<const float>);

CANONLIFT_INSTANTIATE(float)
CANONLIFT_INSTANTIATE(double)

#undef CANONLIFT_INSTANTIATE

}  // namespace canonlift
