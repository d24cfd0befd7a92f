#include "canonlift/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace canonlift {

std::string_view to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::TableRot4: return "table_rot4";
    case ShapeClass::BenchRot2: return "bench_rot2";
    case ShapeClass::BottleRotCont: return "bottle_rotcont";
    case ShapeClass::PlaneReflectY: return "plane_reflecty";
    case ShapeClass::WedgeIdentity: return "wedge_identity";
  }
  return "unknown";
}

ShapeClass shape_class_from_string(std::string_view name) {
  for (ShapeClass c : kAllShapeClasses) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown shape class '" + std::string(name) +
                              "' (expected table_rot4, bench_rot2, bottle_rotcont, "
                              "plane_reflecty or wedge_identity)");
}

SymmetryType nominal_symmetry(ShapeClass c) {
  switch (c) {
    case ShapeClass::TableRot4: return SymmetryType::Rot4Z;
    case ShapeClass::BenchRot2: return SymmetryType::Rot2Z;
    case ShapeClass::BottleRotCont: return SymmetryType::RotContZ;
    case ShapeClass::PlaneReflectY: return SymmetryType::ReflectY;
    case ShapeClass::WedgeIdentity: return SymmetryType::Identity;
  }
  return SymmetryType::Identity;
}

std::string_view to_string(TextureMode m) {
  return m == TextureMode::Symmetric ? "symmetric" : "breaking";
}

TextureMode texture_mode_from_string(std::string_view name) {
  if (name == "symmetric") return TextureMode::Symmetric;
  if (name == "breaking") return TextureMode::Breaking;
  throw std::invalid_argument("unknown texture mode '" + std::string(name) +
                              "' (expected symmetric or breaking)");
}

namespace {

struct Range {
  double lo, hi;
};

// Raw (pre-normalization) parameter ranges per class.
std::vector<Range> param_ranges(ShapeClass c) {
  switch (c) {
    // top half-size, top half-thickness, leg length, leg half-width
    case ShapeClass::TableRot4: return {{0.28, 0.34}, {0.045, 0.06}, {0.30, 0.42}, {0.05, 0.065}};
    // seat half-length, seat half-width, seat half-thickness, leg length
    case ShapeClass::BenchRot2: return {{0.36, 0.42}, {0.13, 0.17}, {0.05, 0.06}, {0.20, 0.30}};
    // body radius, body half-height, neck radius, neck half-height
    case ShapeClass::BottleRotCont: return {{0.20, 0.26}, {0.20, 0.28}, {0.07, 0.09}, {0.08, 0.12}};
    // fuselage half-length, wing half-span, wing chord half-width, fin half-height
    case ShapeClass::PlaneReflectY: return {{0.38, 0.45}, {0.32, 0.40}, {0.08, 0.11}, {0.08, 0.12}};
    // base half-length, base half-width, tower half-height, arm half-length
    case ShapeClass::WedgeIdentity: return {{0.26, 0.32}, {0.16, 0.22}, {0.14, 0.20}, {0.10, 0.14}};
  }
  return {};
}

}  // namespace

ShapeSpec random_shape_spec(ShapeClass c, std::uint64_t seed) {
  ShapeSpec s;
  s.shape_class = c;
  s.seed = seed;
  Rng rng(seed);
  for (const Range& r : param_ranges(c)) s.params.push_back(rng.uniform(r.lo, r.hi));
  return s;
}

SdfShape::SdfShape(const ShapeSpec& spec) : spec_(spec) {
  const auto ranges = param_ranges(spec.shape_class);
  if (spec.params.size() != ranges.size()) {
    throw std::invalid_argument("shape " + std::string(to_string(spec.shape_class)) + " needs " +
                                std::to_string(ranges.size()) + " parameters, got " +
                                std::to_string(spec.params.size()));
  }
  for (double v : spec.params) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("shape parameters must be positive and finite");
    }
  }
  const auto& p = spec.params;
  auto box = [&](Eigen::Vector3d c, Eigen::Vector3d h) { prims_.push_back({false, c, h}); };
  auto cyl = [&](Eigen::Vector3d c, double r, double hh) {
    prims_.push_back({true, c, Eigen::Vector3d(r, r, hh)});
  };
  switch (spec.shape_class) {
    case ShapeClass::TableRot4: {
      const double a = p[0], t = p[1], h = p[2], w = p[3];
      box({0, 0, h + t}, {a, a, t});
      const double inset = a - w - 0.02;
      for (int sx : {-1, 1}) {
        for (int sy : {-1, 1}) box({sx * inset, sy * inset, 0.5 * h}, {w, w, 0.5 * h});
      }
      break;
    }
    case ShapeClass::BenchRot2: {
      const double L = p[0], W = p[1], t = p[2], h = p[3];
      box({0, 0, h + t}, {L, W, t});
      for (int sx : {-1, 1}) box({sx * (L - 0.08), 0, 0.5 * h}, {0.05, W - 0.01, 0.5 * h});
      break;
    }
    case ShapeClass::BottleRotCont: {
      const double R = p[0], hb = p[1], r = p[2], hn = p[3];
      cyl({0, 0, hb}, R, hb);
      cyl({0, 0, 2 * hb + hn}, r, hn);
      break;
    }
    case ShapeClass::PlaneReflectY: {
      const double Lf = p[0], span = p[1], chord = p[2], fin = p[3];
      box({0, 0, 0}, {Lf, 0.065, 0.065});
      box({0.06, 0, 0}, {chord, span, 0.05});
      box({-Lf + 0.07, 0, 0.065 + fin}, {0.07, 0.05, fin});
      break;
    }
    case ShapeClass::WedgeIdentity: {
      const double L = p[0], W = p[1], ht = p[2], arm = p[3];
      box({0, 0, 0}, {L, W, 0.06});
      box({L - 0.08, W - 0.08, 0.06 + ht}, {0.08, 0.08, ht});
      box({-L - arm + 0.01, -W + 0.06, 0}, {arm, 0.06, 0.05});
      break;
    }
  }
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& pr : prims_) {
    lo = lo.cwiseMin(pr.center - pr.half);
    hi = hi.cwiseMax(pr.center + pr.half);
  }
  offset_ = 0.5 * (lo + hi);
  const double diag = (hi - lo).norm();
  if (!(diag > 0.0)) throw std::invalid_argument("degenerate shape extents");
  scale_ = 1.0 / diag;
  bmin_ = (lo - offset_) * scale_;
  bmax_ = (hi - offset_) * scale_;
  min_thickness_ = std::numeric_limits<double>::infinity();
  for (const auto& pr : prims_) min_thickness_ = std::min(min_thickness_, 2.0 * pr.half.minCoeff() * scale_);
}

double SdfShape::raw_sdf(const Eigen::Vector3d& q) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pr : prims_) {
    const Eigen::Vector3d d = q - pr.center;
    double s;
    if (pr.cylinder) {
      const double rx = std::hypot(d.x(), d.y()) - pr.half.x();
      const double rz = std::abs(d.z()) - pr.half.z();
      s = std::min(std::max(rx, rz), 0.0) + std::hypot(std::max(rx, 0.0), std::max(rz, 0.0));
    } else {
      const Eigen::Vector3d e = d.cwiseAbs() - pr.half;
      s = std::min(e.maxCoeff(), 0.0) + e.cwiseMax(0.0).norm();
    }
    best = std::min(best, s);
  }
  return best;
}

double SdfShape::sdf(const Eigen::Vector3d& p) const {
  return raw_sdf(p / scale_ + offset_) * scale_;
}

Eigen::Vector3d SdfShape::gradient(const Eigen::Vector3d& p) const {
  constexpr double h = 1e-6;
  Eigen::Vector3d g;
  for (int d = 0; d < 3; ++d) {
    Eigen::Vector3d a = p, b = p;
    a[d] += h;
    b[d] -= h;
    g[d] = (sdf(a) - sdf(b)) / (2 * h);
  }
  return g;
}

namespace {

// Smooth, class-independent-frequency colour map over an invariant vector.
Eigen::Vector3d colour_of(const Eigen::Vector4d& q, int class_index) {
  static const double W[3][4] = {{3.1, 4.3, 2.2, -1.7}, {-3.6, 2.6, -1.9, 3.3}, {2.3, -3.4, 3.8, 2.9}};
  Eigen::Vector3d c;
  for (int i = 0; i < 3; ++i) {
    double arg = 0.9 * (class_index + 1) * (i + 1);
    for (int j = 0; j < 4; ++j) arg += W[i][j] * q[j];
    c[i] = 0.5 + 0.42 * std::sin(arg);
  }
  return c;
}

// (r cos k.theta, r sin k.theta): smooth at the axis, invariant under 2pi/k rotations.
Eigen::Vector2d angular(const Eigen::Vector3d& p, int k) {
  const double r = std::hypot(p.x(), p.y());
  if (r == 0.0) return Eigen::Vector2d::Zero();
  const double th = std::atan2(p.y(), p.x());
  return {r * std::cos(k * th), r * std::sin(k * th)};
}

}  // namespace

Eigen::Vector3d texture(ShapeClass c, const Eigen::Vector3d& p, TextureMode mode) {
  const int ci = static_cast<int>(c);
  if (mode == TextureMode::Breaking) return colour_of({p.x(), p.y(), p.z(), p.x() * p.y()}, ci);
  const double r = std::hypot(p.x(), p.y());
  switch (c) {
    case ShapeClass::TableRot4: {
      const auto a = angular(p, 4);
      return colour_of({p.z(), r, a.x(), a.y()}, ci);
    }
    case ShapeClass::BenchRot2: {
      const auto a = angular(p, 2);
      return colour_of({p.z(), r, a.x(), a.y()}, ci);
    }
    case ShapeClass::BottleRotCont: return colour_of({p.z(), r, 0.0, 0.0}, ci);
    case ShapeClass::PlaneReflectY: return colour_of({p.x(), p.z(), 4.0 * p.y() * p.y(), 0.0}, ci);
    case ShapeClass::WedgeIdentity: return colour_of({p.x(), p.y(), p.z(), 0.0}, ci);
  }
  return Eigen::Vector3d::Zero();
}

RenderSample render_view(const SdfShape& shape, TextureMode mode, const Camera& camera,
                         int height, int width, const TraceSettings& trace) {
  if (height < 1 || width < 1) throw std::invalid_argument("render_view: empty image size");
  RenderSample s;
  s.height = height;
  s.width = width;
  s.camera = camera;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  s.image.assign(3 * n, 0.0f);
  s.mask.assign(n, 0);
  s.coords.assign(3 * n, 0.0f);
  s.depth.assign(n, std::numeric_limits<float>::infinity());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Ray ray = cast_ray(camera, r, c, height, width);
      if (!ray.hit()) continue;
      double t = ray.t_enter;
      bool hit = false;
      for (int step = 0; step < trace.max_steps && t <= ray.t_exit; ++step) {
        const double d = shape.sdf(ray.origin + t * ray.direction);
        if (d < trace.epsilon) {
          hit = true;
          break;
        }
        t += d;
      }
      if (!hit) continue;
      const Eigen::Vector3d p = ray.origin + t * ray.direction;
      const std::size_t px = static_cast<std::size_t>(r) * width + c;
      s.mask[px] = 1;
      s.depth[px] = static_cast<float>(t);
      const Eigen::Vector3d col = texture(shape.spec().shape_class, p, mode);
      for (int d = 0; d < 3; ++d) {
        s.coords[3 * px + d] = static_cast<float>(p[d]);
        s.image[3 * px + d] = static_cast<float>(col[d]);
      }
    }
  }
  return s;
}

Camera sample_camera(Rng& rng, double distance, double focal) {
  Camera cam;
  cam.azimuth = rng.uniform(0.0, 360.0);
  cam.elevation = rng.uniform(-20.0, 40.0);
  for (int d = 0; d < 3; ++d) cam.translation[d] = rng.uniform(-0.1, 0.1);
  cam.distance = distance;
  cam.focal = focal;
  return cam;
}

std::vector<Eigen::Vector3d> sample_surface(const SdfShape& shape, std::size_t count,
                                            std::uint64_t seed) {
  constexpr double kBand = 0.03;
  Rng rng(seed);
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  const Eigen::Vector3d lo = shape.bbox_min().array() - kBand;
  const Eigen::Vector3d hi = shape.bbox_max().array() + kBand;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 1000 * count + 100000) {
      throw std::runtime_error("sample_surface: rejection sampling did not converge");
    }
    Eigen::Vector3d p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                      rng.uniform(lo.z(), hi.z()));
    // Interior band only: exterior points near an edge would project onto the edge.
    const double d0 = shape.sdf(p);
    if (d0 > 0.0 || d0 <= -kBand) continue;
    for (int it = 0; it < 20; ++it) {
      const double d = shape.sdf(p);
      if (std::abs(d) <= 1e-7) break;
      const Eigen::Vector3d g = shape.gradient(p);
      const double gn = g.norm();
      if (gn < 1e-9) break;
      p -= d * g / gn;
    }
    // Seams between touching primitives have sdf 0 but a vanishing gradient.
    if (std::abs(shape.sdf(p)) <= 1e-5 && shape.gradient(p).norm() > 0.9) out.push_back(p);
  }
  return out;
}

std::vector<std::uint8_t> voxelize(const SdfShape& shape, int cells, bool supersample) {
  if (cells < 1) throw std::invalid_argument("voxelize: cells must be >= 1");
  const double h = 1.0 / cells;
  auto center = [&](int i) { return -0.5 + (i + 0.5) * h; };
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(cells) * cells * cells, 0);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      for (int k = 0; k < cells; ++k) {
        const Eigen::Vector3d c(center(i), center(j), center(k));
        bool inside;
        if (!supersample) {
          inside = shape.sdf(c) <= 0.0;
        } else {
          int votes = 0;
          for (int s = 0; s < 8; ++s) {
            const Eigen::Vector3d o((s & 1 ? 0.25 : -0.25) * h, (s & 2 ? 0.25 : -0.25) * h,
                                    (s & 4 ? 0.25 : -0.25) * h);
            votes += shape.sdf(c + o) <= 0.0;
          }
          inside = votes >= 4;
        }
        occ[(static_cast<std::size_t>(i) * cells + j) * cells + k] = inside ? 1 : 0;
      }
    }
  }
  return occ;
}

}  // namespace canonlift
