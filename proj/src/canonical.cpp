#include "canonlift/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "canonlift/diff/ops.hpp"
#include "canonlift/kernels.hpp"

namespace canonlift {

using diff::Buffer;
using diff::Shape;
using diff::Tape;
using diff::Var;

PixelPredictor::PixelPredictor(std::size_t types, std::size_t feature_dim, std::size_t hidden)
    : types_(types),
      feature_dim_(feature_dim),
      coord_("coord", {kInputDim, hidden, hidden, 4 * types}),
      feature_("feature", {kInputDim, hidden, feature_dim}) {
  if (types == 0) throw std::invalid_argument("PixelPredictor needs at least one symmetry type");
}

template <typename T>
void PixelPredictor::initialize(diff::ParamStore<T>& store, Rng& rng) const {
  coord_.initialize(store, rng);
  feature_.initialize(store, rng);
}

template <typename T>
void PixelPredictor::initialize_zero(diff::ParamStore<T>& store) const {
  coord_.initialize_zero(store);
  feature_.initialize_zero(store);
}

template <typename T>
Var PixelPredictor::apply(Tape<T>& tape, const diff::ParamBinder& bind, Var inputs) const {
  const Var parts[2] = {coord_.apply(tape, bind, inputs), feature_.apply(tape, bind, inputs)};
  return diff::concat<T>(tape, parts);
}

template <typename T>
ViewPixels<T> view_pixels(std::span<const float> image, std::span<const std::uint8_t> mask,
                          int height, int width) {
  const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (image.size() != 3 * n || mask.size() != n) {
    throw std::invalid_argument("view_pixels: image/mask sizes do not match " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  ViewPixels<T> v;
  v.height = height;
  v.width = width;
  for (std::size_t p = 0; p < n; ++p) {
    if (mask[p]) v.pixels.push_back(static_cast<std::uint32_t>(p));
  }
  v.inputs = Buffer<T>(Shape{v.pixels.size(), PixelPredictor::kInputDim});
  for (std::size_t i = 0; i < v.pixels.size(); ++i) {
    const std::size_t p = v.pixels[i];
    const int r = static_cast<int>(p / static_cast<std::size_t>(width));
    const int c = static_cast<int>(p % static_cast<std::size_t>(width));
    T* row = v.inputs.data.data() + i * PixelPredictor::kInputDim;
    row[0] = static_cast<T>(image[3 * p + 0]);
    row[1] = static_cast<T>(image[3 * p + 1]);
    row[2] = static_cast<T>(image[3 * p + 2]);
    row[3] = static_cast<T>(2.0 * (c + 0.5) / width - 1.0);
    row[4] = static_cast<T>(2.0 * (r + 0.5) / height - 1.0);
  }
  return v;
}

template <typename T>
CoordinateFieldVars predict_coords(Tape<T>& tape, const PixelPredictor& predictor,
                                   const diff::ParamBinder& bind, Var inputs,
                                   const ViewPixels<T>& view,
                                   std::span<const SymmetryType> types) {
  const std::size_t G = types.size();
  if (predictor.types() != G) {
    throw std::invalid_argument("predict_coords: predictor emits " +
                                std::to_string(predictor.types()) + " symmetry types, config has " +
                                std::to_string(G));
  }
  const auto& in = tape.value(inputs);
  if (in.cols() != PixelPredictor::kInputDim || in.rows() != view.pixels.size()) {
    throw std::invalid_argument("predict_coords: inputs " + diff::shape_str(in.shape) +
                                " do not match " + std::to_string(view.pixels.size()) +
                                " foreground pixels x 5");
  }
  const std::size_t N = view.pixels.size();
  const std::size_t D = predictor.feature_dim();
  Var raw = predictor.apply(tape, bind, inputs);

  CoordinateFieldVars f;
  f.types.assign(types.begin(), types.end());
  f.pixels = view.pixels;
  f.height = view.height;
  f.width = view.width;
  Var c = diff::slice_cols(tape, raw, 0, 3 * G);
  c = diff::scale(tape, diff::tanh(tape, c), T(0.5));
  f.coords = diff::reshape(tape, c, Shape{N, G, 3});
  f.probs = diff::softmax(tape, diff::slice_cols(tape, raw, 3 * G, 4 * G));
  f.features = diff::slice_cols(tape, raw, 4 * G, 4 * G + D);
  return f;
}

Eigen::Vector3d CoordinateField::coord(std::size_t pixel, std::size_t type) const {
  const float* p = coords.data() + (pixel * types.size() + type) * 3;
  return {p[0], p[1], p[2]};
}

std::size_t CoordinateField::argmax_type(std::size_t pixel) const {
  std::size_t best = 0;
  for (std::size_t g = 1; g < types.size(); ++g) {
    if (prob(pixel, g) > prob(pixel, best)) best = g;
  }
  return best;
}

template <typename T>
CoordinateField materialize(const Tape<T>& tape, const CoordinateFieldVars& field) {
  CoordinateField out;
  out.height = field.height;
  out.width = field.width;
  out.types = field.types;
  const std::size_t G = field.types.size();
  const auto& feat = tape.value(field.features);
  out.feature_dim = static_cast<int>(feat.cols());
  const std::size_t D = feat.cols();
  const std::size_t n = static_cast<std::size_t>(field.height) * field.width;
  out.coords.assign(n * G * 3, 0.0f);
  out.probs.assign(n * G, 0.0f);
  out.features.assign(n * D, 0.0f);
  out.mask.assign(n, 0);
  const auto& c = tape.value(field.coords);
  const auto& p = tape.value(field.probs);
  for (std::size_t i = 0; i < field.pixels.size(); ++i) {
    const std::size_t px = field.pixels[i];
    out.mask[px] = 1;
    for (std::size_t k = 0; k < G * 3; ++k) out.coords[px * G * 3 + k] = static_cast<float>(c[i * G * 3 + k]);
    for (std::size_t k = 0; k < G; ++k) out.probs[px * G + k] = static_cast<float>(p[i * G + k]);
    for (std::size_t k = 0; k < D; ++k) out.features[px * D + k] = static_cast<float>(feat[i * D + k]);
  }
  return out;
}

CoordinateField ground_truth_field(const GroundTruthCoords& gt, SymmetryType type) {
  CoordinateField out;
  out.height = gt.height;
  out.width = gt.width;
  out.types = {type};
  out.coords = gt.coords;
  out.probs.assign(gt.mask.size(), 0.0f);
  for (std::size_t i = 0; i < gt.mask.size(); ++i) out.probs[i] = gt.mask[i] ? 1.0f : 0.0f;
  out.mask = gt.mask;
  return out;
}

// ---------------------------------------------------------------------------
// ShapeOracle

ShapeOracle::ShapeOracle(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  buckets_ = std::clamp(static_cast<int>(std::cbrt(static_cast<double>(points_.size()))), 1, 32);
  const auto B = static_cast<std::size_t>(buckets_);
  std::vector<std::uint32_t> counts(B * B * B + 1, 0);
  std::vector<std::size_t> cell(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    cell[i] = (bucket_of(p.x()) * B + bucket_of(p.y())) * B + bucket_of(p.z());
    ++counts[cell[i] + 1];
  }
  for (std::size_t b = 1; b < counts.size(); ++b) counts[b] += counts[b - 1];
  bucket_start_ = counts;
  bucket_points_.assign(points_.size(), 0);
  std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    bucket_points_[fill[cell[i]]++] = static_cast<std::uint32_t>(i);
  }
}

std::size_t ShapeOracle::bucket_of(double v) const {
  const double u = (v + 0.5) * buckets_;
  if (!(u > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(u), static_cast<std::size_t>(buckets_ - 1));
}

ShapeOracle::Nearest ShapeOracle::nearest_brute(const Eigen::Vector3d& x) const {
  if (points_.empty()) throw std::invalid_argument("shape oracle is empty");
  double best = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d = (points_[i] - x).squaredNorm();
    if (d < best) {
      best = d;
      index = i;
    }
  }
  return {index, std::sqrt(best)};
}

ShapeOracle::Nearest ShapeOracle::nearest(const Eigen::Vector3d& x) const {
  if (points_.empty()) throw std::invalid_argument("shape oracle is empty");
  const int B = buckets_;
  const double bs = 1.0 / B;
  const int q[3] = {static_cast<int>(bucket_of(x.x())), static_cast<int>(bucket_of(x.y())),
                    static_cast<int>(bucket_of(x.z()))};
  double best = std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();
  auto visit = [&](int i, int j, int k) {
    const std::size_t b = (static_cast<std::size_t>(i) * B + j) * B + k;
    for (auto n = bucket_start_[b]; n < bucket_start_[b + 1]; ++n) {
      const std::size_t p = bucket_points_[n];
      const double d = (points_[p] - x).squaredNorm();
      if (d < best || (d == best && p < index)) {
        best = d;
        index = p;
      }
    }
  };
  for (int r = 0;; ++r) {
    const int lo[3] = {std::max(0, q[0] - r), std::max(0, q[1] - r), std::max(0, q[2] - r)};
    const int hi[3] = {std::min(B - 1, q[0] + r), std::min(B - 1, q[1] + r),
                       std::min(B - 1, q[2] + r)};
    for (int i = lo[0]; i <= hi[0]; ++i) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int k = lo[2]; k <= hi[2]; ++k) {
          const int ring = std::max({std::abs(i - q[0]), std::abs(j - q[1]), std::abs(k - q[2])});
          if (ring == r) visit(i, j, k);
        }
      }
    }
    // Lower bound on the distance to any bucket outside the searched box.
    double bound = std::numeric_limits<double>::infinity();
    const double xs[3] = {x.x(), x.y(), x.z()};
    for (int d = 0; d < 3; ++d) {
      if (q[d] - r - 1 >= 0) bound = std::min(bound, xs[d] - (-0.5 + (q[d] - r) * bs));
      if (q[d] + r + 1 < B) bound = std::min(bound, (-0.5 + (q[d] + r + 1) * bs) - xs[d]);
    }
    if (std::isinf(bound)) break;
    if (index != std::numeric_limits<std::size_t>::max() && bound > 0.0 &&
        best < bound * bound) {
      break;
    }
  }
  return {index, std::sqrt(best)};
}

double ShapeOracle::max_nearest_neighbor_gap() const {
  double gap = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points_.size(); ++j) {
      if (i != j) best = std::min(best, (points_[i] - points_[j]).squaredNorm());
    }
    gap = std::max(gap, best);
  }
  return std::sqrt(gap);
}

double shape_distance(const ShapeOracle& oracle, const Eigen::Vector3d& x) {
  return oracle.nearest(x).distance;
}

Eigen::Vector3d shape_distance_gradient(const ShapeOracle& oracle, const Eigen::Vector3d& x) {
  const auto n = oracle.nearest(x);
  if (n.distance < 1e-9) return Eigen::Vector3d::Zero();
  return (x - oracle.points()[n.index]) / n.distance;
}

template <typename T>
Var shape_distance_op(Tape<T>& tape, const ShapeOracle& oracle, Var points) {
  if (oracle.empty()) throw std::invalid_argument("shape_distance: empty oracle");
  const auto& pv = tape.value(points);
  if (pv.size() % 3 != 0) {
    throw std::invalid_argument("shape_distance: points shape " + diff::shape_str(pv.shape));
  }
  const std::size_t M = pv.size() / 3;
  Buffer<T> out(Shape{M});
  auto grads = std::make_shared<std::vector<double>>(3 * M, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    const Eigen::Vector3d x(pv[3 * m], pv[3 * m + 1], pv[3 * m + 2]);
    const auto n = oracle.nearest(x);
    out[m] = static_cast<T>(n.distance);
    if (n.distance >= 1e-9) {
      const Eigen::Vector3d g = (x - oracle.points()[n.index]) / n.distance;
      for (int d = 0; d < 3; ++d) (*grads)[3 * m + d] = g[d];
    }
  }
  return tape.record("shape_distance", std::move(out), {points},
                     [points, grads, M](Tape<T>& tp, std::span<const T> g) {
                       auto gp = tp.grad_target(points);
                       for (std::size_t m = 0; m < M; ++m) {
                         for (std::size_t d = 0; d < 3; ++d) {
                           gp[3 * m + d] += g[m] * static_cast<T>((*grads)[3 * m + d]);
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Losses

std::vector<double> continuous_sample_angles(std::uint64_t seed, std::size_t pixel,
                                             std::size_t type, int m) {
  Rng rng(derive_seed(seed, pixel, type));
  std::vector<double> angles(static_cast<std::size_t>(m));
  for (auto& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return angles;
}

namespace {

template <typename T>
void check_field(const Tape<T>& tape, const CoordinateFieldVars& field, const char* op) {
  const std::size_t N = field.count();
  const std::size_t G = field.types.size();
  if (tape.value(field.coords).size() != N * G * 3 || tape.value(field.probs).size() != N * G) {
    throw std::invalid_argument(std::string(op) + ": coordinate field shapes coords" +
                                diff::shape_str(tape.shape(field.coords)) + " probs" +
                                diff::shape_str(tape.shape(field.probs)) +
                                " do not match its pixel/type counts");
  }
}

// Per-(pixel, type) loss term and its derivative w.r.t. the coordinate.
struct Term {
  double value = 0.0;
  Eigen::Vector3d dcoord = Eigen::Vector3d::Zero();
};

Term closest_term(SymmetryType g, const Eigen::Vector3d& c, const Eigen::Vector3d& t) {
  Term term;
  if (g == SymmetryType::RotContZ) {
    const double r = std::hypot(c.x(), c.y());
    const double rho = std::hypot(t.x(), t.y());
    const double dz = t.z() - c.z();
    const double d = std::hypot(rho - r, dz);
    term.value = d;
    if (d > 0.0) {
      const double dd_dr = -(rho - r) / d;
      if (r > 0.0) {
        term.dcoord.x() = dd_dr * c.x() / r;
        term.dcoord.y() = dd_dr * c.y() / r;
      }
      term.dcoord.z() = -dz / d;
    }
    return term;
  }
  const ClosestPoint cp = closest_on_closure(g, c, t);
  term.value = cp.distance;
  if (cp.distance > 0.0) {
    const Eigen::Matrix3d& R = finite_transforms(g)[static_cast<std::size_t>(cp.member)];
    term.dcoord = R.transpose() * (cp.point - t) / cp.distance;
  }
  return term;
}

Term spurious_term(SymmetryType g, const Eigen::Vector3d& c, const ShapeOracle& oracle,
                   std::uint64_t seed, std::size_t pixel, std::size_t type, int m) {
  Term term;
  term.value = -1.0;
  auto consider = [&](const Eigen::Matrix3d& R) {
    const Eigen::Vector3d x = R * c;
    const auto n = oracle.nearest(x);
    if (n.distance > term.value) {
      term.value = n.distance;
      term.dcoord = Eigen::Vector3d::Zero();
      if (n.distance >= 1e-9) {
        term.dcoord = R.transpose() * ((x - oracle.points()[n.index]) / n.distance);
      }
    }
  };
  if (g == SymmetryType::RotContZ) {
    for (double a : continuous_sample_angles(seed, pixel, type, m)) consider(rotation_z(a));
  } else {
    for (const auto& R : finite_transforms(g)) consider(R);
  }
  return term;
}

template <typename T, typename TermFn>
Var weighted_closure_loss(Tape<T>& tape, const CoordinateFieldVars& field, const char* op,
                          TermFn term_fn) {
  const std::size_t N = field.count();
  const std::size_t G = field.types.size();
  if (N == 0) {
    spdlog::warn("{}: empty foreground, loss is 0", op);
    return tape.constant(Buffer<T>::scalar(T{0}));
  }
  const auto& cv = tape.value(field.coords);
  const auto& pv = tape.value(field.probs);
  auto dist = std::make_shared<std::vector<double>>(N * G);
  auto dcoord = std::make_shared<std::vector<double>>(N * G * 3);
  kernels::parallel_for(N, [&](std::size_t n) {
    for (std::size_t g = 0; g < G; ++g) {
      const std::size_t k = n * G + g;
      const Eigen::Vector3d c(cv[3 * k], cv[3 * k + 1], cv[3 * k + 2]);
      const Term t = term_fn(n, g, c);
      (*dist)[k] = t.value;
      for (int d = 0; d < 3; ++d) (*dcoord)[3 * k + d] = t.dcoord[d];
    }
  });
  double total = 0.0;
  for (std::size_t k = 0; k < N * G; ++k) total += static_cast<double>(pv[k]) * (*dist)[k];
  const double inv = 1.0 / static_cast<double>(N);
  const Var coords = field.coords;
  const Var probs = field.probs;
  return tape.record(op, Buffer<T>::scalar(static_cast<T>(total / static_cast<double>(N))), {coords, probs},
                     [coords, probs, dist, dcoord, inv](Tape<T>& tp, std::span<const T> g) {
                       const double s = static_cast<double>(g[0]) * inv;
                       const auto& p = tp.value(probs);
                       auto gc = tp.grad_target(coords);
                       auto gp = tp.grad_target(probs);
                       for (std::size_t k = 0; k < dist->size(); ++k) {
                         if (!gp.empty()) gp[k] += static_cast<T>(s * (*dist)[k]);
                         if (!gc.empty()) {
                           const double w = s * static_cast<double>(p[k]);
                           for (std::size_t d = 0; d < 3; ++d) {
                             gc[3 * k + d] += static_cast<T>(w * (*dcoord)[3 * k + d]);
                           }
                         }
                       }
                     });
}

}  // namespace

template <typename T>
Var coord_loss(Tape<T>& tape, const CoordinateFieldVars& field, std::span<const T> gt) {
  check_field(tape, field, "coord_loss");
  if (gt.size() != 3 * field.count()) {
    throw std::invalid_argument("coord_loss: ground truth has " + std::to_string(gt.size() / 3) +
                                " pixels, field has " + std::to_string(field.count()));
  }
  return weighted_closure_loss(tape, field, "coord_loss",
                               [&](std::size_t n, std::size_t g, const Eigen::Vector3d& c) {
                                 const Eigen::Vector3d t(gt[3 * n], gt[3 * n + 1], gt[3 * n + 2]);
                                 return closest_term(field.types[g], c, t);
                               });
}

template <typename T>
Var spurious_loss(Tape<T>& tape, const CoordinateFieldVars& field, const ShapeOracle& oracle,
                  int m, std::uint64_t seed) {
  check_field(tape, field, "spurious_loss");
  if (oracle.empty()) throw std::invalid_argument("spurious_loss: empty shape oracle");
  if (m < 1) throw std::invalid_argument("spurious_loss: sample count must be >= 1");
  return weighted_closure_loss(tape, field, "spurious_loss",
                               [&](std::size_t n, std::size_t g, const Eigen::Vector3d& c) {
                                 return spurious_term(field.types[g], c, oracle, seed, n, g, m);
                               });
}

#define CANONLIFT_INSTANTIATE(T)                                                              \
  template void PixelPredictor::initialize<T>(diff::ParamStore<T>&, Rng&) const;             \
  template void PixelPredictor::initialize_zero<T>(diff::ParamStore<T>&) const;              \
  template Var PixelPredictor::apply<T>(Tape<T>&, const diff::ParamBinder&, Var) const;      \
  template ViewPixels<T> view_pixels<T>(std::span<const float>, std::span<const std::uint8_t>, \
                                        int, int);                                            \
  template CoordinateFieldVars predict_coords<T>(Tape<T>&, const PixelPredictor&,            \
                                                 const diff::ParamBinder&, Var,              \
                                                 const ViewPixels<T>&,                       \
                                                 std::span<const SymmetryType>);             \
  template CoordinateField materialize<T>(const Tape<T>&, const CoordinateFieldVars&);       \
  template Var shape_distance_op<T>(Tape<T>&, const ShapeOracle&, Var);                       \
  template Var coord_loss<T>(Tape<T>&, const CoordinateFieldVars&, std::span<const T>);      \
  template Var spurious_loss<T>(Tape<T>&, const CoordinateFieldVars&, const ShapeOracle&,    \
                                int, std::uint64_t);

CANONLIFT_INSTANTIATE(float)
CANONLIFT_INSTANTIATE(double)

#undef CANONLIFT_INSTANTIATE

}  // namespace canonlift
