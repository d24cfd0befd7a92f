#include "canonlift/aggregate.hpp"

#include <memory>
#include <stdexcept>
#include <string>

#include "canonlift/diff/ops.hpp"

namespace canonlift {

using diff::Buffer;
using diff::Shape;
using diff::Tape;
using diff::Var;

template <typename T>
ClosureExpansion expand_closures(Tape<T>& tape, Var coords, std::span<const SymmetryType> types,
                                 int m, std::uint64_t seed) {
  const auto& cv = tape.value(coords);
  const std::size_t G = types.size();
  if (G == 0 || cv.size() % (3 * G) != 0) {
    throw std::invalid_argument("expand_closures: coords " + diff::shape_str(cv.shape) +
                                " incompatible with " + std::to_string(G) + " types");
  }
  if (m < 1) throw std::invalid_argument("expand_closures: sample count must be >= 1");
  const std::size_t N = cv.size() / (3 * G);

  ClosureExpansion out;
  auto rotations = std::make_shared<std::vector<Eigen::Matrix3d>>();
  std::vector<T> pts;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t g = 0; g < G; ++g) {
      const std::size_t k = n * G + g;
      const Eigen::Vector3d c(cv[3 * k], cv[3 * k + 1], cv[3 * k + 2]);
      auto emit = [&](const Eigen::Matrix3d& R) {
        const Eigen::Vector3d x = R * c;
        rotations->push_back(R);
        out.slot.push_back(static_cast<std::uint32_t>(k));
        out.pixel.push_back(static_cast<std::uint32_t>(n));
        pts.push_back(static_cast<T>(x.x()));
        pts.push_back(static_cast<T>(x.y()));
        pts.push_back(static_cast<T>(x.z()));
      };
      if (types[g] == SymmetryType::RotContZ) {
        for (double a : continuous_sample_angles(seed, n, g, m)) emit(rotation_z(a));
        continue;
      }
      const auto transforms = finite_transforms(types[g]);
      std::vector<Eigen::Vector3d> seen;
      for (const auto& R : transforms) {
        const Eigen::Vector3d x = R * c;
        bool duplicate = false;
        for (const auto& s : seen) duplicate = duplicate || (s - x).norm() <= 1e-9;
        if (duplicate) continue;
        seen.push_back(x);
        emit(R);
      }
    }
  }
  const std::size_t M = out.slot.size();
  auto slots = std::make_shared<std::vector<std::uint32_t>>(out.slot);
  out.points = tape.record("expand_closures", Buffer<T>(Shape{M, 3}, std::move(pts)), {coords},
                           [coords, rotations, slots](Tape<T>& tp, std::span<const T> g) {
                             auto gc = tp.grad_target(coords);
                             for (std::size_t i = 0; i < slots->size(); ++i) {
                               const Eigen::Vector3d gp(g[3 * i], g[3 * i + 1], g[3 * i + 2]);
                               const Eigen::Vector3d gs = (*rotations)[i].transpose() * gp;
                               const std::size_t k = (*slots)[i];
                               for (int d = 0; d < 3; ++d) gc[3 * k + d] += static_cast<T>(gs[d]);
                             }
                           });
  return out;
}

template <typename T>
Var lift_view(Tape<T>& tape, const CoordinateFieldVars& field, int cells,
              const SymmetryConfig& sym, bool decouple, std::uint64_t view_seed) {
  const std::size_t N = field.count();
  const std::size_t G = field.types.size();
  const auto& fv = tape.value(field.features);
  if (fv.rows() != N || tape.value(field.probs).size() != N * G) {
    throw std::invalid_argument("lift_view: field shapes features" + diff::shape_str(fv.shape) +
                                " probs" + diff::shape_str(tape.shape(field.probs)) +
                                " do not match " + std::to_string(N) + " pixels");
  }
  const std::size_t D = fv.cols();
  const auto C = static_cast<std::size_t>(cells);
  if (N == 0) return tape.constant(Buffer<T>(Shape{C * C * C, D + 1}));

  Var coords = field.coords;
  Var probs = field.probs;
  if (decouple) {
    coords = diff::stop_gradient(tape, coords);
    probs = diff::stop_gradient(tape, probs);
  }
  const ClosureExpansion ex = expand_closures(tape, coords, field.types, sym.sample_count,
                                              view_seed);
  Var flat_probs = diff::reshape(tape, probs, Shape{N * G, 1});
  Var scales = diff::gather_rows(tape, flat_probs, ex.slot);
  const Var parts[2] = {field.features, tape.constant(Buffer<T>(Shape{N, 1}, T{1}))};
  Var values = diff::gather_rows(tape, diff::concat<T>(tape, parts), ex.pixel);
  return splat_points(tape, cells, ex.points, values, scales);
}

template <typename T>
ViewLift split_lift(const Buffer<T>& lifted, int cells) {
  const std::size_t E = lifted.cols();
  const GridSpec spec{cells, static_cast<int>(E - 1)};
  if (E < 2 || lifted.rows() != spec.voxel_count()) {
    throw std::invalid_argument("split_lift: buffer " + diff::shape_str(lifted.shape) +
                                " is not a lifted grid of " + std::to_string(cells) + "^3 cells");
  }
  ViewLift out{FeatureGrid<float>(spec), WeightGrid<float>(GridSpec{cells, 1})};
  for (std::size_t c = 0; c < spec.voxel_count(); ++c) {
    for (std::size_t e = 0; e + 1 < E; ++e) {
      out.V.values[c * (E - 1) + e] = static_cast<float>(lifted[c * E + e]);
    }
    out.W.values[c] = static_cast<float>(lifted[c * E + E - 1]);
  }
  return out;
}

template <typename T>
AggregateVars average(Tape<T>& tape, std::span<const Var> lifts, T eps) {
  if (lifts.empty()) throw std::invalid_argument("average: no views");
  if (!(eps > T{0})) throw std::invalid_argument("average: eps must be positive");
  const Shape shape = tape.shape(lifts[0]);
  for (Var v : lifts) {
    if (tape.shape(v) != shape) {
      throw std::invalid_argument("average: grid shapes differ " + diff::shape_str(shape) +
                                  " vs " + diff::shape_str(tape.shape(v)));
    }
  }
  Var total = lifts[0];
  for (std::size_t k = 1; k < lifts.size(); ++k) total = diff::add(tape, total, lifts[k]);
  const std::size_t E = shape.back();
  Var vsum = diff::slice_cols(tape, total, 0, E - 1);
  Var wsum = diff::slice_cols(tape, total, E - 1, E);

  const auto& w = tape.value(wsum);
  Buffer<T> mask(w.shape);
  for (std::size_t i = 0; i < w.size(); ++i) mask[i] = w[i] >= eps ? T{1} : T{0};
  Var ratio = diff::divide_eps(tape, vsum, wsum, eps);
  return {diff::multiply(tape, ratio, tape.constant(std::move(mask))), wsum};
}

Refiner::Refiner(std::size_t feature_dim, bool normalize_weight_input)
    : feature_dim_(feature_dim), normalize_weight_input_(normalize_weight_input) {
  if (feature_dim == 0) throw std::invalid_argument("Refiner: feature_dim must be positive");
  stages_.emplace_back("refine.0", std::vector<std::size_t>{2 * (feature_dim + 1), feature_dim});
  stages_.emplace_back("refine.1", std::vector<std::size_t>{2 * feature_dim, feature_dim});
}

template <typename T>
void Refiner::initialize(diff::ParamStore<T>& store, Rng& rng) const {
  for (const auto& s : stages_) s.initialize(store, rng);
}

template <typename T>
Var Refiner::apply(Tape<T>& tape, const diff::ParamBinder& bind, int cells,
                   const AggregateVars& agg) const {
  if (tape.value(agg.mean_features).cols() != feature_dim_) {
    throw std::invalid_argument("Refiner: expected " + std::to_string(feature_dim_) +
                                " feature channels, got " +
                                diff::shape_str(tape.shape(agg.mean_features)));
  }
  Var w = agg.weight;
  if (normalize_weight_input_) {
    // W / (1 + W) keeps the mass channel in [0, 1).
    Var one = tape.constant(Buffer<T>::scalar(T{1}));
    w = diff::divide_eps(tape, w, diff::add(tape, w, one));
  }
  const Var parts[2] = {agg.mean_features, w};
  Var x = neighbor_concat(tape, cells, diff::concat<T>(tape, parts));
  x = diff::relu(tape, stages_[0].apply(tape, bind, x));
  x = neighbor_concat(tape, cells, x);
  return stages_[1].apply(tape, bind, x);
}

#define CANONLIFT_INSTANTIATE(T)                                                             \
  template ClosureExpansion expand_closures<T>(Tape<T>&, Var, std::span<const SymmetryType>, \
                                               int, std::uint64_t);                          \
  template Var lift_view<T>(Tape<T>&, const CoordinateFieldVars&, int, const SymmetryConfig&, \
                            bool, std::uint64_t);                                            \
  template ViewLift split_lift<T>(const Buffer<T>&, int);                                    \
  template AggregateVars average<T>(Tape<T>&, std::span<const Var>, T);                      \
  template void Refiner::initialize<T>(diff::ParamStore<T>&, Rng&) const;                   \
  template Var Refiner::apply<T>(Tape<T>&, const diff::ParamBinder&, int,                   \
                                 const AggregateVars&) const;

CANONLIFT_INSTANTIATE(float)
CANONLIFT_INSTANTIATE(double)

#undef CANONLIFT_INSTANTIATE

}  // namespace canonlift
