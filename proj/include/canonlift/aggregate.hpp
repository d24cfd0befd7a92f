#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "canonlift/canonical.hpp"
#include "canonlift/diff/parametric_map.hpp"
#include "canonlift/diff/tape.hpp"
#include "canonlift/symmetry.hpp"
#include "canonlift/voxelgrid.hpp"

namespace canonlift {

/// Every closure member of every (pixel, type) prediction, as splat sources.
struct ClosureExpansion {
  diff::Var points;                 // [M, 3]
  std::vector<std::uint32_t> slot;  // M entries: n * |G| + g
  std::vector<std::uint32_t> pixel; // M entries: n
};

/// Finite types contribute their deduplicated members, RotContZ `m` rotations
/// at continuous_sample_angles(seed, n, g, m). coords is [N, |G|, 3].
template <typename T>
ClosureExpansion expand_closures(diff::Tape<T>& tape, diff::Var coords,
                                 std::span<const SymmetryType> types, int m, std::uint64_t seed);

/// Per-view lifted grid, [C^3, D+1]: the first D columns hold V_k, the last
/// holds W_k.
template <typename T>
diff::Var lift_view(diff::Tape<T>& tape, const CoordinateFieldVars& field, int cells,
                    const SymmetryConfig& sym, bool decouple, std::uint64_t view_seed);

struct ViewLift {
  FeatureGrid<float> V;
  WeightGrid<float> W;
};

/// Splits a lifted [C^3, D+1] buffer into V_k and W_k.
template <typename T>
ViewLift split_lift(const diff::Buffer<T>& lifted, int cells);

struct AggregateVars {
  diff::Var mean_features;  // V-bar, [C^3, D]
  diff::Var weight;         // W-bar, [C^3, 1]
};

/// W-bar = sum of W_k; V-bar = sum of V_k / W-bar, zero where W-bar < eps.
/// Views are summed in list order.
template <typename T>
AggregateVars average(diff::Tape<T>& tape, std::span<const diff::Var> lifts, T eps = T(1e-8));

/// Two-stage voxel refiner: neighbor_concat -> dense -> relu ->
/// neighbor_concat -> dense.
class Refiner {
 public:
  Refiner() = default;
  Refiner(std::size_t feature_dim, bool normalize_weight_input = false);

  std::size_t feature_dim() const { return feature_dim_; }
  bool normalize_weight_input() const { return normalize_weight_input_; }
  const diff::ParametricMap& stage(std::size_t i) const { return stages_.at(i); }

  template <typename T>
  void initialize(diff::ParamStore<T>& store, Rng& rng) const;

  /// Returns the refined grid V, [C^3, D].
  template <typename T>
  diff::Var apply(diff::Tape<T>& tape, const diff::ParamBinder& bind, int cells,
                  const AggregateVars& agg) const;

 private:
  std::size_t feature_dim_ = 0;
  bool normalize_weight_input_ = false;
  std::vector<diff::ParametricMap> stages_;
};

}  // namespace canonlift
