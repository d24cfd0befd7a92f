#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "canonlift/diff/buffer.hpp"
#include "canonlift/diff/parametric_map.hpp"
#include "canonlift/diff/tape.hpp"
#include "canonlift/symmetry.hpp"

namespace canonlift {

/// Per-pixel predictor f(I): maps (R, G, B, u, v) to |G|*4 + D outputs laid
/// out as [coords (3 per type) | probability logits (1 per type) | features].
/// The coordinate/probability columns and the feature columns come from two
/// separate branches, so blocking the coordinate outputs blocks every
/// coordinate parameter.
class PixelPredictor {
 public:
  static constexpr std::size_t kInputDim = 5;

  PixelPredictor() = default;
  PixelPredictor(std::size_t types, std::size_t feature_dim, std::size_t hidden);

  std::size_t types() const { return types_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t output_dim() const { return 4 * types_ + feature_dim_; }
  const diff::ParametricMap& coord_branch() const { return coord_; }
  const diff::ParametricMap& feature_branch() const { return feature_; }

  template <typename T>
  void initialize(diff::ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  void initialize_zero(diff::ParamStore<T>& store) const;

  /// [N, 5] -> [N, |G|*4 + D]
  template <typename T>
  diff::Var apply(diff::Tape<T>& tape, const diff::ParamBinder& bind, diff::Var inputs) const;

 private:
  std::size_t types_ = 0;
  std::size_t feature_dim_ = 0;
  diff::ParametricMap coord_;
  diff::ParametricMap feature_;
};

/// Foreground pixel list of one view and the matching predictor inputs.
template <typename T>
struct ViewPixels {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> pixels;  // row-major pixel indices, ascending
  diff::Buffer<T> inputs;             // [N, 5]: RGB then (u, v) in [-1, 1]
};

/// image is H*W*3 in [0, 1]; mask is H*W.
template <typename T>
ViewPixels<T> view_pixels(std::span<const float> image, std::span<const std::uint8_t> mask,
                          int height, int width);

/// Tape-resident coordinate field over the foreground pixels of one view.
struct CoordinateFieldVars {
  diff::Var coords;    // [N, |G|, 3] in the canonical cube
  diff::Var probs;     // [N, |G|], rows on the simplex
  diff::Var features;  // [N, D]
  std::vector<SymmetryType> types;
  std::vector<std::uint32_t> pixels;
  int height = 0;
  int width = 0;
  std::size_t count() const { return pixels.size(); }
};

template <typename T>
CoordinateFieldVars predict_coords(diff::Tape<T>& tape, const PixelPredictor& predictor,
                                   const diff::ParamBinder& bind, diff::Var inputs,
                                   const ViewPixels<T>& view,
                                   std::span<const SymmetryType> types);

/// Dense value-space coordinate field for inspection and correspondences.
struct CoordinateField {
  int height = 0;
  int width = 0;
  int feature_dim = 0;
  std::vector<SymmetryType> types;
  std::vector<float> coords;    // H*W*|G|*3
  std::vector<float> probs;     // H*W*|G|
  std::vector<float> features;  // H*W*D
  std::vector<std::uint8_t> mask;

  Eigen::Vector3d coord(std::size_t pixel, std::size_t type) const;
  float prob(std::size_t pixel, std::size_t type) const {
    return probs[pixel * types.size() + type];
  }
  std::size_t argmax_type(std::size_t pixel) const;
};

template <typename T>
CoordinateField materialize(const diff::Tape<T>& tape, const CoordinateFieldVars& field);

struct GroundTruthCoords {
  int height = 0;
  int width = 0;
  std::vector<float> coords;  // H*W*3
  std::vector<std::uint8_t> mask;
};

/// A field that puts probability one on `type` with the true coordinates.
CoordinateField ground_truth_field(const GroundTruthCoords& gt, SymmetryType type);

/// Surface samples with exact nearest-point queries. Queries go through a
/// uniform bucket grid; nearest_brute is the exhaustive reference.
class ShapeOracle {
 public:
  struct Nearest {
    std::size_t index = 0;
    double distance = 0.0;
  };

  ShapeOracle() = default;
  explicit ShapeOracle(std::vector<Eigen::Vector3d> points);

  const std::vector<Eigen::Vector3d>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  Nearest nearest(const Eigen::Vector3d& x) const;
  Nearest nearest_brute(const Eigen::Vector3d& x) const;
  /// Largest distance from an oracle point to its nearest other point.
  double max_nearest_neighbor_gap() const;

 private:
  std::size_t bucket_of(double v) const;
  std::vector<Eigen::Vector3d> points_;
  int buckets_ = 0;
  std::vector<std::uint32_t> bucket_start_;
  std::vector<std::uint32_t> bucket_points_;
};

/// Distance to the nearest oracle point.
double shape_distance(const ShapeOracle& oracle, const Eigen::Vector3d& x);
/// Unit vector away from the nearest point (zero within 1e-9).
Eigen::Vector3d shape_distance_gradient(const ShapeOracle& oracle, const Eigen::Vector3d& x);

/// [M, 3] points -> [M] distances.
template <typename T>
diff::Var shape_distance_op(diff::Tape<T>& tape, const ShapeOracle& oracle, diff::Var points);

/// Probability-weighted distance from the true coordinate to the closest
/// member of each predicted closure, averaged over foreground pixels.
/// gt is [N, 3] aligned with the field's pixels.
template <typename T>
diff::Var coord_loss(diff::Tape<T>& tape, const CoordinateFieldVars& field,
                     std::span<const T> gt);

/// Probability-weighted worst shape distance over each predicted closure
/// (m random rotations for RotContZ), averaged over foreground pixels.
/// Rotation angles derive from `seed` and the pixel/type index.
template <typename T>
diff::Var spurious_loss(diff::Tape<T>& tape, const CoordinateFieldVars& field,
                        const ShapeOracle& oracle, int m, std::uint64_t seed);

/// Rotation angles used by spurious_loss and lifting for one pixel/type.
std::vector<double> continuous_sample_angles(std::uint64_t seed, std::size_t pixel,
                                             std::size_t type, int m);

}  // namespace canonlift
