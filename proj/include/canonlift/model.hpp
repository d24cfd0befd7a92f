#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "canonlift/aggregate.hpp"
#include "canonlift/canonical.hpp"
#include "canonlift/dataset.hpp"
#include "canonlift/heads.hpp"

namespace canonlift {

struct ModelConfig {
  int cells = 16;
  int feature_dim = 8;
  int hidden = 32;
  SymmetryConfig symmetry;
  bool normalize_weight_input = false;
  RenderSettings render;

  void validate() const;
};

struct LossWeights {
  double coord = 1.0;     // lambda_c
  double spurious = 1.0;  // lambda_s
  double vol = 1.0;       // lambda_vol
  double vs = 1.0;        // lambda_vs
};

/// f_theta, h_psi and both task heads over one parameter store.
class Model {
 public:
  Model() = default;
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const PixelPredictor& predictor() const { return predictor_; }
  const Refiner& refiner() const { return refiner_; }
  const OccupancyHead& occupancy() const { return occupancy_; }
  const Renderer& renderer() const { return renderer_; }

  template <typename T>
  diff::ParamStore<T> initialize(std::uint64_t seed) const;

  /// Parameters that produce coordinates and symmetry probabilities.
  std::vector<std::string> coordinate_parameter_names() const;
  std::vector<std::string> parameter_names() const;

 private:
  ModelConfig config_;
  PixelPredictor predictor_;
  Refiner refiner_;
  OccupancyHead occupancy_;
  Renderer renderer_;
};

struct ForwardOptions {
  bool decouple = true;
  /// Number of input views to aggregate (0 = all).
  std::size_t input_count = 0;
  bool coordinate_losses = true;
  bool task_losses = true;
  /// Record predictor inputs as differentiable tape inputs.
  bool differentiable_inputs = false;
  /// Base seed for closure sampling; combined with the instance and view.
  std::uint64_t seed = 0;
  /// Explicit input view order (defaults to 0..K-1).
  std::optional<std::vector<std::size_t>> view_order;
};

template <typename T>
struct ForwardResult {
  std::vector<ViewPixels<T>> views;
  std::vector<diff::Var> inputs;
  std::vector<CoordinateFieldVars> fields;
  std::vector<diff::Var> lifts;
  AggregateVars aggregate;
  diff::Var refined;
  diff::Var occupancy_logits;
  std::vector<diff::Var> renders;
  diff::Var coord_loss, spurious_loss, vol_loss, vs_loss, total;
};

template <typename T>
ForwardResult<T> forward(diff::Tape<T>& tape, const Model& model, const diff::ParamBinder& bind,
                         const SceneInstance& instance, const ShapeOracle* oracle,
                         const LossWeights& weights, const ForwardOptions& options);

/// Seed used for closure sampling of one input view.
std::uint64_t view_seed(std::uint64_t base, std::uint32_t instance, std::size_t view);

}  // namespace canonlift
