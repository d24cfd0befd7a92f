#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "canonlift/diff/optimizer.hpp"
#include "canonlift/model.hpp"

namespace canonlift {

struct TrainConfig {
  /// Chosen so the four weighted terms are of similar size on the desk
  /// dataset (unweighted after 30 epochs: L_c 0.085, L_s 0.064, L_vol 0.095,
  /// L_vs 0.016).
  LossWeights lambda{.coord = 1.0, .spurious = 1.5, .vol = 1.0, .vs = 5.0};
  diff::AdamConfig adam{.lr = 5e-3};
  int epochs = 40;
  int batch_size = 4;
  /// Multiplicative learning-rate factor applied after every epoch.
  double lr_decay = 0.96;
  bool decouple = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepLosses {
  double total = 0.0;
  double coord = 0.0;
  double spurious = 0.0;
  double vol = 0.0;
  double vs = 0.0;
  bool finite = true;
};

struct EpochStats {
  int epoch = 0;
  StepLosses mean;  // over the epoch's finite steps
  std::size_t steps = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

/// One optimizer per parameter store; batches accumulate per-instance
/// gradients in batch order before a single update.
class Trainer {
 public:
  Trainer(const Model& model, TrainConfig config, diff::ParamStore<float> params);

  /// Three consecutive non-finite steps throw std::runtime_error.
  StepLosses train_step(std::span<const SceneInstance* const> batch,
                        std::span<const ShapeOracle* const> oracles, std::uint64_t step_seed);
  EpochStats run_epoch(std::span<const SceneInstance* const> instances,
                       std::span<const ShapeOracle* const> oracles, int epoch);

  const diff::ParamStore<float>& params() const { return params_; }
  diff::ParamStore<float>& params() { return params_; }
  const std::vector<StepLosses>& history() const { return history_; }

 private:
  const Model& model_;
  TrainConfig config_;
  diff::ParamStore<float> params_;
  diff::Adam<float> adam_;
  std::vector<StepLosses> history_;
  int consecutive_nonfinite_ = 0;
};

struct TrainResult {
  diff::ParamStore<float> params;
  std::vector<EpochStats> epochs;
  std::vector<StepLosses> steps;
};

TrainResult run_training(const Model& model, std::span<const SceneInstance* const> train,
                         const TrainConfig& config,
                         const std::function<void(const EpochStats&)>& on_epoch = {});

/// Loss values of one instance without updating anything.
StepLosses evaluate_losses(const Model& model, const diff::ParamStore<float>& params,
                           const SceneInstance& instance, const ShapeOracle& oracle,
                           const LossWeights& weights, std::uint64_t seed);

}  // namespace canonlift
