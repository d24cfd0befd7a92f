#include "canonlift/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "canonlift/diff/ops.hpp"

namespace canonlift {

using diff::Tape;
using diff::Var;

void TrainConfig::validate() const {
  const double ls[4] = {lambda.coord, lambda.spurious, lambda.vol, lambda.vs};
  bool any = false;
  for (double l : ls) {
    if (!(l >= 0.0)) throw std::invalid_argument("train: loss weights must be non-negative");
    any = any || l > 0.0;
  }
  if (!any) throw std::invalid_argument("train: at least one loss weight must be positive");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(adam.lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("train: lr_decay must be positive");
}

namespace {

template <typename T>
StepLosses read_losses(const Tape<T>& tape, const ForwardResult<T>& r) {
  StepLosses s;
  auto get = [&](Var v) { return v.valid() ? static_cast<double>(tape.value(v)[0]) : 0.0; };
  s.total = get(r.total);
  s.coord = get(r.coord_loss);
  s.spurious = get(r.spurious_loss);
  s.vol = get(r.vol_loss);
  s.vs = get(r.vs_loss);
  s.finite = std::isfinite(s.total) && std::isfinite(s.coord) && std::isfinite(s.spurious) &&
             std::isfinite(s.vol) && std::isfinite(s.vs);
  return s;
}

void accumulate(StepLosses& acc, const StepLosses& s, double w) {
  acc.total += w * s.total;
  acc.coord += w * s.coord;
  acc.spurious += w * s.spurious;
  acc.vol += w * s.vol;
  acc.vs += w * s.vs;
}

}  // namespace

Trainer::Trainer(const Model& model, TrainConfig config, diff::ParamStore<float> params)
    : model_(model), config_(config), params_(std::move(params)), adam_(config.adam) {
  config_.validate();
}

StepLosses Trainer::train_step(std::span<const SceneInstance* const> batch,
                               std::span<const ShapeOracle* const> oracles,
                               std::uint64_t step_seed) {
  if (batch.empty() || batch.size() != oracles.size()) {
    throw std::invalid_argument("train_step: batch and oracle lists must be non-empty and aligned");
  }
  params_.zero_grad();
  ForwardOptions opts;
  opts.decouple = config_.decouple;
  opts.seed = step_seed;
  const double w = 1.0 / static_cast<double>(batch.size());
  StepLosses step;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape<float> tape;
    const auto r = forward(tape, model_, diff::store_binder(tape, params_), *batch[i], oracles[i],
                           config_.lambda, opts);
    const StepLosses s = read_losses(tape, r);
    if (!s.finite) {
      step.finite = false;
      break;
    }
    accumulate(step, s, w);
    tape.backward(diff::scale(tape, r.total, static_cast<float>(w)));
  }
  if (!step.finite) {
    params_.zero_grad();
    ++consecutive_nonfinite_;
    spdlog::warn("non-finite loss, step skipped ({} in a row)", consecutive_nonfinite_);
    if (consecutive_nonfinite_ >= 3) {
      throw std::runtime_error("training aborted after 3 consecutive non-finite steps");
    }
  } else {
    consecutive_nonfinite_ = 0;
    const auto report = adam_.step(params_);
    if (report.skipped > 0) {
      spdlog::warn("{} parameters had non-finite gradients and were not updated", report.skipped);
    }
  }
  history_.push_back(step);
  return step;
}

EpochStats Trainer::run_epoch(std::span<const SceneInstance* const> instances,
                              std::span<const ShapeOracle* const> oracles, int epoch) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(config_.seed, static_cast<std::uint64_t>(epoch), 0x5eed));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  EpochStats stats;
  stats.epoch = epoch;
  const auto B = static_cast<std::size_t>(config_.batch_size);
  std::vector<StepLosses> finite;
  for (std::size_t begin = 0, step = 0; begin < order.size(); begin += B, ++step) {
    std::vector<const SceneInstance*> batch;
    std::vector<const ShapeOracle*> batch_oracles;
    for (std::size_t i = begin; i < std::min(order.size(), begin + B); ++i) {
      batch.push_back(instances[order[i]]);
      batch_oracles.push_back(oracles[order[i]]);
    }
    const StepLosses s =
        train_step(batch, batch_oracles, derive_seed(config_.seed, static_cast<std::uint64_t>(epoch), step));
    ++stats.steps;
    if (s.finite) {
      finite.push_back(s);
    } else {
      ++stats.skipped;
    }
  }
  for (const auto& s : finite) accumulate(stats.mean, s, 1.0 / static_cast<double>(finite.size()));
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  adam_.set_lr(adam_.config().lr * config_.lr_decay);
  return stats;
}

TrainResult run_training(const Model& model, std::span<const SceneInstance* const> train,
                         const TrainConfig& config,
                         const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("run_training: empty training set");
  std::vector<ShapeOracle> oracles;
  oracles.reserve(train.size());
  for (const auto* inst : train) oracles.push_back(inst->make_oracle());
  std::vector<const ShapeOracle*> oracle_ptrs;
  for (const auto& o : oracles) oracle_ptrs.push_back(&o);

  Trainer trainer(model, config, model.initialize<float>(derive_seed(config.seed, 0x1)));
  TrainResult result;
  for (int e = 0; e < config.epochs; ++e) {
    const EpochStats stats = trainer.run_epoch(train, oracle_ptrs, e);
    spdlog::info("epoch {:3d}  total {:.5f}  Lc {:.4f}  Ls {:.4f}  Lvol {:.4f}  Lvs {:.4f}  ({:.1f}s)",
                 e, stats.mean.total, stats.mean.coord, stats.mean.spurious, stats.mean.vol,
                 stats.mean.vs, stats.seconds);
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  result.params = trainer.params();
  result.steps = trainer.history();
  return result;
}

StepLosses evaluate_losses(const Model& model, const diff::ParamStore<float>& params,
                           const SceneInstance& instance, const ShapeOracle& oracle,
                           const LossWeights& weights, std::uint64_t seed) {
  Tape<float> tape;
  ForwardOptions opts;
  opts.seed = seed;
  const auto r = forward(tape, model, diff::constant_binder(tape, params), instance, &oracle,
                         weights, opts);
  return read_losses(tape, r);
}

}  // namespace canonlift
