#pragma once

#include <string>
#include <vector>

#include "canonlift/diff/tape.hpp"
#include "canonlift/rng.hpp"

namespace canonlift::diff {

enum class Activation { None, Relu, Tanh };

/// Dense multilayer map applied row-wise. Parameters live in a ParamStore
/// as "<name>.<layer>.W" ([in, out]) and "<name>.<layer>.b" ([out]).
class ParametricMap {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::None;
  };

  ParametricMap() = default;
  /// dims = {in, hidden..., out}; hidden layers use `hidden`, the last `last`.
  ParametricMap(std::string name, std::vector<std::size_t> dims,
                Activation hidden = Activation::Relu, Activation last = Activation::None);

  const std::string& name() const { return name_; }
  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;
  std::vector<std::string> parameter_names() const;

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  template <typename T>
  void initialize(ParamStore<T>& store, Rng& rng) const;
  /// Registers all-zero parameters.
  template <typename T>
  void initialize_zero(ParamStore<T>& store) const;

  template <typename T>
  Var apply(Tape<T>& tape, const ParamBinder& bind, Var x) const;

 private:
  std::string name_;
  std::vector<Layer> layers_;
};

}  // namespace canonlift::diff
