#include "canonlift/diff/parametric_map.hpp"

#include <cmath>
#include <stdexcept>

#include "canonlift/diff/ops.hpp"

namespace canonlift::diff {

ParametricMap::ParametricMap(std::string name, std::vector<std::size_t> dims, Activation hidden,
                             Activation last)
    : name_(std::move(name)) {
  if (dims.size() < 2) throw std::invalid_argument("ParametricMap needs at least in and out dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] == 0 || dims[i + 1] == 0) {
      throw std::invalid_argument("ParametricMap " + name_ + ": zero-sized layer");
    }
    const bool is_last = i + 2 == dims.size();
    layers_.push_back(Layer{dims[i], dims[i + 1], is_last ? last : hidden});
  }
}

std::string ParametricMap::weight_name(std::size_t layer) const {
  return name_ + "." + std::to_string(layer) + ".W";
}

std::string ParametricMap::bias_name(std::size_t layer) const {
  return name_ + "." + std::to_string(layer) + ".b";
}

std::vector<std::string> ParametricMap::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    names.push_back(weight_name(i));
    names.push_back(bias_name(i));
  }
  return names;
}

template <typename T>
void ParametricMap::initialize(ParamStore<T>& store, Rng& rng) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    Buffer<T> W(Shape{l.in, l.out});
    for (auto& w : W.data) w = static_cast<T>(rng.uniform(-bound, bound));
    store.add(weight_name(i), std::move(W));
    store.add(bias_name(i), Buffer<T>(Shape{l.out}));
  }
}

template <typename T>
void ParametricMap::initialize_zero(ParamStore<T>& store) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    store.add(weight_name(i), Buffer<T>(Shape{layers_[i].in, layers_[i].out}));
    store.add(bias_name(i), Buffer<T>(Shape{layers_[i].out}));
  }
}

template <typename T>
Var ParametricMap::apply(Tape<T>& tape, const ParamBinder& bind, Var x) const {
  if (tape.value(x).cols() != input_dim()) {
    throw std::invalid_argument("ParametricMap " + name_ + ": expected input dim " +
                                std::to_string(input_dim()) + ", got shape " +
                                shape_str(tape.shape(x)));
  }
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = dense(tape, h, bind(weight_name(i)), bind(bias_name(i)));
    switch (layers_[i].activation) {
      case Activation::Relu: h = relu(tape, h); break;
      case Activation::Tanh: h = tanh(tape, h); break;
      case Activation::None: break;
    }
  }
  return h;
}

template void ParametricMap::initialize<float>(ParamStore<float>&, Rng&) const;
template void ParametricMap::initialize<double>(ParamStore<double>&, Rng&) const;
template void ParametricMap::initialize_zero<float>(ParamStore<float>&) const;
template void ParametricMap::initialize_zero<double>(ParamStore<double>&) const;
template Var ParametricMap::apply<float>(Tape<float>&, const ParamBinder&, Var) const;
template Var ParametricMap::apply<double>(Tape<double>&, const ParamBinder&, Var) const;

}  // namespace canonlift::diff
