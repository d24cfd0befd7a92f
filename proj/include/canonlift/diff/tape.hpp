#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "canonlift/diff/buffer.hpp"

namespace canonlift::diff {

/// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

/// Reverse-mode record. Nodes are appended in evaluation order, which is a
/// topological order; backward walks them once in reverse.
///
/// Leaves come in three kinds: constants (never differentiated), marked
/// inputs (gradients accumulate across backward calls until
/// zero_input_grads), and parameters bound to a ParamStore (each backward
/// adds its contribution to the store's gradient buffer).
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const T> out_grad)>;

  Var constant(Buffer<T> value);
  Var input(Buffer<T> value);
  /// Binds a stored parameter; repeated binds of the same entry share a node.
  Var parameter(ParamStore<T>& store, const std::string& name);

  /// Records an op. The backward closure is dropped when no input needs a
  /// gradient, so constant subgraphs cost nothing on the way back.
  Var record(std::string_view op, Buffer<T> value, std::vector<Var> inputs, BackwardFn fn);

  const Buffer<T>& value(Var v) const { return node(v).value; }
  const Shape& shape(Var v) const { return node(v).value.shape; }
  std::string_view op_name(Var v) const { return node(v).op; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient accumulated at v (empty span when nothing reached it).
  std::span<const T> grad(Var v) const { return node(v).grad; }
  /// Backward-time accessor: the gradient buffer of v, or an empty span when
  /// v does not require a gradient.
  std::span<T> grad_target(Var v);

  void backward(Var loss);
  void zero_input_grads();

  void note_stop_gradient() { ++stop_gradients_; }
  std::size_t stop_gradient_count() const { return stop_gradients_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Kind : std::uint8_t { Constant, Input, Parameter, Op };

  struct Node {
    std::string_view op;
    Kind kind = Kind::Op;
    bool requires_grad = false;
    Buffer<T> value;
    std::vector<T> grad;
    BackwardFn backward;
    ParamEntry<T>* param = nullptr;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);

  std::vector<Node> nodes_;
  std::unordered_map<const ParamEntry<T>*, Var> bound_;
  std::size_t stop_gradients_ = 0;
};

/// Resolves a parameter name to a tape variable. The default binder reads a
/// ParamStore; gradient checks bind parameters as marked inputs instead.
using ParamBinder = std::function<Var(const std::string&)>;

template <typename T>
ParamBinder store_binder(Tape<T>& tape, ParamStore<T>& store) {
  return [&tape, &store](const std::string& name) { return tape.parameter(store, name); };
}

/// Binds stored values as constants, for forward-only evaluation.
template <typename T>
ParamBinder constant_binder(Tape<T>& tape, const ParamStore<T>& store) {
  return [&tape, &store](const std::string& name) { return tape.constant(store.at(name).value); };
}

}  // namespace canonlift::diff
