#include "canonlift/diff/tape.hpp"

#include <algorithm>
#include <stdexcept>

namespace canonlift::diff {

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("invalid tape variable");
  return nodes_[v.id];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("invalid tape variable");
  return nodes_[v.id];
}

template <typename T>
Var Tape<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::constant(Buffer<T> value) {
  Node n;
  n.op = "constant";
  n.kind = Kind::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::input(Buffer<T> value) {
  Node n;
  n.op = "input";
  n.kind = Kind::Input;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::parameter(ParamStore<T>& store, const std::string& name) {
  ParamEntry<T>& entry = store.at(name);
  if (auto it = bound_.find(&entry); it != bound_.end()) return it->second;
  Node n;
  n.op = "parameter";
  n.kind = Kind::Parameter;
  n.requires_grad = true;
  n.value = entry.value;
  n.param = &entry;
  Var v = push(std::move(n));
  bound_.emplace(&entry, v);
  return v;
}

template <typename T>
Var Tape<T>::record(std::string_view op, Buffer<T> value, std::vector<Var> inputs,
                    BackwardFn fn) {
  Node n;
  n.op = op;
  n.kind = Kind::Op;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](Var v) { return node(v).requires_grad; });
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
std::span<T> Tape<T>::grad_target(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return {};
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), T{0});
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_str(root.value.shape));
  }
  for (auto& n : nodes_) {
    if (n.kind != Kind::Input) n.grad.clear();
  }
  if (!root.requires_grad) return;
  root.grad.assign(1, T{1});
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.kind != Kind::Op || !n.backward || n.grad.empty()) continue;
    n.backward(*this, std::span<const T>(n.grad));
  }
  for (auto& n : nodes_) {
    if (n.kind != Kind::Parameter || n.grad.empty()) continue;
    auto& dst = n.param->grad.data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad[j];
  }
}

template <typename T>
void Tape<T>::zero_input_grads() {
  for (auto& n : nodes_) {
    if (n.kind == Kind::Input) n.grad.clear();
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace canonlift::diff
