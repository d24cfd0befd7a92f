#include "canonlift/diff/buffer.hpp"

#include <cmath>

namespace canonlift::diff {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
bool Buffer<T>::all_finite() const {
  for (T v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
ParamEntry<T>& ParamStore<T>::add(const std::string& name, Buffer<T> init) {
  if (entries_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  ParamEntry<T> e;
  e.grad = Buffer<T>(init.shape);
  e.value = std::move(init);
  return entries_.emplace(name, std::move(e)).first->second;
}

template <typename T>
ParamEntry<T>& ParamStore<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

template <typename T>
const ParamEntry<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [name, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), T{0});
}

template <typename T>
std::size_t ParamStore<T>::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

template struct Buffer<float>;
template struct Buffer<double>;
template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace canonlift::diff
