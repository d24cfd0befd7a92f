#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace canonlift::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Flat row-major array with a shape. The last axis is contiguous.
template <typename T>
struct Buffer {
  Shape shape;
  std::vector<T> data;

  Buffer() = default;
  explicit Buffer(Shape s, T fill = T{0}) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Buffer(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_size(shape) != data.size()) {
      throw std::invalid_argument("buffer shape " + shape_str(shape) + " does not match " +
                                  std::to_string(data.size()) + " values");
    }
  }

  static Buffer scalar(T v) { return Buffer(Shape{1}, std::vector<T>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  /// Size of the last axis (1 for rank 0).
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const;

  template <typename U>
  Buffer<U> cast() const {
    Buffer<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

template <typename T>
struct ParamEntry {
  Buffer<T> value;
  Buffer<T> grad;
};

/// Named parameters with their accumulated gradients. Ordered by name so
/// iteration (optimizer, checkpoints) is deterministic.
template <typename T>
class ParamStore {
 public:
  ParamEntry<T>& add(const std::string& name, Buffer<T> init);
  ParamEntry<T>& at(const std::string& name);
  const ParamEntry<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  void zero_grad();
  std::size_t total_values() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>());
    return out;
  }

 private:
  std::map<std::string, ParamEntry<T>> entries_;
};

}  // namespace canonlift::diff
