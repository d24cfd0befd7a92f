#include "canonlift/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "canonlift/kernels.hpp"

namespace canonlift::diff {

namespace {

enum class Bcast { Same, Scalar, Row };

template <typename T>
Bcast broadcast_kind(const Tape<T>& t, const char* op, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape == bv.shape) return Bcast::Same;
  if (bv.size() == 1) return Bcast::Scalar;
  if (av.rank() >= 2 && bv.size() == av.rows()) return Bcast::Row;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(av.shape) +
                              " and " + shape_str(bv.shape));
}

inline std::size_t bindex(Bcast k, std::size_t i, std::size_t cols) {
  switch (k) {
    case Bcast::Same: return i;
    case Bcast::Scalar: return 0;
    case Bcast::Row: return i / cols;
  }
  return i;
}

template <typename T, typename Fwd, typename Dfa, typename Dfb>
Var binary(Tape<T>& t, const char* op, Var a, Var b, Fwd fwd, Dfa dfa, Dfb dfb) {
  const Bcast kind = broadcast_kind(t, op, a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  const std::size_t cols = av.cols();
  Buffer<T> out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[bindex(kind, i, cols)]);
  return t.record(op, std::move(out), {a, b},
                  [a, b, kind, cols, dfa, dfb](Tape<T>& tp, std::span<const T> g) {
                    const auto& x = tp.value(a);
                    const auto& y = tp.value(b);
                    auto ga = tp.grad_target(a);
                    auto gb = tp.grad_target(b);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      const std::size_t j = bindex(kind, i, cols);
                      if (!ga.empty()) ga[i] += g[i] * dfa(x[i], y[j]);
                      if (!gb.empty()) gb[j] += g[i] * dfb(x[i], y[j]);
                    }
                  });
}

}  // namespace

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  return binary(
      t, "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <typename T>
Var subtract(Tape<T>& t, Var a, Var b) {
  return binary(
      t, "subtract", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <typename T>
Var multiply(Tape<T>& t, Var a, Var b) {
  return binary(
      t, "multiply", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Var divide_eps(Tape<T>& t, Var a, Var d, T eps) {
  if (!(eps > T{0})) throw std::invalid_argument("divide_eps: eps must be > 0");
  return binary(
      t, "divide_eps", a, d, [eps](T x, T y) { return x / std::max(y, eps); },
      [eps](T, T y) { return T{1} / std::max(y, eps); },
      [eps](T x, T y) {
        if (y < eps) return T{0};
        return -x / (y * y);
      });
}

template <typename T>
Var relu(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  Buffer<T> out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > T{0} ? av[i] : T{0};
  return t.record("relu", std::move(out), {a}, [a](Tape<T>& tp, std::span<const T> g) {
    const auto& x = tp.value(a);
    auto ga = tp.grad_target(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T{0}) ga[i] += g[i];
    }
  });
}

template <typename T>
Var tanh(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  Buffer<T> out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
  Buffer<T> y = out;
  return t.record("tanh", std::move(out), {a},
                  [a, y = std::move(y)](Tape<T>& tp, std::span<const T> g) {
                    auto ga = tp.grad_target(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T{1} - y[i] * y[i]);
                  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  Buffer<T> out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) {
    const T z = av[i];
    out[i] = z >= T{0} ? T{1} / (T{1} + std::exp(-z)) : std::exp(z) / (T{1} + std::exp(z));
  }
  Buffer<T> y = out;
  return t.record("sigmoid", std::move(out), {a},
                  [a, y = std::move(y)](Tape<T>& tp, std::span<const T> g) {
                    auto ga = tp.grad_target(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T{1} - y[i]);
                  });
}

template <typename T>
Var softmax(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  const std::size_t cols = av.cols();
  const std::size_t rows = av.rows();
  Buffer<T> out(av.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data.data() + r * cols;
    T* y = out.data.data() + r * cols;
    const T mx = *std::max_element(x, x + cols);
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
  Buffer<T> y = out;
  return t.record("softmax", std::move(out), {a},
                  [a, rows, cols, y = std::move(y)](Tape<T>& tp, std::span<const T> g) {
                    auto ga = tp.grad_target(a);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const T* yr = y.data.data() + r * cols;
                      const T* gr = g.data() + r * cols;
                      T dot{0};
                      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
                      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += yr[c] * (gr[c] - dot);
                    }
                  });
}

template <typename T>
Var dense(Tape<T>& t, Var x, Var W, Var b) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(W);
  const auto& bv = t.value(b);
  if (wv.rank() != 2 || xv.cols() != wv.dim(0) || bv.size() != wv.dim(1)) {
    throw std::invalid_argument("dense: incompatible shapes x" + shape_str(xv.shape) + " W" +
                                shape_str(wv.shape) + " b" + shape_str(bv.shape));
  }
  const std::size_t rows = xv.rows();
  const std::size_t in = wv.dim(0);
  const std::size_t out_dim = wv.dim(1);
  Shape shape = xv.shape;
  if (shape.empty()) shape = {1};
  shape.back() = out_dim;
  Buffer<T> out(shape);
  kernels::dense_forward<T>(xv.span(), rows, in, wv.span(), out_dim, bv.span(), out.span(),
                            kernels::default_exec());
  return t.record("dense", std::move(out), {x, W, b},
                  [x, W, b, rows, in, out_dim](Tape<T>& tp, std::span<const T> g) {
                    auto gx = tp.grad_target(x);
                    auto gw = tp.grad_target(W);
                    auto gb = tp.grad_target(b);
                    kernels::dense_backward<T>(tp.value(x).span(), rows, in, tp.value(W).span(),
                                               out_dim, g, gx, gw, gb, kernels::default_exec());
                  });
}

template <typename T>
Var sum(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  T s{0};
  for (T v : av.data) s += v;
  return t.record("sum", Buffer<T>::scalar(s), {a}, [a](Tape<T>& tp, std::span<const T> g) {
    auto ga = tp.grad_target(a);
    for (auto& v : ga) v += g[0];
  });
}

template <typename T>
Var mean(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  if (av.size() == 0) throw std::invalid_argument("mean: empty input");
  T s{0};
  for (T v : av.data) s += v;
  const T inv = T{1} / static_cast<T>(av.size());
  return t.record("mean", Buffer<T>::scalar(s * inv), {a},
                  [a, inv](Tape<T>& tp, std::span<const T> g) {
                    auto ga = tp.grad_target(a);
                    for (auto& v : ga) v += g[0] * inv;
                  });
}

template <typename T>
Var l2_norm(Tape<T>& t, Var a) {
  const auto& av = t.value(a);
  T s{0};
  for (T v : av.data) s += v * v;
  const T n = std::sqrt(s);
  return t.record("l2_norm", Buffer<T>::scalar(n), {a}, [a, n](Tape<T>& tp, std::span<const T> g) {
    if (n == T{0}) return;
    const auto& x = tp.value(a);
    auto ga = tp.grad_target(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * x[i] / n;
  });
}

template <typename T>
Var l1_loss(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape != bv.shape) {
    throw std::invalid_argument("l1_loss: incompatible shapes " + shape_str(av.shape) + " and " +
                                shape_str(bv.shape));
  }
  if (av.size() == 0) throw std::invalid_argument("l1_loss: empty input");
  T s{0};
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const T inv = T{1} / static_cast<T>(av.size());
  return t.record("l1_loss", Buffer<T>::scalar(s * inv), {a, b},
                  [a, b, inv](Tape<T>& tp, std::span<const T> g) {
                    const auto& x = tp.value(a);
                    const auto& y = tp.value(b);
                    auto ga = tp.grad_target(a);
                    auto gb = tp.grad_target(b);
                    for (std::size_t i = 0; i < x.size(); ++i) {
                      const T d = x[i] - y[i];
                      const T sgn = d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0});
                      if (!ga.empty()) ga[i] += g[0] * inv * sgn;
                      if (!gb.empty()) gb[i] -= g[0] * inv * sgn;
                    }
                  });
}

template <typename T>
Var bce_with_logits(Tape<T>& t, Var logits, Var targets) {
  const auto& zv = t.value(logits);
  const auto& yv = t.value(targets);
  if (zv.size() != yv.size()) {
    throw std::invalid_argument("bce_with_logits: incompatible shapes " + shape_str(zv.shape) +
                                " and " + shape_str(yv.shape));
  }
  if (zv.size() == 0) throw std::invalid_argument("bce_with_logits: empty input");
  T s{0};
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const T z = zv[i];
    s += std::max(z, T{0}) - z * yv[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const T inv = T{1} / static_cast<T>(zv.size());
  return t.record("bce_with_logits", Buffer<T>::scalar(s * inv), {logits, targets},
                  [logits, targets, inv](Tape<T>& tp, std::span<const T> g) {
                    const auto& z = tp.value(logits);
                    const auto& y = tp.value(targets);
                    auto gz = tp.grad_target(logits);
                    auto gy = tp.grad_target(targets);
                    for (std::size_t i = 0; i < z.size(); ++i) {
                      const T zi = z[i];
                      const T p = zi >= T{0} ? T{1} / (T{1} + std::exp(-zi))
                                             : std::exp(zi) / (T{1} + std::exp(zi));
                      if (!gz.empty()) gz[i] += g[0] * inv * (p - y[i]);
                      if (!gy.empty()) gy[i] -= g[0] * inv * zi;
                    }
                  });
}

template <typename T>
Var concat(Tape<T>& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rows = t.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const auto& v = t.value(p);
    if (v.rows() != rows) {
      throw std::invalid_argument("concat: row mismatch " + shape_str(t.value(parts[0]).shape) +
                                  " and " + shape_str(v.shape));
    }
    widths.push_back(v.cols());
    total += v.cols();
  }
  Shape shape = t.value(parts[0]).shape;
  if (shape.empty()) shape = {1};
  shape.back() = total;
  Buffer<T> out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = t.value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data.data() + r * widths[k], widths[k], out.data.data() + r * total + offset);
    }
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record("concat", std::move(out), inputs,
                  [inputs, widths, rows, total](Tape<T>& tp, std::span<const T> g) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                      auto gk = tp.grad_target(inputs[k]);
                      if (!gk.empty()) {
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t c = 0; c < widths[k]; ++c) {
                            gk[r * widths[k] + c] += g[r * total + off + c];
                          }
                        }
                      }
                      off += widths[k];
                    }
                  });
}

template <typename T>
Var stop_gradient(Tape<T>& t, Var a) {
  t.note_stop_gradient();
  // No recorded inputs, so nothing downstream reaches a.
  return t.record("stop_gradient", t.value(a), {}, {});
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
  Buffer<T> out = t.value(a);
  for (auto& v : out.data) v *= s;
  return t.record("scale", std::move(out), {a}, [a, s](Tape<T>& tp, std::span<const T> g) {
    auto ga = tp.grad_target(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

template <typename T>
Var reshape(Tape<T>& t, Var a, Shape shape) {
  const auto& av = t.value(a);
  if (shape_size(shape) != av.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(av.shape) + " as " +
                                shape_str(shape));
  }
  Buffer<T> out(std::move(shape), av.data);
  return t.record("reshape", std::move(out), {a}, [a](Tape<T>& tp, std::span<const T> g) {
    auto ga = tp.grad_target(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var slice_cols(Tape<T>& t, Var a, std::size_t begin, std::size_t end) {
  const auto& av = t.value(a);
  const std::size_t cols = av.cols();
  if (begin >= end || end > cols) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + "," +
                                std::to_string(end) + ") outside " + shape_str(av.shape));
  }
  const std::size_t rows = av.rows();
  const std::size_t width = end - begin;
  Shape shape = av.shape;
  shape.back() = width;
  Buffer<T> out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data.data() + r * cols + begin, width, out.data.data() + r * width);
  }
  return t.record("slice_cols", std::move(out), {a},
                  [a, rows, cols, begin, width](Tape<T>& tp, std::span<const T> g) {
                    auto ga = tp.grad_target(a);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < width; ++c) {
                        ga[r * cols + begin + c] += g[r * width + c];
                      }
                    }
                  });
}

template <typename T>
Var gather_rows(Tape<T>& t, Var a, std::span<const std::uint32_t> rows) {
  const auto& av = t.value(a);
  const std::size_t cols = av.cols();
  const std::size_t n = av.rows();
  Buffer<T> out(Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                              shape_str(av.shape));
    }
    std::copy_n(av.data.data() + rows[i] * cols, cols, out.data.data() + i * cols);
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return t.record("gather_rows", std::move(out), {a},
                  [a, cols, idx = std::move(idx)](Tape<T>& tp, std::span<const T> g) {
                    auto ga = tp.grad_target(a);
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      for (std::size_t c = 0; c < cols; ++c) ga[idx[i] * cols + c] += g[i * cols + c];
                    }
                  });
}

#define CANONLIFT_INSTANTIATE(T)                                                   \
  template Var add<T>(Tape<T>&, Var, Var);                                         \
  template Var subtract<T>(Tape<T>&, Var, Var);                                    \
  template Var multiply<T>(Tape<T>&, Var, Var);                                    \
  template Var divide_eps<T>(Tape<T>&, Var, Var, T);                               \
  template Var relu<T>(Tape<T>&, Var);                                             \
  template Var tanh<T>(Tape<T>&, Var);                                             \
  template Var sigmoid<T>(Tape<T>&, Var);                                          \
  template Var softmax<T>(Tape<T>&, Var);                                          \
  template Var dense<T>(Tape<T>&, Var, Var, Var);                                  \
  template Var sum<T>(Tape<T>&, Var);                                              \
  template Var mean<T>(Tape<T>&, Var);                                             \
  template Var l2_norm<T>(Tape<T>&, Var);                                          \
  template Var l1_loss<T>(Tape<T>&, Var, Var);                                     \
  template Var bce_with_logits<T>(Tape<T>&, Var, Var);                             \
  template Var concat<T>(Tape<T>&, std::span<const Var>);                          \
  template Var stop_gradient<T>(Tape<T>&, Var);                                    \
  template Var scale<T>(Tape<T>&, Var, T);                                         \
  template Var reshape<T>(Tape<T>&, Var, Shape);                                   \
  template Var slice_cols<T>(Tape<T>&, Var, std::size_t, std::size_t);             \
  template Var gather_rows<T>(Tape<T>&, Var, std::span<const std::uint32_t>);

CANONLIFT_INSTANTIATE(float)
CANONLIFT_INSTANTIATE(double)

#undef CANONLIFT_INSTANTIATE

}  // namespace canonlift::diff
