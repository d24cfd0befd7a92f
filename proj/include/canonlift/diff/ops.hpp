#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "canonlift/diff/tape.hpp"

namespace canonlift::diff {

// Binary elementwise ops accept b with the same shape as a, a single value,
// or one value per row of a (row broadcast over the last axis).

template <typename T> Var add(Tape<T>& t, Var a, Var b);
template <typename T> Var subtract(Tape<T>& t, Var a, Var b);
template <typename T> Var multiply(Tape<T>& t, Var a, Var b);
/// a / max(d, eps); the gradient flows through the clamped denominator.
template <typename T> Var divide_eps(Tape<T>& t, Var a, Var d, T eps = T(1e-8));

template <typename T> Var relu(Tape<T>& t, Var a);
template <typename T> Var tanh(Tape<T>& t, Var a);
template <typename T> Var sigmoid(Tape<T>& t, Var a);
/// Softmax over the last axis.
template <typename T> Var softmax(Tape<T>& t, Var a);
/// x[rows, in] * W[in, out] + b[out]
template <typename T> Var dense(Tape<T>& t, Var x, Var W, Var b);

template <typename T> Var sum(Tape<T>& t, Var a);
template <typename T> Var mean(Tape<T>& t, Var a);
template <typename T> Var l2_norm(Tape<T>& t, Var a);
/// mean |a - b|
template <typename T> Var l1_loss(Tape<T>& t, Var a, Var b);
/// Mean binary cross-entropy from logits, stable form.
template <typename T> Var bce_with_logits(Tape<T>& t, Var logits, Var targets);

/// Concatenation along the last axis; all inputs must agree on the row count.
template <typename T> Var concat(Tape<T>& t, std::span<const Var> parts);
/// Forwards values; contributes nothing to the input's gradient.
template <typename T> Var stop_gradient(Tape<T>& t, Var a);
template <typename T> Var scale(Tape<T>& t, Var a, T s);

template <typename T> Var reshape(Tape<T>& t, Var a, Shape shape);
/// Columns [begin, end) of the last axis.
template <typename T> Var slice_cols(Tape<T>& t, Var a, std::size_t begin, std::size_t end);
/// Rows of a (viewed as [rows, cols]) picked by index; the adjoint scatter-adds.
template <typename T> Var gather_rows(Tape<T>& t, Var a, std::span<const std::uint32_t> rows);

}  // namespace canonlift::diff
