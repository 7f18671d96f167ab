// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "graphroute/tensor.hpp"

namespace graphroute::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Reverse-mode automatic differentiation over dense matrices.
///
/// Every op records its output value and a closure that propagates the output
/// gradient to its inputs. Gradients are only tracked for values that depend
/// on a `parameter()` leaf. A Tape is single-use and not thread-safe.
class Tape {
 public:
  Var constant(Matrix value);
  Var parameter(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); a zero matrix if the value did not influence the loss.
  Matrix grad(Var v) const;
  bool tracks_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(out)/d(out) = 1 for a 1x1 value and propagates backwards.
  void backward(Var out);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// a (n x m) + row (1 x m), broadcast over rows.
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  /// a * s where s is 1x1.
  Var mul_scalar(Var a, Var s);
  /// Elementwise product with a constant (dropout masks).
  Var mul_const(Var a, const Matrix& c);
  /// Row i of a (n x m) scaled by w(i, 0), w is n x 1.
  Var mul_rows(Var a, Var w);
  Var gelu(Var a);
  Var tanh(Var a);
  /// Row-wise layer normalization with learned gamma/beta (1 x m each).
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var gather_rows(Var a, std::span<const int> index);
  /// out(index[i]) += a(i) for an out matrix with `rows` rows.
  Var scatter_add_rows(Var a, std::span<const int> index, int rows);
  /// Row-wise dot product: n x 1.
  Var row_dot(Var a, Var b);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, int begin, int count);
  Var softmax_rows(Var a);
  /// Softmax of an n x 1 column within each segment.
  Var segment_softmax(Var scores, std::span<const int> segment, int segments);
  /// Mean over groups of -sum_i target_i * log softmax_group(scores)_i.
  /// `target` is n x 1 and sums to one within each group.
  Var grouped_cross_entropy(Var scores, std::span<const int> group, int groups, const Matrix& target);
  Var sum(Var a);

 private:
  using Backward = std::function<void(Tape&, const Matrix&)>;
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Matrix value, bool needs_grad, Backward backward);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
};

}  // namespace graphroute::ad
