// Copyright 2026  The selftrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SELFTRANS_AUTODIFF_HPP_
#define SELFTRANS_AUTODIFF_HPP_

#include <functional>
#include <vector>

#include "selftrans/common.hpp"

namespace selftrans::ad {

/// Handle to a node of a Graph.
struct Var {
  int id = -1;
};

// Tape-based reverse-mode differentiation over dense double matrices.
// Nodes are appended in evaluation order, so backward() is a single reverse
// sweep. A graph built with track_gradients = false records values only.
class Graph {
 public:
  explicit Graph(bool track_gradients = true) : track_(track_gradients) { nodes_.reserve(256); }

  Var constant(Matrix value);
  /// Leaf that reads `value` in place (it must outlive the graph). On
  /// backward() the accumulated gradient is added into `*grad_sink`.
  Var parameter(const Matrix& value, Matrix* grad_sink);

  const Matrix& value(Var v) const;
  double scalar(Var v) const { return value(v)(0, 0); }
  int size() const { return static_cast<int>(nodes_.size()); }

  Var matmul(Var a, Var b);
  /// a^T b without materializing the transpose.
  Var matmul_tn(Var a, Var b);
  Var add(Var a, Var b);
  /// Broadcasts a 1 x n row over every row of `a`.
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var one_minus(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var leaky_relu(Var a, double slope);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int count);
  Var slice_rows(Var a, int start, int count);
  Var row(Var a, int index);
  /// out[t] = a[t + offset] inside the valid range, zero elsewhere.
  Var shift_rows(Var a, int offset);
  /// [shift_rows(a, -half) | ... | shift_rows(a, half)] as one node.
  Var row_taps(Var a, int half);
  /// Softmax over every entry of an n x 1 column.
  Var softmax_column(Var a);
  /// Row-wise log-softmax.
  Var log_softmax_rows(Var a);
  /// Dropout with an externally drawn keep mask (entries 0 or 1/(1-p)).
  Var mask(Var a, const Matrix& keep_scale);
  /// Scalar node with a precomputed value and gradient d value / d input.
  Var custom_scalar(Var input, double value, Matrix grad);
  /// sum_i weights[i] * scalars[i]
  Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

  /// Seeds d root = 1 (root must be 1 x 1) and propagates to parameters.
  void backward(Var root);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Matrix* sink = nullptr;
    bool requires_grad = false;
    std::function<void(Graph&, int)> backprop;
  };

  const Matrix& val(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }
  bool req(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  void check(Var v) const;
  Var push(Matrix value, bool requires_grad, std::function<void(Graph&, int)> backprop);
  template <typename Expr>
  void accumulate(int id, const Expr& delta);
  const Matrix& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  bool track_;
  std::vector<Node> nodes_;
};

}  // namespace selftrans::ad

#endif  // SELFTRANS_AUTODIFF_HPP_
