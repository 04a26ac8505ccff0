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

#include "selftrans/autodiff.hpp"

#include <cmath>
#include <string>

namespace selftrans::ad {

void Graph::check(Var v) const {
  if (v.id < 0 || v.id >= size()) throw std::out_of_range("autodiff: invalid Var");
}

const Matrix& Graph::value(Var v) const {
  check(v);
  return val(v.id);
}

Var Graph::push(Matrix value, bool requires_grad,
                std::function<void(Graph&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = track_ && requires_grad;
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{size() - 1};
}

template <typename Expr>
void Graph::accumulate(int id, const Expr& delta) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = delta;
  else
    n.grad += delta;
}

Var Graph::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Graph::parameter(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.external = &value;
  n.sink = grad_sink;
  n.requires_grad = track_ && grad_sink != nullptr;
  nodes_.push_back(std::move(n));
  return Var{size() - 1};
}

Var Graph::matmul(Var a, Var b) {
  check(a), check(b);
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.cols() != B.rows())
    throw std::invalid_argument("matmul: shape mismatch " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + " * " + std::to_string(B.rows()) +
                                "x" + std::to_string(B.cols()));
  Matrix C = A * B;
  return push(std::move(C), req(a) || req(b), [a, b](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    if (g.req(a)) g.accumulate(a.id, dC * g.val(b.id).transpose());
    if (g.req(b)) g.accumulate(b.id, g.val(a.id).transpose() * dC);
  });
}

Var Graph::matmul_tn(Var a, Var b) {
  check(a), check(b);
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.rows() != B.rows()) throw std::invalid_argument("matmul_tn: shape mismatch");
  Matrix C = A.transpose() * B;
  return push(std::move(C), req(a) || req(b), [a, b](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    if (g.req(a)) g.accumulate(a.id, g.val(b.id) * dC.transpose());
    if (g.req(b)) g.accumulate(b.id, g.val(a.id) * dC);
  });
}

Var Graph::add(Var a, Var b) {
  check(a), check(b);
  if (val(a.id).rows() != val(b.id).rows() || val(a.id).cols() != val(b.id).cols())
    throw std::invalid_argument("add: shape mismatch");
  Matrix C = val(a.id) + val(b.id);
  return push(std::move(C), req(a) || req(b), [a, b](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    g.accumulate(a.id, dC);
    g.accumulate(b.id, dC);
  });
}

Var Graph::add_row(Var a, Var r) {
  check(a), check(r);
  const Matrix& A = val(a.id);
  const Matrix& R = val(r.id);
  if (R.rows() != 1 || R.cols() != A.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix C = A.rowwise() + R.row(0);
  return push(std::move(C), req(a) || req(r), [a, r](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    g.accumulate(a.id, dC);
    if (g.req(r)) g.accumulate(r.id, dC.colwise().sum());
  });
}

Var Graph::mul(Var a, Var b) {
  check(a), check(b);
  if (val(a.id).rows() != val(b.id).rows() || val(a.id).cols() != val(b.id).cols())
    throw std::invalid_argument("mul: shape mismatch");
  Matrix C = val(a.id).cwiseProduct(val(b.id));
  return push(std::move(C), req(a) || req(b), [a, b](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    if (g.req(a)) g.accumulate(a.id, dC.cwiseProduct(g.val(b.id)));
    if (g.req(b)) g.accumulate(b.id, dC.cwiseProduct(g.val(a.id)));
  });
}

Var Graph::scale(Var a, double s) {
  check(a);
  Matrix C = val(a.id) * s;
  return push(std::move(C), req(a), [a, s](Graph& g, int self) {
    g.accumulate(a.id, g.grad_of(self) * s);
  });
}

Var Graph::one_minus(Var a) {
  check(a);
  Matrix C = (1.0 - val(a.id).array()).matrix();
  return push(std::move(C), req(a), [a](Graph& g, int self) {
    g.accumulate(a.id, -g.grad_of(self));
  });
}

Var Graph::tanh(Var a) {
  check(a);
  Matrix C = val(a.id).array().tanh().matrix();
  return push(std::move(C), req(a), [a](Graph& g, int self) {
    const Matrix& y = g.val(self);
    g.accumulate(a.id, g.grad_of(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var Graph::sigmoid(Var a) {
  check(a);
  Matrix C = (1.0 / (1.0 + (-val(a.id).array()).exp())).matrix();
  return push(std::move(C), req(a), [a](Graph& g, int self) {
    const Matrix& y = g.val(self);
    g.accumulate(a.id, g.grad_of(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var Graph::leaky_relu(Var a, double slope) {
  check(a);
  const Matrix& A = val(a.id);
  Matrix C = A.array().max(slope * A.array()).matrix();
  if (slope > 1.0) C = A.array().min(slope * A.array()).matrix();
  return push(std::move(C), req(a), [a, slope](Graph& g, int self) {
    const auto x = g.val(a.id).array();
    const auto dy = g.grad_of(self).array();
    g.accumulate(a.id, (dy * (x > 0.0).cast<double>() + slope * dy * (x <= 0.0).cast<double>()).matrix());
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index rows = -1, cols = 0;
  bool any = false;
  for (Var p : parts) {
    check(p);
    if (rows >= 0 && val(p.id).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    rows = val(p.id).rows();
    cols += val(p.id).cols();
    any = any || req(p);
  }
  Matrix C(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    C.middleCols(at, val(p.id).cols()) = val(p.id);
    at += val(p.id).cols();
  }
  return push(std::move(C), any, [parts](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    Eigen::Index at = 0;
    for (Var p : parts) {
      const auto w = g.val(p.id).cols();
      if (g.req(p)) g.accumulate(p.id, dC.middleCols(at, w));
      at += w;
    }
  });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Eigen::Index rows = 0, cols = -1;
  bool any = false;
  for (Var p : parts) {
    check(p);
    if (cols >= 0 && val(p.id).cols() != cols) throw std::invalid_argument("concat_rows: col mismatch");
    cols = val(p.id).cols();
    rows += val(p.id).rows();
    any = any || req(p);
  }
  Matrix C(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    C.middleRows(at, val(p.id).rows()) = val(p.id);
    at += val(p.id).rows();
  }
  return push(std::move(C), any, [parts](Graph& g, int self) {
    const Matrix& dC = g.grad_of(self);
    Eigen::Index at = 0;
    for (Var p : parts) {
      const auto h = g.val(p.id).rows();
      if (g.req(p)) g.accumulate(p.id, dC.middleRows(at, h));
      at += h;
    }
  });
}

Var Graph::slice_cols(Var a, int start, int count) {
  check(a);
  const Matrix& A = val(a.id);
  if (start < 0 || count < 0 || start + count > A.cols())
    throw std::invalid_argument("slice_cols: out of range");
  Matrix C = A.middleCols(start, count);
  return push(std::move(C), req(a), [a, start, count](Graph& g, int self) {
    const Matrix& x = g.val(a.id);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    d.middleCols(start, count) = g.grad_of(self);
    g.accumulate(a.id, d);
  });
}

Var Graph::slice_rows(Var a, int start, int count) {
  check(a);
  const Matrix& A = val(a.id);
  if (start < 0 || count < 0 || start + count > A.rows())
    throw std::invalid_argument("slice_rows: out of range");
  Matrix C = A.middleRows(start, count);
  return push(std::move(C), req(a), [a, start, count](Graph& g, int self) {
    const Matrix& x = g.val(a.id);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    d.middleRows(start, count) = g.grad_of(self);
    g.accumulate(a.id, d);
  });
}

Var Graph::row(Var a, int index) {
  check(a);
  const Matrix& A = val(a.id);
  if (index < 0 || index >= A.rows()) throw std::invalid_argument("row: out of range");
  Matrix C = A.row(index);
  return push(std::move(C), req(a), [a, index](Graph& g, int self) {
    const Matrix& x = g.val(a.id);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    d.row(index) = g.grad_of(self);
    g.accumulate(a.id, d);
  });
}

Var Graph::shift_rows(Var a, int offset) {
  check(a);
  const Matrix& A = val(a.id);
  const auto T = static_cast<int>(A.rows());
  Matrix C = Matrix::Zero(T, A.cols());
  // out[t] = A[t + offset] for t + offset in [0, T)
  const int lo = std::max(0, -offset);
  const int hi = std::min(T, T - offset);
  if (hi > lo) C.middleRows(lo, hi - lo) = A.middleRows(lo + offset, hi - lo);
  return push(std::move(C), req(a), [a, offset, lo, hi](Graph& g, int self) {
    const Matrix& x = g.val(a.id);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    if (hi > lo) d.middleRows(lo + offset, hi - lo) = g.grad_of(self).middleRows(lo, hi - lo);
    g.accumulate(a.id, d);
  });
}

Var Graph::row_taps(Var a, int half) {
  check(a);
  if (half < 0) throw std::invalid_argument("row_taps: negative half width");
  const Matrix& A = val(a.id);
  const auto T = static_cast<int>(A.rows());
  const auto n = static_cast<int>(A.cols());
  Matrix C = Matrix::Zero(T, n * (2 * half + 1));
  for (int k = 0; k <= 2 * half; ++k) {
    const int offset = k - half;
    const int lo = std::max(0, -offset), hi = std::min(T, T - offset);
    if (hi > lo) C.block(lo, k * n, hi - lo, n) = A.middleRows(lo + offset, hi - lo);
  }
  return push(std::move(C), req(a), [a, half, T, n](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Matrix d = Matrix::Zero(T, n);
    for (int k = 0; k <= 2 * half; ++k) {
      const int offset = k - half;
      const int lo = std::max(0, -offset), hi = std::min(T, T - offset);
      if (hi > lo) d.middleRows(lo + offset, hi - lo) += G.block(lo, k * n, hi - lo, n);
    }
    g.accumulate(a.id, d);
  });
}

Var Graph::softmax_column(Var a) {
  check(a);
  const Matrix& A = val(a.id);
  if (A.cols() != 1) throw std::invalid_argument("softmax_column: expects n x 1");
  Matrix C = (A.array() - A.maxCoeff()).exp().matrix();
  C /= C.sum();
  return push(std::move(C), req(a), [a](Graph& g, int self) {
    const Matrix& y = g.val(self);
    const Matrix& dy = g.grad_of(self);
    const double dot = y.cwiseProduct(dy).sum();
    g.accumulate(a.id, (y.array() * (dy.array() - dot)).matrix());
  });
}

Var Graph::log_softmax_rows(Var a) {
  check(a);
  const Matrix& A = val(a.id);
  Matrix C(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    const double lse = m + std::log((A.row(r).array() - m).exp().sum());
    C.row(r) = A.row(r).array() - lse;
  }
  return push(std::move(C), req(a), [a](Graph& g, int self) {
    const Matrix& y = g.val(self);
    const Matrix& dy = g.grad_of(self);
    Matrix d = dy;
    for (Eigen::Index r = 0; r < y.rows(); ++r)
      d.row(r) -= y.row(r).array().exp().matrix() * dy.row(r).sum();
    g.accumulate(a.id, d);
  });
}

Var Graph::mask(Var a, const Matrix& keep_scale) {
  check(a);
  Matrix C = val(a.id).cwiseProduct(keep_scale);
  return push(std::move(C), req(a), [a, keep_scale](Graph& g, int self) {
    g.accumulate(a.id, g.grad_of(self).cwiseProduct(keep_scale));
  });
}

Var Graph::custom_scalar(Var input, double value, Matrix grad) {
  check(input);
  Matrix C(1, 1);
  C(0, 0) = value;
  return push(std::move(C), req(input), [input, grad = std::move(grad)](Graph& g, int self) {
    g.accumulate(input.id, grad * g.grad_of(self)(0, 0));
  });
}

Var Graph::weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  Matrix C = Matrix::Zero(1, 1);
  bool any = false;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    check(scalars[i]);
    C(0, 0) += weights[i] * val(scalars[i].id)(0, 0);
    any = any || req(scalars[i]);
  }
  return push(std::move(C), any, [scalars, weights](Graph& g, int self) {
    const double d = g.grad_of(self)(0, 0);
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      if (weights[i] == 0.0 || !g.req(scalars[i])) continue;
      Matrix delta(1, 1);
      delta(0, 0) = weights[i] * d;
      g.accumulate(scalars[i].id, delta);
    }
  });
}

void Graph::backward(Var root) {
  check(root);
  if (!track_) throw std::logic_error("backward on a graph without gradient tracking");
  if (val(root.id).size() != 1) throw std::invalid_argument("backward: root must be scalar");
  Node& r = nodes_[static_cast<std::size_t>(root.id)];
  if (!r.requires_grad) return;
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, i);
    if (n.sink) {
      if (n.sink->size() == 0)
        *n.sink = n.grad;
      else
        *n.sink += n.grad;
    }
  }
}

}  // namespace selftrans::ad
