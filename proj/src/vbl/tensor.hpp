/*
 * Copyright 2026 The vbilstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense f64 tensors and a define-by-run reverse-mode tape.
//
// A Tape owns every intermediate value of one forward pass. Ops are free
// functions over Var handles; each records its value and a backward rule.
// Nodes created only from constants are themselves constant and carry no
// backward rule, so evaluation-only passes cost no gradient bookkeeping.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vbl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Leading dimension of a matrix (1 for rank < 2).
  std::size_t rows() const noexcept;
  /// Trailing dimension (numel for rank 1, 1 for scalars).
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// Value of a one-element tensor.
  double item() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Backward rule: receives the gradient of the node's output and pushes
  /// contributions into its inputs through `Tape::grad_sink`.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  /// Records an op output. `fn` is dropped when no input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
             const char* op_name);

  /// Runs reverse accumulation from a scalar loss. Gradients from any previous
  /// call are discarded first, so repeated calls give identical results.
  void backward(Var loss);

  /// Gradient of `v` after `backward`; all zeros if nothing reached it.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const;

  /// Accumulation buffer for node `id`, or nullptr if it is constant.
  Tensor* grad_sink(std::size_t id);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool check_finite() const noexcept { return check_finite_; }
  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn fn);

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

// ---------------------------------------------------------------------------
// Primitive ops. Binary elementwise ops accept equal shapes or a one-element
// operand on either side; anything else is a ShapeError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double k);
Var shift(Var a, double k);

Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var softplus(Var a);
Var square(Var a);

Var matmul(Var a, Var b);

Var sum(Var a);
Var sum(Var a, std::size_t axis);
Var mean(Var a);
Var mean(Var a, std::size_t axis);

/// [n] -> [rows x n], repeating the vector on every row.
Var broadcast_rows(Var v, std::size_t rows);
/// [r x a], [r x b] -> [r x (a+b)].
Var concat_cols(Var a, Var b);
/// Columns [start, start+len) of a matrix.
Var slice_cols(Var a, std::size_t start, std::size_t len);
/// Row-wise log-softmax of a matrix.
Var log_softmax_rows(Var a);
/// out[r] = a[r, index[r]].
Var gather_cols(Var a, std::span<const std::size_t> index);
/// out[r, :] = table[index[r], :]. Used as an embedding lookup.
Var gather_rows(Var table, std::span<const std::size_t> index);

/// Forward identity; the backward pass multiplies the incoming gradient by a
/// constant {0,1} mask (same shape as `t`, or one element).
Var grad_gate(Var t, const Tensor& mask);
/// Forward identity with no gradient at all.
Var stop_gradient(Var t);

// Operator sugar.
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace vbl
