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

#include "vbl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vbl/errors.hpp"

namespace vbl {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(data));
}

std::size_t Tensor::rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back();
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Tensor value, bool requires_grad, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(fn)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
                 const char* op_name) {
  if (check_finite_ && !value.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op_name);
  bool needs = false;
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw Error(std::string(op_name) + ": operands live on different tapes");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
}

Tensor* Tape::grad_sink(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty() && n.value.numel() > 0) n.grad = Tensor(n.value.shape(), 0.0);
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw Error("backward: loss lives on another tape");
  if (loss.value().numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  for (Node& n : nodes_) n.grad = Tensor{};
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Tensor(loss.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Copy: the rule may grow other grad buffers but never this node's.
    const Tensor g = n.grad;
    n.backward(*this, g);
  }
  if (check_finite_) {
    for (const Node& n : nodes_)
      if (!n.grad.empty() && !n.grad.all_finite())
        throw NumericError("non-finite gradient detected during backward");
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

bool Tape::has_grad(Var v) const { return !nodes_[v.id()].grad.empty(); }

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// Ops

namespace {

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

// Result shape of a broadcasting binary op.
const Shape& binary_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (is_scalar(b)) return a.shape();
  if (is_scalar(a)) return b.shape();
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()) + " are not broadcastable");
}

// Adds `g` (shaped like the op output) into the sink of an operand, summing
// when the operand was broadcast from a single element.
template <typename Term>
void accumulate_into(Tape& tape, std::size_t id, const Tensor& g, Term&& term) {
  Tensor* sink = tape.grad_sink(id);
  if (!sink) return;
  auto dst = sink->data();
  if (dst.size() == g.numel()) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += term(i);
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.numel(); ++i) acc += term(i);
    dst[0] += acc;
  }
}

inline double bval(const Tensor& t, std::size_t i) { return t.numel() == 1 ? t[0] : t[i]; }

template <typename Fwd>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, Fwd f) {
  const Shape& s = binary_shape(a, b, op);
  Tensor out(s);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(bval(a, i), bval(b, i));
  return out;
}

template <typename Fwd>
Tensor map_unary(const Tensor& a, Fwd f) {
  Tensor out(a.shape());
  const auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

void check_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

}  // namespace

Var add(Var a, Var b) {
  const std::size_t ia = a.id(), ib = b.id();
  Tensor out = map_binary(a.value(), b.value(), "add", [](double x, double y) { return x + y; });
  return a.tape().record(std::move(out), {a, b},
      [ia, ib](Tape& t, const Tensor& g) {
        accumulate_into(t, ia, g, [&](std::size_t i) { return g[i]; });
        accumulate_into(t, ib, g, [&](std::size_t i) { return g[i]; });
      }, "add");
}

Var sub(Var a, Var b) {
  const std::size_t ia = a.id(), ib = b.id();
  Tensor out = map_binary(a.value(), b.value(), "sub", [](double x, double y) { return x - y; });
  return a.tape().record(std::move(out), {a, b},
      [ia, ib](Tape& t, const Tensor& g) {
        accumulate_into(t, ia, g, [&](std::size_t i) { return g[i]; });
        accumulate_into(t, ib, g, [&](std::size_t i) { return -g[i]; });
      }, "sub");
}

Var mul(Var a, Var b) {
  const std::size_t ia = a.id(), ib = b.id();
  Tensor out = map_binary(a.value(), b.value(), "mul", [](double x, double y) { return x * y; });
  return a.tape().record(std::move(out), {a, b},
      [ia, ib](Tape& t, const Tensor& g) {
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        accumulate_into(t, ia, g, [&](std::size_t i) { return g[i] * bval(bv, i); });
        accumulate_into(t, ib, g, [&](std::size_t i) { return g[i] * bval(av, i); });
      }, "mul");
}

Var div(Var a, Var b) {
  for (double v : b.value().data())
    if (v == 0.0) throw DomainError("div: division by zero");
  const std::size_t ia = a.id(), ib = b.id();
  Tensor out = map_binary(a.value(), b.value(), "div", [](double x, double y) { return x / y; });
  return a.tape().record(std::move(out), {a, b},
      [ia, ib](Tape& t, const Tensor& g) {
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        accumulate_into(t, ia, g, [&](std::size_t i) { return g[i] / bval(bv, i); });
        accumulate_into(t, ib, g, [&](std::size_t i) {
          const double y = bval(bv, i);
          return -g[i] * bval(av, i) / (y * y);
        });
      }, "div");
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double k) {
  const std::size_t ia = a.id();
  Tensor out = map_unary(a.value(), [k](double x) { return k * x; });
  return a.tape().record(std::move(out), {a},
      [ia, k](Tape& t, const Tensor& g) {
        accumulate_into(t, ia, g, [&](std::size_t i) { return k * g[i]; });
      }, "scale");
}

Var shift(Var a, double k) {
  const std::size_t ia = a.id();
  Tensor out = map_unary(a.value(), [k](double x) { return x + k; });
  return a.tape().record(std::move(out), {a},
      [ia](Tape& t, const Tensor& g) {
        accumulate_into(t, ia, g, [&](std::size_t i) { return g[i]; });
      }, "shift");
}

namespace {

// Elementwise op with derivative f'(x, y) where y = f(x).
template <typename Fwd, typename Deriv>
Var elementwise(Var a, const char* name, Fwd f, Deriv d) {
  const std::size_t ia = a.id();
  Tensor out = map_unary(a.value(), f);
  Tape& tape = a.tape();
  // The output id is the next slot on the tape.
  const std::size_t io = tape.size();
  return tape.record(std::move(out), {a},
      [ia, io, d](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(io);
        accumulate_into(t, ia, g, [&](std::size_t i) { return g[i] * d(x[i], y[i]); });
      }, name);
}

}  // namespace

Var exp(Var a) {
  return elementwise(a, "exp", [](double x) { return std::exp(x); },
                     [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data())
    if (!(v > 0.0)) throw DomainError("log: argument must be positive");
  return elementwise(a, "log", [](double x) { return std::log(x); },
                     [](double x, double) { return 1.0 / x; });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace

Var sigmoid(Var a) {
  return elementwise(a, "sigmoid", stable_sigmoid,
                     [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return elementwise(a, "tanh", [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Var leaky_relu(Var a, double slope) {
  return elementwise(a, "leaky_relu",
                     [slope](double x) { return x > 0 ? x : slope * x; },
                     [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var softplus(Var a) {
  return elementwise(a, "softplus", stable_softplus,
                     [](double x, double) { return stable_sigmoid(x); });
}

Var square(Var a) {
  return elementwise(a, "square", [](double x) { return x * x; },
                     [](double x, double) { return 2.0 * x; });
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_matrix(A, "matmul");
  check_matrix(B, "matmul");
  const std::size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
  if (B.shape()[0] != k)
    throw ShapeError("matmul: inner dimensions differ " + shape_str(A.shape()) + " x " +
                     shape_str(B.shape()));
  Tensor C(Shape{m, n}, 0.0);
  const double* pa = A.data().data();
  const double* pb = B.data().data();
  double* pc = C.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {a, b},
      [ia, ib, m, k, n](Tape& t, const Tensor& g) {
        const double* pg = g.data().data();
        if (Tensor* da = t.grad_sink(ia)) {
          // dA = dC * B^T
          const double* pb = t.value(ib).data().data();
          double* pda = da->data().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* grow = pg + i * n;
              const double* brow = pb + p * n;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              pda[i * k + p] += acc;
            }
        }
        if (Tensor* db = t.grad_sink(ib)) {
          // dB = A^T * dC
          const double* pa = t.value(ia).data().data();
          double* pdb = db->data().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = pa[i * k + p];
              if (aip == 0.0) continue;
              const double* grow = pg + i * n;
              double* dbrow = pdb + p * n;
              for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * grow[j];
            }
        }
      }, "matmul");
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(acc), {a},
      [ia](Tape& t, const Tensor& g) {
        const double gv = g[0];
        accumulate_into(t, ia, t.value(ia), [&](std::size_t) { return gv; });
      }, "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().numel());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

namespace {

// Splits a shape around `axis` into (outer, extent, inner) block sizes.
void axis_blocks(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& extent,
                 std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  extent = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
}

}  // namespace

Var sum(Var a, std::size_t axis) {
  const Tensor& A = a.value();
  if (axis >= A.rank())
    throw ShapeError("sum: axis " + std::to_string(axis) + " out of range for " + shape_str(A.shape()));
  std::size_t outer, extent, inner;
  axis_blocks(A.shape(), axis, outer, extent, inner);
  Shape out_shape = A.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t e = 0; e < extent; ++e)
      for (std::size_t i = 0; i < inner; ++i)
        out[o * inner + i] += A[(o * extent + e) * inner + i];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
      [ia, outer, extent, inner](Tape& t, const Tensor& g) {
        Tensor* sink = t.grad_sink(ia);
        if (!sink) return;
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t e = 0; e < extent; ++e)
            for (std::size_t i = 0; i < inner; ++i)
              (*sink)[(o * extent + e) * inner + i] += g[o * inner + i];
      }, "sum_axis");
}

Var mean(Var a, std::size_t axis) {
  if (axis >= a.value().rank())
    throw ShapeError("mean: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(a.shape()));
  const std::size_t extent = a.shape()[axis];
  if (extent == 0) throw ShapeError("mean over an empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(extent));
}

Var broadcast_rows(Var v, std::size_t rows) {
  const Tensor& V = v.value();
  if (V.rank() != 1) throw ShapeError("broadcast_rows: expected a vector, got " + shape_str(V.shape()));
  const std::size_t n = V.numel();
  Tensor out(Shape{rows, n});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(V.data().begin(), V.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * n));
  const std::size_t iv = v.id();
  return v.tape().record(std::move(out), {v},
      [iv, rows, n](Tape& t, const Tensor& g) {
        Tensor* sink = t.grad_sink(iv);
        if (!sink) return;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) (*sink)[j] += g[r * n + j];
      }, "broadcast_rows");
}

Var concat_cols(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_matrix(A, "concat_cols");
  check_matrix(B, "concat_cols");
  if (A.rows() != B.rows())
    throw ShapeError("concat_cols: row counts differ " + shape_str(A.shape()) + " vs " +
                     shape_str(B.shape()));
  const std::size_t r = A.rows(), ca = A.cols(), cb = B.cols();
  Tensor out(Shape{r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = A[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = B[i * cb + j];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
      [ia, ib, r, ca, cb](Tape& t, const Tensor& g) {
        if (Tensor* da = t.grad_sink(ia))
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < ca; ++j) (*da)[i * ca + j] += g[i * (ca + cb) + j];
        if (Tensor* db = t.grad_sink(ib))
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < cb; ++j) (*db)[i * cb + j] += g[i * (ca + cb) + ca + j];
      }, "concat_cols");
}

Var slice_cols(Var a, std::size_t start, std::size_t len) {
  const Tensor& A = a.value();
  check_matrix(A, "slice_cols");
  const std::size_t r = A.rows(), c = A.cols();
  if (start + len > c)
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") exceeds " + std::to_string(c) + " columns");
  Tensor out(Shape{r, len});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < len; ++j) out[i * len + j] = A[i * c + start + j];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
      [ia, r, c, start, len](Tape& t, const Tensor& g) {
        Tensor* sink = t.grad_sink(ia);
        if (!sink) return;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < len; ++j) (*sink)[i * c + start + j] += g[i * len + j];
      }, "slice_cols");
}

Var log_softmax_rows(Var a) {
  const Tensor& A = a.value();
  check_matrix(A, "log_softmax_rows");
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double mx = A[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(A[i * c + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = A[i * c + j] - lse;
  }
  const std::size_t ia = a.id();
  const std::size_t io = a.tape().size();
  return a.tape().record(std::move(out), {a},
      [ia, io, r, c](Tape& t, const Tensor& g) {
        Tensor* sink = t.grad_sink(ia);
        if (!sink) return;
        const Tensor& y = t.value(io);
        for (std::size_t i = 0; i < r; ++i) {
          double gs = 0.0;
          for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
          for (std::size_t j = 0; j < c; ++j)
            (*sink)[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
        }
      }, "log_softmax_rows");
}

Var gather_cols(Var a, std::span<const std::size_t> index) {
  const Tensor& A = a.value();
  check_matrix(A, "gather_cols");
  const std::size_t r = A.rows(), c = A.cols();
  if (index.size() != r) throw ShapeError("gather_cols: one index per row required");
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor out(Shape{r});
  for (std::size_t i = 0; i < r; ++i) {
    if (idx[i] >= c) throw ShapeError("gather_cols: index out of range");
    out[i] = A[i * c + idx[i]];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
      [ia, c, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor* sink = t.grad_sink(ia);
        if (!sink) return;
        for (std::size_t i = 0; i < idx.size(); ++i) (*sink)[i * c + idx[i]] += g[i];
      }, "gather_cols");
}

Var gather_rows(Var table, std::span<const std::size_t> index) {
  const Tensor& W = table.value();
  check_matrix(W, "gather_rows");
  const std::size_t n = W.cols();
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor out(Shape{idx.size(), n});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= W.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(W.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * n), n,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  const std::size_t iw = table.id();
  return table.tape().record(std::move(out), {table},
      [iw, n, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor* sink = t.grad_sink(iw);
        if (!sink) return;
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < n; ++j) (*sink)[idx[i] * n + j] += g[i * n + j];
      }, "gather_rows");
}

Var grad_gate(Var t, const Tensor& mask) {
  if (mask.shape() != t.shape() && mask.numel() != 1)
    throw ShapeError("grad_gate: mask shape " + shape_str(mask.shape()) +
                     " not broadcastable to " + shape_str(t.shape()));
  for (double m : mask.data())
    if (m != 0.0 && m != 1.0) throw DomainError("grad_gate: mask entries must be 0 or 1");
  const std::size_t it = t.id();
  return t.tape().record(t.value(), {t},
      [it, mask](Tape& tape, const Tensor& g) {
        accumulate_into(tape, it, g, [&](std::size_t i) { return g[i] * bval(mask, i); });
      }, "grad_gate");
}

Var stop_gradient(Var t) { return t.tape().constant(t.value()); }

}  // namespace vbl
