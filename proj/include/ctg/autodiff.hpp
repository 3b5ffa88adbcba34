#pragma once

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// A Tape records every op applied to its Vars. Parameters enter the tape as
// leaves that alias the Parameter's storage; backward() accumulates directly
// into Parameter::grad, so several tapes (one per example in a batch) can be
// run back to back before a single sgd_step.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ctg/error.hpp"
#include "ctg/tensor.hpp"

namespace ctg {

template <typename S>
struct Parameter {
  Parameter(std::string n, Tensor<S> v, S multiplier = S(1))
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()),
        lr_multiplier(multiplier) {
    if (!(multiplier > S(0))) throw std::invalid_argument("parameter " + name + ": multiplier must be > 0");
  }

  void zero_grad() { grad.fill(S(0)); }

  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  S lr_multiplier;
};

template <typename S>
class Tape;

// Handle to a node on a tape.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<S>& value() const { return tape->value(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

template <typename S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  // With gradients disabled, parameter leaves are recorded as constants and
  // no backward closures are kept.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Tensor<S> t) {
    nodes_.push_back(Node{std::move(t), {}, false, nullptr, false, {}});
    return {this, nodes_.size() - 1};
  }

  Var<S> param(Parameter<S>& p) {
    nodes_.push_back(Node{{}, {}, false, &p, grad_enabled_, {}});
    return {this, nodes_.size() - 1};
  }

  // Records an op. The backward closure is dropped when no input needs a gradient.
  Var<S> record(Tensor<S> value, std::initializer_list<Var<S>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return record_impl(std::move(value), needs, std::move(backward));
  }
  Var<S> record(Tensor<S> value, const std::vector<Var<S>>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return record_impl(std::move(value), needs, std::move(backward));
  }

  const Tensor<S>& value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient accumulator for a node; allocated (zeroed) on first access.
  Tensor<S>& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.param) return n.param->grad;
    if (!n.grad_ready) {
      const auto& v = n.value;
      n.grad = Tensor<S>(v.rows(), v.cols());
      n.grad_ready = true;
    }
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every reached op once, in reverse order.
  void backward(Var<S> loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
    const auto& lv = value(loss.id);
    if (lv.size() != 1)
      throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(lv));
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss.id)[0] += S(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.param || !n.grad_ready || !n.backward) continue;
      n.backward(*this, i);
    }
  }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool grad_ready;
    Parameter<S>* param;
    bool requires_grad;
    Backward backward;
  };

  Var<S> record_impl(Tensor<S> value, bool needs, Backward backward) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, needs, needs ? std::move(backward) : Backward{}});
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

template <typename S>
void backward(Tape<S>& tape, Var<S> loss) {
  tape.backward(loss);
}

namespace detail {

template <typename S>
[[noreturn]] void shape_mismatch(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

template <typename S>
void accumulate(Tape<S>& tape, Var<S> v, const Tensor<S>& g) {
  if (!tape.requires_grad(v.id)) return;
  auto& dst = tape.grad(v.id).data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

// out += a * b with a (n x k), b (k x m).
template <typename S>
void gemm_acc(const S* a, const S* b, S* out, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    S* orow = out + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = a[i * k + p];
      if (av == S(0)) continue;
      const S* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

inline constexpr double kDistanceEps = 1e-12;

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows()) detail::shape_mismatch("matmul", A, B);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor<S> out(n, m);
  detail::gemm_acc(A.data().data(), B.data().data(), out.data().data(), n, k, m);
  return a.tape->record(std::move(out), {a, b}, [a, b, n, k, m](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(a.id);
    const auto& B = t.value(b.id);
    if (t.requires_grad(a.id)) {
      auto& GA = t.grad(a.id);  // G (n x m) * B^T (m x k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          S acc = 0;
          const S* grow = G.row_ptr(i);
          const S* brow = B.row_ptr(p);
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          GA(i, p) += acc;
        }
    }
    if (t.requires_grad(b.id)) {
      auto& GB = t.grad(b.id);  // A^T (k x n) * G (n x m)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const S av = A(i, p);
          if (av == S(0)) continue;
          S* gbrow = GB.row_ptr(p);
          const S* grow = G.row_ptr(i);
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

// a + b, where b has a's shape or is a single row broadcast over a's rows.
template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  const bool broadcast = B.rows() == 1 && A.rows() != 1;
  if (A.cols() != B.cols() || (!broadcast && A.rows() != B.rows())) detail::shape_mismatch("add", A, B);
  Tensor<S> out = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[broadcast ? i % cols : i];
  return a.tape->record(std::move(out), {a, b}, [a, b, broadcast, cols](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    detail::accumulate(t, a, G);
    if (!t.requires_grad(b.id)) return;
    auto& GB = t.grad(b.id);
    for (std::size_t i = 0; i < G.size(); ++i) GB[broadcast ? i % cols : i] += G[i];
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (!A.same_shape(B)) detail::shape_mismatch("sub", A, B);
  Tensor<S> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    detail::accumulate(t, a, G);
    if (!t.requires_grad(b.id)) return;
    auto& GB = t.grad(b.id);
    for (std::size_t i = 0; i < G.size(); ++i) GB[i] -= G[i];
  });
}

// Elementwise product.
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (!A.same_shape(B)) detail::shape_mismatch("mul", A, B);
  Tensor<S> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(a.id);
    const auto& B = t.value(b.id);
    if (t.requires_grad(a.id)) {
      auto& GA = t.grad(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * B[i];
    }
    if (t.requires_grad(b.id)) {
      auto& GB = t.grad(b.id);
      for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i] * A[i];
    }
  });
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
  Tensor<S> out = a.value();
  for (auto& v : out.data()) v *= c;
  return a.tape->record(std::move(out), {a}, [a, c](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += c * G[i];
  });
}

template <typename S>
Var<S> add_const(Var<S> a, S c) {
  Tensor<S> out = a.value();
  for (auto& v : out.data()) v += c;
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, std::size_t self) {
    detail::accumulate(t, a, t.grad(self));
  });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  const auto& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  Tensor<S> out(m, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = A(i, j);
  return a.tape->record(std::move(out), {a}, [a, n, m](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) GA(i, j) += G(j, i);
  });
}

// ---------------------------------------------------------------------------
// Structural ops

// Concatenation along the last axis.
template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) detail::shape_mismatch("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Tensor<S> out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& P = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(P.row_ptr(r), P.row_ptr(r) + P.cols(), out.row_ptr(r) + off);
    off += P.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [parts, rows](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t c = t.value(p.id).cols();
      if (t.requires_grad(p.id)) {
        auto& GP = t.grad(p.id);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) GP(r, j) += G(r, off + j);
      }
      off += c;
    }
  });
}

// Stacks inputs vertically.
template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) detail::shape_mismatch("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  std::vector<S> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  Tensor<S> out({rows, cols}, std::move(data));
  return parts.front().tape->record(std::move(out), parts, [parts](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = t.value(p.id).size();
      if (t.requires_grad(p.id)) {
        auto& GP = t.grad(p.id);
        for (std::size_t i = 0; i < n; ++i) GP[i] += G[off + i];
      }
      off += n;
    }
  });
}

template <typename S>
Var<S> slice_cols(Var<S> a, std::size_t begin, std::size_t count) {
  const auto& A = a.value();
  if (count == 0 || begin + count > A.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside shape " + shape_str(A));
  const std::size_t rows = A.rows();
  Tensor<S> out(rows, count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(A.row_ptr(r) + begin, A.row_ptr(r) + begin + count, out.row_ptr(r));
  return a.tape->record(std::move(out), {a}, [a, begin, count, rows](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) GA(r, begin + j) += G(r, j);
  });
}

template <typename S>
Var<S> slice_rows(Var<S> a, std::size_t begin, std::size_t count) {
  const auto& A = a.value();
  if (count == 0 || begin + count > A.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside shape " + shape_str(A));
  const std::size_t cols = A.cols();
  std::vector<S> data(A.row_ptr(begin), A.row_ptr(begin) + count * cols);
  Tensor<S> out({count, cols}, std::move(data));
  return a.tape->record(std::move(out), {a}, [a, begin, count, cols](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    S* dst = GA.row_ptr(begin);
    for (std::size_t i = 0; i < count * cols; ++i) dst[i] += G[i];
  });
}

// out[i] = a[indices[i]]; repeated indices accumulate in backward.
template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<std::size_t> indices) {
  const auto& A = a.value();
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t cols = A.cols();
  Tensor<S> out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= A.rows())
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " outside shape " + shape_str(A));
    std::copy(A.row_ptr(indices[i]), A.row_ptr(indices[i]) + cols, out.row_ptr(i));
  }
  return a.tape->record(std::move(out), {a}, [a, idx = std::move(indices), cols](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      S* dst = GA.row_ptr(idx[i]);
      const S* src = G.row_ptr(i);
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
  });
}

// Broadcasts a single row to `count` rows.
template <typename S>
Var<S> repeat_rows(Var<S> a, std::size_t count) {
  const auto& A = a.value();
  if (A.rows() != 1 || count == 0)
    throw ShapeError("repeat_rows: expected a single row, got " + shape_str(A));
  const std::size_t cols = A.cols();
  Tensor<S> out(count, cols);
  for (std::size_t r = 0; r < count; ++r) std::copy(A.row_ptr(0), A.row_ptr(0) + cols, out.row_ptr(r));
  return a.tape->record(std::move(out), {a}, [a, count, cols](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t j = 0; j < cols; ++j) GA[j] += G(r, j);
  });
}

// ---------------------------------------------------------------------------
// Reductions

// axis 0 reduces rows (result 1 x cols); axis 1 reduces columns (result rows x 1).
template <typename S>
Var<S> sum(Var<S> a, int axis) {
  const auto& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  if (axis != 0 && axis != 1) throw ShapeError("sum: axis must be 0 or 1");
  Tensor<S> out = axis == 0 ? Tensor<S>(1, m) : Tensor<S>(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[axis == 0 ? j : i] += A(i, j);
  return a.tape->record(std::move(out), {a}, [a, axis, n, m](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    auto& GA = t.grad(a.id);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) GA(i, j) += G[axis == 0 ? j : i];
  });
}

template <typename S>
Var<S> mean(Var<S> a, int axis) {
  const std::size_t count = axis == 0 ? a.rows() : a.cols();
  return scale(sum(a, axis), S(1) / static_cast<S>(count));
}

template <typename S>
Var<S> sum_all(Var<S> a) {
  S acc = 0;
  for (auto v : a.value().data()) acc += v;
  return a.tape->record(Tensor<S>::scalar(acc), {a}, [a](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)[0];
    for (auto& v : t.grad(a.id).data()) v += g;
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

namespace detail {

// y = f(x); backward uses dy/dx expressed through (x, y).
template <typename S, typename F, typename D>
Var<S> unary(Var<S> a, F f, D dfdx) {
  Tensor<S> out = a.value();
  for (auto& v : out.data()) v = f(v);
  return a.tape->record(std::move(out), {a}, [a, dfdx](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& X = t.value(a.id);
    const auto& Y = t.value(self);
    auto& GA = t.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * dfdx(X[i], Y[i]);
  });
}

}  // namespace detail

template <typename S>
Var<S> sigmoid(Var<S> a) {
  return detail::unary(
      a, [](S x) { return S(1) / (S(1) + std::exp(-x)); }, [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> tanh(Var<S> a) {
  return detail::unary(
      a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> relu(Var<S> a) {
  return detail::unary(
      a, [](S x) { return x > S(0) || std::isnan(x) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

// max(x, c) elementwise; the subgradient at x == c is 0. NaN passes through.
template <typename S>
Var<S> max_const(Var<S> a, S c) {
  return detail::unary(
      a, [c](S x) { return x > c || std::isnan(x) ? x : c; }, [c](S x, S) { return x > c ? S(1) : S(0); });
}

// Softmax along `axis` (1: each row sums to one, 0: each column sums to one).
template <typename S>
Var<S> softmax(Var<S> a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const auto& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  const std::size_t groups = axis == 1 ? n : m, len = axis == 1 ? m : n;
  auto at = [axis, m](std::size_t g, std::size_t i) { return axis == 1 ? g * m + i : i * m + g; };
  Tensor<S> out(n, m);
  for (std::size_t g = 0; g < groups; ++g) {
    S mx = A[at(g, 0)];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, A[at(g, i)]);
    S z = 0;
    for (std::size_t i = 0; i < len; ++i) z += out[at(g, i)] = std::exp(A[at(g, i)] - mx);
    for (std::size_t i = 0; i < len; ++i) out[at(g, i)] /= z;
  }
  return a.tape->record(std::move(out), {a}, [a, groups, len, at](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    auto& GA = t.grad(a.id);
    for (std::size_t g = 0; g < groups; ++g) {
      S dot = 0;
      for (std::size_t i = 0; i < len; ++i) dot += G[at(g, i)] * Y[at(g, i)];
      for (std::size_t i = 0; i < len; ++i) GA[at(g, i)] += Y[at(g, i)] * (G[at(g, i)] - dot);
    }
  });
}

// Each row divided by its Euclidean norm.
template <typename S>
Var<S> l2_normalize_rows(Var<S> a) {
  const auto& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  Tensor<S> out(n, m);
  std::vector<S> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    S ss = 0;
    for (std::size_t j = 0; j < m; ++j) ss += A(i, j) * A(i, j);
    norms[i] = std::sqrt(ss + static_cast<S>(detail::kDistanceEps));
    for (std::size_t j = 0; j < m; ++j) out(i, j) = A(i, j) / norms[i];
  }
  return a.tape->record(std::move(out), {a}, [a, norms, n, m](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    auto& GA = t.grad(a.id);
    for (std::size_t i = 0; i < n; ++i) {
      S dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += Y(i, j) * G(i, j);
      for (std::size_t j = 0; j < m; ++j) GA(i, j) += (G(i, j) - Y(i, j) * dot) / norms[i];
    }
  });
}

// out(k, t) = || A_k - B_t ||, computed as sqrt(sum d^2 + eps) so the
// gradient stays finite when two rows coincide.
template <typename S>
Var<S> pairwise_distance(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.cols()) detail::shape_mismatch("pairwise_distance", A, B);
  const std::size_t K = A.rows(), T = B.rows(), d = A.cols();
  Tensor<S> out(K, T);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t t = 0; t < T; ++t) {
      S ss = 0;
      const S* ar = A.row_ptr(k);
      const S* br = B.row_ptr(t);
      for (std::size_t j = 0; j < d; ++j) {
        const S diff = ar[j] - br[j];
        ss += diff * diff;
      }
      out(k, t) = std::sqrt(ss + static_cast<S>(detail::kDistanceEps));
    }
  return a.tape->record(std::move(out), {a, b}, [a, b, K, T, d](Tape<S>& tp, std::size_t self) {
    const auto& G = tp.grad(self);
    const auto& Dist = tp.value(self);
    const auto& A = tp.value(a.id);
    const auto& B = tp.value(b.id);
    const bool ga = tp.requires_grad(a.id), gb = tp.requires_grad(b.id);
    Tensor<S>* GA = ga ? &tp.grad(a.id) : nullptr;
    Tensor<S>* GB = gb ? &tp.grad(b.id) : nullptr;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < T; ++t) {
        const S c = G(k, t) / Dist(k, t);
        if (c == S(0)) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const S diff = c * (A(k, j) - B(t, j));
          if (ga) (*GA)(k, j) += diff;
          if (gb) (*GB)(t, j) -= diff;
        }
      }
  });
}

// Distance between two equal-length vectors, as a 1 x 1 tensor.
template <typename S>
Var<S> euclidean_distance(Var<S> a, Var<S> b) {
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols())
    detail::shape_mismatch("euclidean_distance", a.value(), b.value());
  return pairwise_distance(a, b);
}

// ---------------------------------------------------------------------------
// Optimizer

struct SgdConfig {
  double base_rate = 0.05;
  double decay = 0.1;
  int decay_period = 33;
  int batch_size = 120;
  int max_epochs = 100;

  void validate() const {
    if (!(base_rate > 0)) throw std::invalid_argument("sgd: base rate must be > 0");
    if (!(decay > 0 && decay <= 1)) throw std::invalid_argument("sgd: decay must lie in (0, 1]");
    if (decay_period < 1) throw std::invalid_argument("sgd: decay period must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("sgd: batch size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("sgd: max epochs must be >= 1");
  }

  // base * decay^floor(epoch / period)
  double rate(int epoch) const { return base_rate * std::pow(decay, epoch / decay_period); }
};

// p -= rate(epoch) * multiplier(p) * grad(p), then zero the gradients.
template <typename S>
void sgd_step(const std::vector<Parameter<S>*>& params, int epoch, const SgdConfig& config) {
  const double rate = config.rate(epoch);
  for (auto* p : params) {
    const S step = static_cast<S>(rate * static_cast<double>(p->lr_multiplier));
    auto& v = p->value.data();
    const auto& g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * g[i];
    p->zero_grad();
  }
}

}  // namespace ctg
