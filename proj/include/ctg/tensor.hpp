#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ctg/error.hpp"

namespace ctg {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major tensor. Every op in the library works on rank-2 views; a
// rank-1 tensor of length n is treated as a 1 x n row.
template <typename S>
class Tensor {
 public:
  using value_type = S;

  Tensor() : shape_{1, 1}, data_(1, S(0)) {}
  Tensor(std::size_t rows, std::size_t cols, S fill = S(0))
      : shape_{rows, cols}, data_(rows * cols, fill) {
    check_shape();
  }
  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor row(std::vector<S> values) {
    const auto n = values.size();
    return Tensor({1, n}, std::move(values));
  }
  static Tensor scalar(S v) { return Tensor({1, 1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.size() == 1 ? 1 : shape_[0]; }
  std::size_t cols() const { return shape_.back(); }
  std::size_t size() const { return data_.size(); }

  S& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  S operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  S& operator[](std::size_t i) { return data_[i]; }
  S operator[](std::size_t i) const { return data_[i]; }

  std::vector<S>& data() { return data_; }
  const std::vector<S>& data() const { return data_; }
  S* row_ptr(std::size_t r) { return data_.data() + r * cols(); }
  const S* row_ptr(std::size_t r) const { return data_.data() + r * cols(); }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

  bool operator==(const Tensor& o) const = default;

 private:
  void check_shape() const {
    if (shape_.empty()) throw ShapeError("tensor: empty shape");
    for (auto d : shape_)
      if (d == 0) throw ShapeError("tensor: zero dimension in shape " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<S> data_;
};

template <typename S>
std::string shape_str(const Tensor<S>& t) {
  return shape_str(Shape{t.rows(), t.cols()});
}

// Uniform in [lo, hi) drawn from the engine.
template <typename S, typename Rng>
S uniform(Rng& rng, S lo, S hi) {
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  return static_cast<S>(dist(rng));
}

template <typename S, typename Rng>
Tensor<S> random_uniform(std::size_t rows, std::size_t cols, S lo, S hi, Rng& rng) {
  Tensor<S> t(rows, cols);
  for (auto& v : t.data()) v = uniform<S>(rng, lo, hi);
  return t;
}

}  // namespace ctg
