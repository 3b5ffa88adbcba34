#pragma once

// Layers built from autodiff primitives, plus the named parameter store
// shared by every network in the model.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ctg/autodiff.hpp"

namespace ctg {

template <typename S>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<S>& add(const std::string& name, Tensor<S> value, S multiplier = S(1)) {
    if (index_.count(name)) throw std::invalid_argument("parameter store: duplicate name " + name);
    params_.push_back(std::make_unique<Parameter<S>>(name, std::move(value), multiplier));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  // Uniform in +-1/sqrt(fan_in).
  template <typename Rng>
  Parameter<S>& add_uniform(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                            Rng& rng, S multiplier = S(1)) {
    const S bound = S(1) / std::sqrt(static_cast<S>(fan_in));
    return add(name, random_uniform<S>(rows, cols, -bound, bound, rng), multiplier);
  }

  Parameter<S>& add_zeros(const std::string& name, std::size_t rows, std::size_t cols, S multiplier = S(1)) {
    return add(name, Tensor<S>(rows, cols), multiplier);
  }

  Parameter<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  std::vector<Parameter<S>*> all() const {
    std::vector<Parameter<S>*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::vector<Tensor<S>> snapshot() const {
    std::vector<Tensor<S>> out;
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }
  void restore(const std::vector<Tensor<S>>& values) {
    if (values.size() != params_.size()) throw std::invalid_argument("parameter store: snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
  }

  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::map<std::string, std::size_t> index_;
};

// y = x W + b; W is in x out, b a single row.
template <typename S>
struct Linear {
  Parameter<S>* weight = nullptr;
  Parameter<S>* bias = nullptr;

  Linear() = default;
  template <typename Rng>
  Linear(ParameterStore<S>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         S multiplier = S(1))
      : weight(&store.add_uniform(name + ".weight", in, out, in, rng, multiplier)),
        bias(&store.add_uniform(name + ".bias", 1, out, in, rng, multiplier)) {}

  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }

  Var<S> operator()(Tape<S>& tape, Var<S> x) const {
    if (x.cols() != in_dim())
      throw ShapeError("linear " + weight->name + ": input " + shape_str(x.value()) + " vs weight " +
                       shape_str(weight->value));
    return add(matmul(x, tape.param(*weight)), tape.param(*bias));
  }

  void zero_init() {
    weight->value.fill(S(0));
    bias->value.fill(S(0));
  }
};

// Two dense layers with a rectified-linear hidden activation.
template <typename S>
struct Mlp2 {
  Linear<S> hidden;
  Linear<S> output;

  Mlp2() = default;
  template <typename Rng>
  Mlp2(ParameterStore<S>& store, const std::string& name, std::size_t in, std::size_t mid, std::size_t out,
       Rng& rng)
      : hidden(store, name + ".0", in, mid, rng), output(store, name + ".1", mid, out, rng) {}

  Var<S> operator()(Tape<S>& tape, Var<S> x) const { return output(tape, relu(hidden(tape, x))); }
};

// Standard LSTM: gates i, f, o use sigmoid, candidate g uses tanh.
// Gate columns are laid out [i | f | o | g].
template <typename S>
struct Lstm {
  Parameter<S>* input_weight = nullptr;  // in x 4H
  Parameter<S>* hidden_weight = nullptr;  // H x 4H
  Parameter<S>* bias = nullptr;  // 1 x 4H

  Lstm() = default;
  template <typename Rng>
  Lstm(ParameterStore<S>& store, const std::string& name, std::size_t in, std::size_t hidden_dim, Rng& rng,
       S multiplier = S(1))
      : input_weight(&store.add_uniform(name + ".input_weight", in, 4 * hidden_dim, hidden_dim, rng, multiplier)),
        hidden_weight(
            &store.add_uniform(name + ".hidden_weight", hidden_dim, 4 * hidden_dim, hidden_dim, rng, multiplier)),
        bias(&store.add_uniform(name + ".bias", 1, 4 * hidden_dim, hidden_dim, rng, multiplier)) {}

  std::size_t hidden_dim() const { return hidden_weight->value.rows(); }
  std::size_t in_dim() const { return input_weight->value.rows(); }

  // Runs over the rows of x (N x in) and returns the N x H hidden states.
  // With reverse set, the sequence is consumed last to first; row i of the
  // result is still the state aligned with input row i.
  Var<S> operator()(Tape<S>& tape, Var<S> x, bool reverse = false) const {
    if (x.cols() != in_dim())
      throw ShapeError("lstm " + input_weight->name + ": input " + shape_str(x.value()) + " vs weight " +
                       shape_str(input_weight->value));
    const std::size_t n = x.rows(), h = hidden_dim();
    auto projected = add(matmul(x, tape.param(*input_weight)), tape.param(*bias));
    auto wh = tape.param(*hidden_weight);
    std::vector<Var<S>> states(n);
    Var<S> hprev{}, cprev{};
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = reverse ? n - 1 - step : step;
      auto z = slice_rows(projected, i, 1);
      if (step > 0) z = add(z, matmul(hprev, wh));
      auto in_gate = sigmoid(slice_cols(z, 0, h));
      auto forget_gate = sigmoid(slice_cols(z, h, h));
      auto out_gate = sigmoid(slice_cols(z, 2 * h, h));
      auto candidate = tanh(slice_cols(z, 3 * h, h));
      auto c = mul(in_gate, candidate);
      if (step > 0) c = add(mul(forget_gate, cprev), c);
      auto hs = mul(out_gate, tanh(c));
      states[i] = hs;
      hprev = hs;
      cprev = c;
    }
    return concat_rows(states);
  }
};

}  // namespace ctg
