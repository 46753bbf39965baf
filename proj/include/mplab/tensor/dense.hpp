#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mplab/errors.hpp"
#include "mplab/rng.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::nn {

enum class Activation { relu, tanh, linear };

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::linear: return x;
  }
  return x;
}

/// Derivative expressed through the pre-activation and the activated output.
inline double activate_derivative(Activation a, double pre, double out) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "?";
}

enum class ParamGrads { accumulate, skip };

/// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline void init_uniform_fan_in(std::span<double> values, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : values) v = dist(rng);
}

class DenseLayer {
 public:
  struct Cache {
    Vector input;
    Vector pre;
    Vector output;
  };

  DenseLayer() = default;
  DenseLayer(std::size_t inputs, std::size_t outputs, Activation activation)
      : weights(outputs, inputs),
        bias(outputs, 0.0),
        activation(activation),
        weight_grad(outputs, inputs),
        bias_grad(outputs, 0.0) {
    if (inputs == 0 || outputs == 0) throw ShapeError("dense layer dimensions must be positive");
  }

  std::size_t input_size() const { return weights.cols(); }
  std::size_t output_size() const { return weights.rows(); }

  void initialize(Rng& rng) {
    init_uniform_fan_in(weights.values(), input_size(), rng);
    init_uniform_fan_in(bias, input_size(), rng);
  }

  /// output = activation(W x + b). When `cache` is given the input and
  /// pre-activation are kept for `backward`.
  Vector forward(std::span<const double> x, Cache* cache = nullptr) const {
    check_size(x.size(), input_size(), "dense input");
    Vector pre(output_size());
    affine(weights, x, bias, pre);
    Vector out(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = activate(activation, pre[i]);
    check_finite(out, "dense output");
    if (cache) {
      cache->input.assign(x.begin(), x.end());
      cache->pre = pre;
      cache->output = out;
    }
    return out;
  }

  /// Returns dL/dx; accumulates dL/dW and dL/db unless told to skip.
  Vector backward(const Cache& cache, std::span<const double> dy,
                  ParamGrads mode = ParamGrads::accumulate) {
    if (cache.pre.size() != output_size() || cache.input.size() != input_size())
      throw StateError("dense backward without a matching forward pass");
    check_size(dy.size(), output_size(), "dense upstream gradient");
    Vector dpre(output_size());
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre[i] = dy[i] * activate_derivative(activation, cache.pre[i], cache.output[i]);
    if (mode == ParamGrads::accumulate) {
      accumulate_outer(weight_grad, dpre, cache.input);
      for (std::size_t i = 0; i < dpre.size(); ++i) bias_grad[i] += dpre[i];
    }
    Vector dx(input_size(), 0.0);
    accumulate_transpose_product(weights, dpre, dx);
    return dx;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", weights.rows(), weights.cols(), weights.values(),
                   weight_grad.values()});
    out.push_back({prefix + ".bias", bias.size(), 1, bias, bias_grad});
  }

  Matrix weights;
  Vector bias;
  Activation activation = Activation::linear;
  Matrix weight_grad;
  Vector bias_grad;
};

inline Vector dense_forward(const DenseLayer& layer, std::span<const double> input) {
  return layer.forward(input);
}

/// Stack of dense layers. Forward passes record into a caller-owned tape so
/// several passes can be in flight before their backward passes run.
class Mlp {
 public:
  struct Tape {
    std::vector<DenseLayer::Cache> caches;
    bool empty() const { return caches.empty(); }
  };

  Mlp() = default;

  /// sizes = {in, h1, ..., out}; hidden layers use `hidden`, the last uses `output`.
  Mlp(const std::vector<std::size_t>& sizes, Activation hidden, Activation output) {
    if (sizes.size() < 2) throw ShapeError("mlp needs at least an input and an output size");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const bool last = i + 2 == sizes.size();
      layers_.emplace_back(sizes[i], sizes[i + 1], last ? output : hidden);
    }
  }

  void initialize(Rng& rng) {
    for (auto& layer : layers_) layer.initialize(rng);
  }

  std::size_t input_size() const { return layers_.front().input_size(); }
  std::size_t output_size() const { return layers_.back().output_size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Vector forward(std::span<const double> x, Tape& tape) const {
    tape.caches.assign(layers_.size(), {});
    Vector h(x.begin(), x.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i].forward(h, &tape.caches[i]);
    return h;
  }

  Vector infer(std::span<const double> x) const {
    Vector h(x.begin(), x.end());
    for (const auto& layer : layers_) h = layer.forward(h);
    return h;
  }

  Vector backward(const Tape& tape, std::span<const double> dy,
                  ParamGrads mode = ParamGrads::accumulate) {
    if (tape.caches.size() != layers_.size())
      throw StateError("mlp backward called without a cached forward pass");
    Vector d(dy.begin(), dy.end());
    for (std::size_t i = layers_.size(); i-- > 0;) d = layers_[i].backward(tape.caches[i], d, mode);
    return d;
  }

  ParamList params(const std::string& prefix = "mlp") {
    ParamList out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
    return out;
  }

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace mplab::nn
