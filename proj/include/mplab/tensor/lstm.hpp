#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mplab/errors.hpp"
#include "mplab/rng.hpp"
#include "mplab/tensor/dense.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::nn {

struct LstmState {
  Vector hidden;
  Vector cell;

  static LstmState zeros(std::size_t hidden_size) {
    return {Vector(hidden_size, 0.0), Vector(hidden_size, 0.0)};
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Standard LSTM cell. Every gate reads z = [input; previous hidden]:
///   i = sigmoid(W_i z + b_i), f = sigmoid(W_f z + b_f), o = sigmoid(W_o z + b_o),
///   g = tanh(W_g z + b_g), c' = f*c + i*g, h' = o*tanh(c').
class LstmCell {
 public:
  enum Gate : std::size_t { input_gate = 0, forget_gate = 1, output_gate = 2, candidate = 3 };
  static constexpr std::array<const char*, 4> gate_names{"input", "forget", "output", "candidate"};

  struct StepCache {
    Vector z;
    std::array<Vector, 4> gates;  // post-nonlinearity
    Vector cell_prev;
    Vector cell;
    Vector cell_tanh;
  };

  /// One cached step per element of the sequence.
  struct Tape {
    std::vector<StepCache> steps;
    bool empty() const { return steps.empty(); }
  };

  LstmCell() = default;
  LstmCell(std::size_t input_size, std::size_t hidden_size)
      : input_size_(input_size), hidden_size_(hidden_size) {
    if (input_size == 0 || hidden_size == 0) throw ShapeError("lstm dimensions must be positive");
    for (std::size_t g = 0; g < 4; ++g) {
      weights[g] = Matrix(hidden_size, input_size + hidden_size);
      bias[g] = Vector(hidden_size, 0.0);
      weight_grad[g] = Matrix(hidden_size, input_size + hidden_size);
      bias_grad[g] = Vector(hidden_size, 0.0);
    }
  }

  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }

  void initialize(Rng& rng) {
    const std::size_t fan_in = input_size_ + hidden_size_;
    for (std::size_t g = 0; g < 4; ++g) {
      init_uniform_fan_in(weights[g].values(), fan_in, rng);
      init_uniform_fan_in(bias[g], fan_in, rng);
    }
  }

  std::pair<Vector, LstmState> step(std::span<const double> x, const LstmState& state,
                                    StepCache* cache = nullptr) const {
    check_size(x.size(), input_size_, "lstm input");
    check_size(state.hidden.size(), hidden_size_, "lstm hidden state");
    check_size(state.cell.size(), hidden_size_, "lstm cell state");
    Vector z = concat(x, state.hidden);
    std::array<Vector, 4> act;
    for (std::size_t g = 0; g < 4; ++g) {
      act[g].resize(hidden_size_);
      affine(weights[g], z, bias[g], act[g]);
      for (double& a : act[g]) a = g == candidate ? std::tanh(a) : sigmoid(a);
    }
    LstmState next{Vector(hidden_size_), Vector(hidden_size_)};
    Vector cell_tanh(hidden_size_);
    for (std::size_t k = 0; k < hidden_size_; ++k) {
      next.cell[k] = act[forget_gate][k] * state.cell[k] + act[input_gate][k] * act[candidate][k];
      cell_tanh[k] = std::tanh(next.cell[k]);
      next.hidden[k] = act[output_gate][k] * cell_tanh[k];
    }
    check_finite(next.cell, "lstm cell");
    check_finite(next.hidden, "lstm hidden");
    if (cache) {
      cache->z = std::move(z);
      cache->gates = std::move(act);
      cache->cell_prev = state.cell;
      cache->cell = next.cell;
      cache->cell_tanh = std::move(cell_tanh);
    }
    Vector out = next.hidden;
    return {std::move(out), std::move(next)};
  }

  /// Feeds the sequence from the zero state and returns the final state.
  LstmState run(const std::vector<Vector>& inputs, Tape* tape = nullptr) const {
    LstmState state = LstmState::zeros(hidden_size_);
    if (tape) tape->steps.assign(inputs.size(), {});
    for (std::size_t t = 0; t < inputs.size(); ++t)
      state = step(inputs[t], state, tape ? &tape->steps[t] : nullptr).second;
    return state;
  }

  /// Backpropagation through time over the whole taped sequence, starting
  /// from the gradient on the final hidden state. Returns dL/dx per step.
  std::vector<Vector> backward(const Tape& tape, std::span<const double> d_final_hidden,
                               ParamGrads mode = ParamGrads::accumulate) {
    if (tape.steps.empty()) throw StateError("lstm backward called without a cached forward pass");
    check_size(d_final_hidden.size(), hidden_size_, "lstm upstream gradient");
    Vector dh(d_final_hidden.begin(), d_final_hidden.end());
    Vector dc(hidden_size_, 0.0);
    std::vector<Vector> dx(tape.steps.size());
    std::array<Vector, 4> da;
    for (auto& v : da) v.resize(hidden_size_);
    for (std::size_t t = tape.steps.size(); t-- > 0;) {
      const StepCache& s = tape.steps[t];
      if (s.z.size() != input_size_ + hidden_size_) throw StateError("lstm tape is incomplete");
      const Vector& ig = s.gates[input_gate];
      const Vector& fg = s.gates[forget_gate];
      const Vector& og = s.gates[output_gate];
      const Vector& gg = s.gates[candidate];
      Vector dc_prev(hidden_size_);
      for (std::size_t k = 0; k < hidden_size_; ++k) {
        const double tc = s.cell_tanh[k];
        const double d_out = dh[k] * tc;
        const double d_cell = dc[k] + dh[k] * og[k] * (1.0 - tc * tc);
        da[input_gate][k] = d_cell * gg[k] * ig[k] * (1.0 - ig[k]);
        da[forget_gate][k] = d_cell * s.cell_prev[k] * fg[k] * (1.0 - fg[k]);
        da[output_gate][k] = d_out * og[k] * (1.0 - og[k]);
        da[candidate][k] = d_cell * ig[k] * (1.0 - gg[k] * gg[k]);
        dc_prev[k] = d_cell * fg[k];
      }
      Vector dz(input_size_ + hidden_size_, 0.0);
      for (std::size_t g = 0; g < 4; ++g) {
        if (mode == ParamGrads::accumulate) {
          accumulate_outer(weight_grad[g], da[g], s.z);
          for (std::size_t k = 0; k < hidden_size_; ++k) bias_grad[g][k] += da[g][k];
        }
        accumulate_transpose_product(weights[g], da[g], dz);
      }
      dx[t].assign(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(input_size_));
      dh.assign(dz.begin() + static_cast<std::ptrdiff_t>(input_size_), dz.end());
      dc = std::move(dc_prev);
    }
    return dx;
  }

  ParamList params(const std::string& prefix = "lstm") {
    ParamList out;
    for (std::size_t g = 0; g < 4; ++g) {
      const std::string name = prefix + "." + gate_names[g];
      out.push_back({name + ".weight", weights[g].rows(), weights[g].cols(), weights[g].values(),
                     weight_grad[g].values()});
      out.push_back({name + ".bias", bias[g].size(), 1, bias[g], bias_grad[g]});
    }
    return out;
  }

  std::array<Matrix, 4> weights;
  std::array<Vector, 4> bias;
  std::array<Matrix, 4> weight_grad;
  std::array<Vector, 4> bias_grad;

 private:
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
};

inline std::pair<Vector, LstmState> lstm_step(const LstmCell& cell, std::span<const double> input,
                                              const LstmState& state) {
  return cell.step(input, state);
}

}  // namespace mplab::nn
