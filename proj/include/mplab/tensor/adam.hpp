#pragma once

#include <cmath>
#include <cstdint>

#include "mplab/errors.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::nn {

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t parameter_count)
      : first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
  explicit AdamState(const ParamList& params) : AdamState(parameter_count(params)) {}
};

/// One bias-corrected Adam step over every parameter in `params`. Gradients are
/// validated first; a non-finite entry refuses the whole update.
inline void adam_update(ParamList& params, AdamState& opt, double lr) {
  if (!(lr > 0.0)) throw PreconditionError("adam learning rate must be positive");
  const std::size_t n = parameter_count(params);
  if (opt.first_moment.size() != n || opt.second_moment.size() != n)
    throw ShapeError("adam accumulators do not match parameter count");
  for (const auto& p : params) {
    if (p.grad.size() != p.value.size()) throw ShapeError("gradient shape mismatch for " + p.name);
    if (!all_finite(p.grad)) throw NumericError("non-finite gradient in " + p.name);
  }
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  std::size_t k = 0;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i, ++k) {
      const double g = p.grad[i];
      double& m = opt.first_moment[k];
      double& v = opt.second_moment[k];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

}  // namespace mplab::nn
