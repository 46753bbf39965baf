#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mplab/tensor/matrix.hpp"

namespace mplab::nn {

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / scale;
}

struct TensorCheck {
  std::string name;
  std::size_t size = 0;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12)
  double relative_error = 0.0;
  /// Worst single entry under the same formula. Entries whose gradient is
  /// below the finite-difference noise floor (~ulp(loss)/h) dominate this.
  double worst_entry_error = 0.0;
  double analytic_norm = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::vector<TensorCheck> tensors;
};

/// Compares reverse-mode gradients against central differences, one
/// parameter tensor at a time.
///
/// `loss()` evaluates the scalar loss at the current parameter values.
/// `loss_and_grad()` evaluates it and accumulates gradients into `params`
/// (grads are zeroed here beforehand). Never throws on a mismatch.
template <class Loss, class LossAndGrad>
GradCheckReport gradient_check(ParamList params, Loss&& loss, LossAndGrad&& loss_and_grad,
                               double h = 1e-6) {
  zero_grads(params);
  loss_and_grad();
  GradCheckReport report;
  for (auto& p : params) {
    TensorCheck t{p.name, p.value.size()};
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double analytic = p.grad[i];
      const double original = p.value[i];
      p.value[i] = original + h;
      const double up = loss();
      p.value[i] = original - h;
      const double down = loss();
      p.value[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      t.worst_entry_error = std::max(t.worst_entry_error, relative_error(analytic, numeric));
    }
    t.analytic_norm = std::sqrt(a2);
    t.relative_error =
        std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    if (!std::isfinite(t.relative_error)) t.relative_error = INFINITY;
    if (t.relative_error >= report.max_relative_error) {
      report.max_relative_error = t.relative_error;
      report.worst_parameter = t.name;
    }
    report.tensors.push_back(std::move(t));
  }
  return report;
}

}  // namespace mplab::nn
