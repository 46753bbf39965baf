#pragma once

#include <cmath>

#include "mplab/errors.hpp"
#include "mplab/rng.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::agent {

using nn::Vector;

struct OuParams {
  double mean = 0.0;
  double rate = 0.15;  ///< kappa
  double volatility = 0.2;
  double dt = 1.0;
};

/// Ornstein-Uhlenbeck exploration noise, one coordinate per action dimension.
/// x <- x + kappa (mu - x) dt + sigma sqrt(dt) xi.
class OuNoise {
 public:
  OuNoise(OuParams params, Rng rng) : p_(params), rng_(std::move(rng)) {
    require(p_.volatility >= 0.0, "OU volatility must be non-negative");
    require(p_.dt > 0.0, "OU time step must be positive");
  }

  const OuParams& params() const { return p_; }
  const Vector& value() const { return x_; }
  void set_value(Vector x) { x_ = std::move(x); }

  /// Grows or shrinks to `dims`; new coordinates start at the mean.
  void resize(std::size_t dims) { x_.resize(dims, p_.mean); }
  void reset() { std::fill(x_.begin(), x_.end(), p_.mean); }

  const Vector& step() {
    const double diffusion = p_.volatility * std::sqrt(p_.dt);
    for (double& x : x_) {
      const double xi = p_.volatility > 0.0 ? standard_normal(rng_) : 0.0;
      x += p_.rate * (p_.mean - x) * p_.dt + diffusion * xi;
    }
    nn::check_finite(x_, "OU noise");
    return x_;
  }

 private:
  OuParams p_;
  Rng rng_;
  Vector x_;
};

}  // namespace mplab::agent
