#pragma once

#include <span>

#include "mplab/errors.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::transport {

/// True when no alternative allocation gains in aggregate proportional terms:
/// sum_u (theta_u - theta*_u) / theta*_u <= 0.
inline bool proportional_fairness_check(std::span<const double> theta_star,
                                        std::span<const double> theta) {
  nn::check_size(theta.size(), theta_star.size(), "alternative allocation");
  double sum = 0.0;
  for (std::size_t u = 0; u < theta_star.size(); ++u) {
    require(theta_star[u] > 0.0, "reference allocation must be strictly positive");
    sum += (theta[u] - theta_star[u]) / theta_star[u];
  }
  return sum <= 0.0;
}

}  // namespace mplab::transport
