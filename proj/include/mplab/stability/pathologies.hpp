#pragma once

#include <optional>
#include <vector>

#include "mplab/stability/operators.hpp"

namespace mplab::stability {

struct MissingDataResult {
  std::size_t missing_pair = 0;
  /// |Q_i - Q*| on the missing pair, i = 0..iterations.
  std::vector<double> missing_errors;
  bool missing_error_constant = false;
  /// ||Q_n - Q*|| after the same number of U^ii steps with uniform rho.
  double full_support_error = 0.0;
};

/// U^ii with rho zero on `missing_pair` and uniform elsewhere, against the same
/// run with uniform rho. `alpha` must stay below |S||A| - 1 for the full run.
inline MissingDataResult missing_data_demo(const TabularMdp& mdp, std::size_t missing_pair,
                                           double alpha, std::size_t iterations,
                                           const QVector& q0) {
  const std::size_t n = mdp.pairs();
  require(missing_pair < n && n >= 2, "missing pair out of range");
  const QVector q_star = as_vector(value_iteration(mdp, 1e-13).q);
  Vector holed(n, 1.0 / static_cast<double>(n - 1));
  holed[missing_pair] = 0.0;
  const Vector full = uniform_distribution(n);

  MissingDataResult res;
  res.missing_pair = missing_pair;
  QVector q = q0, qf = q0;
  res.missing_errors.push_back(std::abs(q[missing_pair] - q_star[missing_pair]));
  for (std::size_t i = 0; i < iterations; ++i) {
    q = update_uii(q, mdp, alpha, holed);
    qf = update_uii(qf, mdp, alpha, full);
    res.missing_errors.push_back(std::abs(q[missing_pair] - q_star[missing_pair]));
  }
  res.missing_error_constant = true;
  for (double e : res.missing_errors)
    if (e != res.missing_errors.front()) res.missing_error_constant = false;
  res.full_support_error = sup_distance(qf, q_star);
  return res;
}

struct GeneralizationExample {
  TabularMdp mdp;
  Matrix kernel;
  Vector rho;
  double alpha = 0.0;
};

/// Two single-action states, 0 -> 1 and 1 -> 1, reward 1. The kernel is the
/// feature Gram matrix of phi = (1, 2) plus a small ridge so it is strictly
/// positive definite: the approximator ties both values to one weight and
/// over-generalizes from state 1 to state 0.
inline GeneralizationExample aggressive_generalization_example(double gamma = 0.95,
                                                               double alpha = 0.5) {
  GeneralizationExample ex{TabularMdp(2, 1, gamma), Matrix(2, 2), uniform_distribution(2), alpha};
  ex.mdp.p(0, 0, 1) = 1.0;
  ex.mdp.r(0, 0, 1) = 1.0;
  ex.mdp.p(1, 0, 1) = 1.0;
  ex.mdp.r(1, 0, 1) = 1.0;
  const double ridge = 0.01;
  ex.kernel(0, 0) = 1.0 + ridge;
  ex.kernel(0, 1) = ex.kernel(1, 0) = 2.0;
  ex.kernel(1, 1) = 4.0 + ridge;
  return ex;
}

struct DivergenceResult {
  std::vector<double> errors;
  /// First iteration whose error exceeds `factor` times the initial error.
  std::optional<std::size_t> diverged_at;
};

inline DivergenceResult iterate_uiii(const GeneralizationExample& ex, const QVector& q0,
                                     std::size_t iterations, double factor = 100.0) {
  const QVector q_star = as_vector(value_iteration(ex.mdp, 1e-13).q);
  DivergenceResult res;
  QVector q = q0;
  const double e0 = sup_distance(q, q_star);
  res.errors.push_back(e0);
  for (std::size_t i = 1; i <= iterations; ++i) {
    q = generalized_update(q, ex.mdp, ex.alpha, ex.kernel, ex.rho);
    const double e = sup_distance(q, q_star);
    res.errors.push_back(e);
    if (!res.diverged_at && e > factor * e0) res.diverged_at = i;
  }
  return res;
}

struct AlphaSearch {
  std::vector<double> alphas;
  std::vector<double> estimates;
  /// Smallest alpha in the grid whose estimate exceeds 1.
  std::optional<double> expanding_alpha;
};

/// Lipschitz estimate of alpha K D_rho updates over a grid of step sizes.
inline AlphaSearch search_expanding_alpha(const TabularMdp& mdp, const Matrix& k,
                                          const Vector& rho, const std::vector<double>& alphas,
                                          std::size_t trials, std::uint64_t seed) {
  AlphaSearch res;
  for (double alpha : alphas) {
    UpdateOp op = [&](const QVector& q) { return generalized_update(q, mdp, alpha, k, rho); };
    const double est = empirical_lipschitz(op, mdp.pairs(), trials, seed);
    res.alphas.push_back(alpha);
    res.estimates.push_back(est);
    if (!res.expanding_alpha && est > 1.0) res.expanding_alpha = alpha;
  }
  return res;
}

}  // namespace mplab::stability
