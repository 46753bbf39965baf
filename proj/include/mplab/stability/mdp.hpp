#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mplab/errors.hpp"
#include "mplab/rng.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::stability {

using nn::Matrix;
using nn::Vector;
using nn::check_size;

/// Q(s,a) stored row-major: row = state, column = action. Flattened index
/// x = s * |A| + a is the ordering used by kernels and replay distributions.
using QTable = Matrix;

/// Finite MDP with dense P(s'|s,a) and R(s,a,s').
class TabularMdp {
 public:
  TabularMdp() = default;
  TabularMdp(std::size_t states, std::size_t actions, double gamma)
      : states_(states), actions_(actions), gamma_(gamma),
        p_(states * actions * states, 0.0), r_(states * actions * states, 0.0) {
    require(states > 0 && actions > 0, "mdp needs at least one state and one action");
    require(gamma >= 0.0 && gamma < 1.0, "discount must lie in [0,1)");
  }

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }
  std::size_t pairs() const { return states_ * actions_; }
  double gamma() const { return gamma_; }

  double& p(std::size_t s, std::size_t a, std::size_t next) { return p_[idx(s, a, next)]; }
  double p(std::size_t s, std::size_t a, std::size_t next) const { return p_[idx(s, a, next)]; }
  double& r(std::size_t s, std::size_t a, std::size_t next) { return r_[idx(s, a, next)]; }
  double r(std::size_t s, std::size_t a, std::size_t next) const { return r_[idx(s, a, next)]; }

  /// Throws PreconditionError unless every P(.|s,a) is a distribution.
  void validate() const {
    for (std::size_t s = 0; s < states_; ++s)
      for (std::size_t a = 0; a < actions_; ++a) {
        double total = 0.0;
        for (std::size_t n = 0; n < states_; ++n) {
          require(p(s, a, n) >= 0.0, "negative transition probability");
          total += p(s, a, n);
        }
        require(std::abs(total - 1.0) <= 1e-12, "transition row does not sum to 1");
        for (std::size_t n = 0; n < states_; ++n)
          require(std::isfinite(r(s, a, n)), "non-finite reward");
      }
  }

  /// Expected immediate reward of (s,a).
  double expected_reward(std::size_t s, std::size_t a) const {
    double e = 0.0;
    for (std::size_t n = 0; n < states_; ++n) e += p(s, a, n) * r(s, a, n);
    return e;
  }

 private:
  std::size_t idx(std::size_t s, std::size_t a, std::size_t n) const {
    return (s * actions_ + a) * states_ + n;
  }

  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  double gamma_ = 0.0;
  std::vector<double> p_;
  std::vector<double> r_;
};

/// Every action loops on the single state with reward `reward`.
inline TabularMdp self_loop_mdp(double reward, double gamma, std::size_t actions = 1) {
  TabularMdp m(1, actions, gamma);
  for (std::size_t a = 0; a < actions; ++a) {
    m.p(0, a, 0) = 1.0;
    m.r(0, a, 0) = reward;
  }
  return m;
}

/// Ergodic random MDP: strictly positive transition rows, rewards uniform in [0,1].
inline TabularMdp random_mdp(std::size_t states, std::size_t actions, double gamma, Rng& rng) {
  TabularMdp m(states, actions, gamma);
  for (std::size_t s = 0; s < states; ++s)
    for (std::size_t a = 0; a < actions; ++a) {
      double total = 0.0;
      for (std::size_t n = 0; n < states; ++n) {
        m.p(s, a, n) = 0.05 + uniform01(rng);
        total += m.p(s, a, n);
        m.r(s, a, n) = uniform01(rng);
      }
      double acc = 0.0;
      for (std::size_t n = 0; n + 1 < states; ++n) {
        m.p(s, a, n) /= total;
        acc += m.p(s, a, n);
      }
      m.p(s, a, states - 1) = 1.0 - acc;
    }
  return m;
}

inline constexpr std::uint64_t kReferenceMdpSeed = 20240501;

/// Reference instance i of the stability suite: |S| in 2..8, |A| in 2..4, seeded by index.
inline TabularMdp reference_mdp(std::size_t index, double gamma = 0.95) {
  Rng rng(derive_seed(kReferenceMdpSeed + index, "reference-mdp"));
  const std::size_t states = 2 + uniform_index(rng, 7);
  const std::size_t actions = 2 + uniform_index(rng, 3);
  return random_mdp(states, actions, gamma, rng);
}

inline double sup_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double sup_distance(const QTable& a, const QTable& b) {
  return sup_distance(a.values(), b.values());
}

inline double max_action_value(const QTable& q, std::size_t s) {
  auto row = q.row(s);
  return *std::max_element(row.begin(), row.end());
}

/// Q'(s,a) = sum_s' P(s'|s,a) [R(s,a,s') + gamma max_a' Q(s',a')]
inline QTable bellman_apply(const TabularMdp& mdp, const QTable& q) {
  if (q.rows() != mdp.states() || q.cols() != mdp.actions())
    throw ShapeError("Q table shape does not match the MDP");
  Vector v(mdp.states());
  for (std::size_t s = 0; s < mdp.states(); ++s) v[s] = max_action_value(q, s);
  QTable out(mdp.states(), mdp.actions());
  for (std::size_t s = 0; s < mdp.states(); ++s)
    for (std::size_t a = 0; a < mdp.actions(); ++a) {
      double e = 0.0;
      for (std::size_t n = 0; n < mdp.states(); ++n)
        e += mdp.p(s, a, n) * (mdp.r(s, a, n) + mdp.gamma() * v[n]);
      out(s, a) = e;
    }
  return out;
}

/// Greedy action per state; ties go to the lowest action index.
inline std::vector<std::size_t> greedy_policy(const QTable& q) {
  std::vector<std::size_t> pi(q.rows());
  for (std::size_t s = 0; s < q.rows(); ++s) {
    auto row = q.row(s);
    pi[s] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return pi;
}

struct ValueIterationResult {
  QTable q;
  std::size_t iterations = 0;
  /// ||Q_{i+1} - Q_i|| for every sweep, in order.
  std::vector<double> diffs;
};

inline ValueIterationResult value_iteration(const TabularMdp& mdp, const QTable& q0, double tol,
                                            std::size_t max_iterations = 1'000'000) {
  require(tol > 0.0, "value iteration tolerance must be positive");
  ValueIterationResult res{q0, 0, {}};
  while (res.iterations < max_iterations) {
    QTable next = bellman_apply(mdp, res.q);
    const double d = sup_distance(next, res.q);
    res.q = std::move(next);
    ++res.iterations;
    res.diffs.push_back(d);
    if (d < tol) break;
  }
  return res;
}

inline ValueIterationResult value_iteration(const TabularMdp& mdp, double tol) {
  return value_iteration(mdp, QTable(mdp.states(), mdp.actions()), tol);
}

struct SampledTransition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;
};

/// r + gamma max_a' Q(s',a') - Q(s,a); the bootstrap term is dropped on terminal transitions.
inline double td_error(const QTable& q, const SampledTransition& t, double gamma) {
  const double bootstrap = t.terminal ? 0.0 : gamma * max_action_value(q, t.next_state);
  return t.reward + bootstrap - q(t.state, t.action);
}

}  // namespace mplab::stability
