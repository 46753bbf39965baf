#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mplab/stability/mdp.hpp"

namespace mplab::stability {

/// Q(s,a) += alpha * td_error
inline void q_update(QTable& q, const SampledTransition& t, double gamma, double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, "q-learning step size must lie in (0,1]");
  q(t.state, t.action) += alpha * td_error(q, t, gamma);
}

/// Step size as a function of how many times the pair has been updated before (0 on first visit).
using StepSchedule = std::function<double(std::uint64_t visits)>;

inline StepSchedule harmonic_schedule() {
  return [](std::uint64_t visits) { return 1.0 / (1.0 + static_cast<double>(visits)); };
}

/// Fixed 3-state, 2-action MDP with gamma 0.5 for tabular Q-learning checks.
inline TabularMdp q_learning_reference_mdp() {
  Rng rng(derive_seed(7, "ql"));
  return random_mdp(3, 2, 0.5, rng);
}

struct QLearningOptions {
  std::uint64_t steps = 1'000'000;
  double epsilon = 0.2;
  std::size_t start_state = 0;
  std::uint64_t seed = 42;
};

struct QLearningResult {
  QTable q;
  /// Updates applied to each flattened (s,a) pair.
  std::vector<std::uint64_t> visits;
};

inline std::size_t sample_next_state(const TabularMdp& mdp, std::size_t s, std::size_t a,
                                     Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t n = 0; n + 1 < mdp.states(); ++n) {
    acc += mdp.p(s, a, n);
    if (u < acc) return n;
  }
  return mdp.states() - 1;
}

/// Single continuing trajectory with epsilon-greedy exploration over the current Q.
inline QLearningResult q_learning_run(const TabularMdp& mdp, const StepSchedule& schedule,
                                      const QLearningOptions& opt) {
  require(opt.epsilon >= 0.0 && opt.epsilon <= 1.0, "epsilon must lie in [0,1]");
  require(opt.start_state < mdp.states(), "start state out of range");
  Rng rng = rng_fork(opt.seed, "q-learning");
  QLearningResult res{QTable(mdp.states(), mdp.actions()),
                      std::vector<std::uint64_t>(mdp.pairs(), 0)};
  std::size_t s = opt.start_state;
  for (std::uint64_t step = 0; step < opt.steps; ++step) {
    std::size_t a;
    if (uniform01(rng) < opt.epsilon) {
      a = uniform_index(rng, mdp.actions());
    } else {
      auto row = res.q.row(s);
      a = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    const std::size_t next = sample_next_state(mdp, s, a, rng);
    auto& n = res.visits[s * mdp.actions() + a];
    q_update(res.q, {s, a, mdp.r(s, a, next), next, false}, mdp.gamma(), schedule(n));
    ++n;
    s = next;
  }
  return res;
}

}  // namespace mplab::stability
