#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mplab/agent/trainer.hpp"
#include "mplab/tensor/gradcheck.hpp"

namespace mplab::agent {

inline ConnectionState random_state(Rng& rng, std::size_t subflows) {
  ConnectionState s;
  for (std::size_t n = 0; n < subflows; ++n) {
    SubflowObservation o;
    o.sending_rate = uniform(rng, 0.0, 2000.0);
    o.throughput = uniform(rng, 0.0, 2000.0);
    o.rtt = uniform(rng, 0.01, 0.3);
    o.window_change = uniform(rng, -20.0, 20.0);
    o.schedule_weight = uniform01(rng);
    s.push_back(o);
  }
  double min_rtt = s.front().rtt;
  for (const auto& o : s) min_rtt = std::min(min_rtt, o.rtt);
  for (auto& o : s) o.rtt_diff = o.rtt - min_rtt;
  return s;
}

inline AgentAction random_action(Rng& rng, std::size_t subflows) {
  AgentAction a;
  for (std::size_t n = 0; n < subflows; ++n) {
    a.window_adjust.push_back(uniform(rng, -1.0, 1.0));
    a.schedule_logit.push_back(uniform(rng, -1.0, 1.0));
  }
  return a;
}

struct NetworkGradCheck {
  std::string network;
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

/// Checks the three agent networks on a small random batch:
/// critic against the TD loss, actor against the policy objective, and the
/// representation against the policy objective with the full chain.
inline std::vector<NetworkGradCheck> agent_gradcheck(std::uint64_t seed, NetShape shape = {},
                                                     std::size_t batch = 1) {
  Rng rng = rng_fork(seed, "gradcheck");
  AgentNets nets(shape);
  nets.initialize(rng);
  std::vector<Transition> transitions;
  std::vector<ConnectionState> states;
  std::vector<double> targets;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t n = 2 - i % 2;
    Transition t;
    t.state = random_state(rng, n);
    t.action = random_action(rng, n);
    transitions.push_back(t);
    states.push_back(t.state);
    targets.push_back(uniform(rng, -2.0, 2.0));
  }

  std::vector<NetworkGradCheck> out;
  auto record = [&](const char* name, const nn::GradCheckReport& r) {
    out.push_back({name, r.max_relative_error, r.worst_parameter});
  };

  // The representation is fixed while the heads are perturbed.
  std::vector<Representation> reps;
  for (const auto& s : states) reps.push_back(nets.encode(s));

  auto critic_loss = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      const double e = targets[i] - nets.value(reps[i], transitions[i].action);
      loss += e * e / static_cast<double>(transitions.size());
    }
    return loss;
  };
  record("critic", nn::gradient_check(nets.critic_params(), critic_loss,
                                      [&] { return critic_loss_and_grad(nets, transitions, targets); }));

  auto policy_loss_cached = [&] {
    double obj = 0.0;
    for (const auto& rep : reps) obj -= nets.value(rep, nets.act(rep)) / static_cast<double>(reps.size());
    return obj;
  };
  record("actor", nn::gradient_check(nets.actor_params(), policy_loss_cached,
                                     [&] { return policy_loss_and_grad(nets, states, true); }));

  auto policy_loss = [&] {
    double obj = 0.0;
    for (const auto& s : states) {
      const auto rep = nets.encode(s);
      obj -= nets.value(rep, nets.act(rep)) / static_cast<double>(states.size());
    }
    return obj;
  };
  record("representation",
         nn::gradient_check(nets.representation_params(), policy_loss,
                            [&] { return policy_loss_and_grad(nets, states, true); }));
  return out;
}

}  // namespace mplab::agent
