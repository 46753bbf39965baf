#pragma once

#include <cmath>
#include <vector>

#include "mplab/agent/networks.hpp"
#include "mplab/tensor/adam.hpp"

namespace mplab::agent {

struct TrainConfig {
  double gamma = 0.95;
  double lr_critic = 1e-3;
  double lr_actor = 1e-2;
  double tau = 1e-3;
  std::size_t batch = 16;
  std::size_t actor_delay = 0;  ///< critic-only steps before actor and representation updates
};

inline double bootstrap_target(double reward, double gamma, double next_value, bool terminal) {
  return terminal ? reward : reward + gamma * next_value;
}

/// y = R + gamma * Q^(f^(S'), E^(f^(S'))) with every term from the target networks.
inline double td_target(const AgentNets& target, const Transition& t, double gamma) {
  if (t.terminal) return t.reward;
  const auto rep = target.encode(t.next_state);
  return bootstrap_target(t.reward, gamma, target.value(rep, target.act(rep)), false);
}

/// Mean squared TD error over the batch; accumulates critic gradients only.
inline double critic_loss_and_grad(AgentNets& nets, const std::vector<Transition>& batch,
                                   const std::vector<double>& targets) {
  require(!batch.empty(), "training batch is empty");
  nn::check_size(targets.size(), batch.size(), "td targets");
  const double k = static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto rep = nets.encode(batch[i].state);
    nn::check_size(batch[i].action.size(), rep.features.size(), "stored action");
    std::vector<Mlp::Tape> tapes(rep.features.size());
    double q = 0.0;
    for (std::size_t n = 0; n < tapes.size(); ++n)
      q += nets.critic.forward(AgentNets::critic_input(rep, n, batch[i].action), tapes[n])[0];
    const double err = targets[i] - q;
    loss += err * err / k;
    const Vector dq{-2.0 * err / k};
    for (auto& tape : tapes) nets.critic.backward(tape, dq);
  }
  return loss;
}

/// Policy objective -mean_i Q(f(S_i), E(f(S_i))). Accumulates actor gradients
/// and representation gradients through the actor. With `through_critic` the
/// representation also receives the critic's direct dependence on f, which
/// makes the result the exact gradient of the objective (used by gradcheck).
inline double policy_loss_and_grad(AgentNets& nets, const std::vector<ConnectionState>& states,
                                   bool through_critic = false) {
  require(!states.empty(), "training batch is empty");
  const double k = static_cast<double>(states.size());
  const std::size_t h = nets.representation.hidden_size();
  double objective = 0.0;
  for (const auto& s : states) {
    LstmCell::Tape rep_tape;
    const auto rep = nets.encode(s, &rep_tape);
    Vector df(h, 0.0);
    for (std::size_t n = 0; n < rep.features.size(); ++n) {
      Mlp::Tape actor_tape, critic_tape;
      const auto in = nn::concat(rep.final_state, rep.features[n]);
      const auto out = nets.actor.forward(in, actor_tape);
      Vector cin = in;
      cin.insert(cin.end(), out.begin(), out.end());
      objective -= nets.critic.forward(cin, critic_tape)[0] / k;
      const auto dcin = nets.critic.backward(critic_tape, Vector{-1.0 / k}, nn::ParamGrads::skip);
      const Vector da(dcin.end() - kActionDims, dcin.end());
      const auto din = nets.actor.backward(actor_tape, da);
      for (std::size_t j = 0; j < h; ++j) df[j] += din[j] + (through_critic ? dcin[j] : 0.0);
    }
    nets.representation.backward(rep_tape, df);
  }
  return objective;
}

/// Online and target networks with their optimizers.
class Learner {
 public:
  Learner(NetShape shape, TrainConfig cfg, Rng init_rng)
      : online_(shape), target_(shape), cfg_(cfg) {
    online_.initialize(init_rng);
    copy_params(online_, target_);
    critic_opt_ = nn::AdamState(online_.critic_params());
    actor_opt_ = nn::AdamState(online_.actor_params());
    rep_opt_ = nn::AdamState(online_.representation_params());
  }

  AgentNets& online() { return online_; }
  AgentNets& target() { return target_; }
  const AgentNets& online() const { return online_; }
  const TrainConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t n) { steps_ = n; }

  /// One pass of the training algorithm. Returns the critic loss before the
  /// update and the per-sample TD errors; a non-finite loss refuses the update.
  double train_step(const std::vector<Transition>& batch, std::vector<double>* td_errors = nullptr) {
    std::vector<double> y;
    y.reserve(batch.size());
    for (const auto& t : batch) y.push_back(td_target(target_, t, cfg_.gamma));

    auto critic = online_.critic_params();
    nn::zero_grads(critic);
    const double loss = critic_loss_and_grad(online_, batch, y);
    if (!std::isfinite(loss)) throw NumericError("critic loss is not finite");
    if (td_errors) {
      td_errors->clear();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto rep = online_.encode(batch[i].state);
        td_errors->push_back(y[i] - online_.value(rep, batch[i].action));
      }
    }
    nn::adam_update(critic, critic_opt_, cfg_.lr_critic);

    if (steps_ >= cfg_.actor_delay) update_policy(batch);
    soft_update(online_, target_, cfg_.tau);
    ++steps_;
    return loss;
  }

 private:
  void update_policy(const std::vector<Transition>& batch) {
    std::vector<ConnectionState> states;
    states.reserve(batch.size());
    for (const auto& t : batch) states.push_back(t.state);
    auto actor = online_.actor_params();
    auto rep = online_.representation_params();
    nn::zero_grads(actor);
    nn::zero_grads(rep);
    policy_loss_and_grad(online_, states);
    nn::adam_update(actor, actor_opt_, cfg_.lr_actor);
    nn::adam_update(rep, rep_opt_, cfg_.lr_actor);
  }

  AgentNets online_;
  AgentNets target_;
  TrainConfig cfg_;
  nn::AdamState critic_opt_;
  nn::AdamState actor_opt_;
  nn::AdamState rep_opt_;
  std::uint64_t steps_ = 0;
};

}  // namespace mplab::agent
