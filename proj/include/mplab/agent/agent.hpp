#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mplab/agent/ou_noise.hpp"
#include "mplab/agent/replay.hpp"
#include "mplab/agent/trainer.hpp"
#include "mplab/tensor/checkpoint.hpp"

namespace mplab::agent {

enum class AgentMode { learned, uniform_random };

struct AgentConfig {
  NetShape shape;
  TrainConfig train;
  std::size_t replay_capacity = 50000;
  double priority_exponent = 0.6;
  bool delete_after_sample = true;
  OuParams noise;
  double window_step = 0.25;  ///< lambda: largest relative window change per slot
  double cwnd_min = 2.0;
  double cwnd_max = 2048.0;
  double theta_min = 1e-6;
  std::size_t random_start = 0;  ///< learning slots acted uniformly at random before the actor takes over
  AgentMode mode = AgentMode::learned;
  bool explore = true;
  bool learn = true;
  std::uint64_t seed = 42;
};

/// R = sum_n ln(max(theta_n, theta_min)).
inline double compute_reward(const std::vector<double>& goodputs, double theta_min = 1e-6) {
  require(!goodputs.empty(), "reward needs at least one subflow");
  require(theta_min > 0.0, "goodput floor must be positive");
  double r = 0.0;
  for (double g : goodputs) r += std::log(std::max(g, theta_min));
  return r;
}

inline double compute_reward(const ConnectionState& s, double theta_min = 1e-6) {
  std::vector<double> g;
  for (const auto& o : s) g.push_back(o.throughput);
  return compute_reward(g, theta_min);
}

inline Vector softmax(const Vector& logits) {
  require(!logits.empty(), "softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(logits[i] - top);
  for (double& v : w) v /= total;
  return w;
}

/// floor(cwnd * (1 + lambda * adjust)) clamped to [cwnd_min, cwnd_max].
inline double map_window(double cwnd, double adjust, double lambda, double cwnd_min,
                         double cwnd_max) {
  return std::clamp(std::floor(cwnd * (1.0 + lambda * adjust)), cwnd_min, cwnd_max);
}

struct SlotControl {
  Vector window;  ///< unquantized target, fed back as the next slot's window
  Vector cwnd;    ///< floor of `window`, what the transport enforces
  Vector weights;
  AgentAction action;
  double reward = 0.0;
  std::optional<double> critic_loss;
};

/// One agent per connection: encodes the state, acts, stores the transition
/// from the previous slot and trains from replay.
class DqlAgent {
 public:
  explicit DqlAgent(AgentConfig cfg)
      : cfg_(cfg),
        learner_(cfg.shape, cfg.train, rng_fork(cfg.seed, "init")),
        replay_(cfg.replay_capacity, cfg.priority_exponent, rng_fork(cfg.seed, "replay")),
        noise_(cfg.noise, rng_fork(cfg.seed, "ou-noise")),
        random_(rng_fork(cfg.seed, "random-actions")) {}

  /// Acting copy that shares nothing with `source` except its current weights.
  static DqlAgent frozen_copy(const DqlAgent& source, std::uint64_t seed) {
    AgentConfig cfg = source.cfg_;
    cfg.seed = seed;
    cfg.learn = false;
    DqlAgent copy(cfg);
    copy.learner_ = source.learner_;
    return copy;
  }

  const AgentConfig& config() const { return cfg_; }
  AgentConfig& config() { return cfg_; }
  Learner& learner() { return learner_; }
  const ReplayBuffer& replay() const { return replay_; }
  OuNoise& noise() { return noise_; }

  Representation encode(const ConnectionState& s) const { return learner_.online().encode(s); }

  /// Actor output, plus OU noise when exploring; window adjustments stay in [-1,1].
  AgentAction act(const Representation& rep, bool explore) {
    AgentAction a = learner_.online().act(rep);
    if (!explore) return a;
    const std::size_t n = a.size();
    noise_.resize(2 * n);
    const auto& x = noise_.step();
    for (std::size_t i = 0; i < n; ++i) {
      a.window_adjust[i] = std::clamp(a.window_adjust[i] + x[i], -1.0, 1.0);
      a.schedule_logit[i] = std::clamp(a.schedule_logit[i] + x[n + i], -1.0, 1.0);
    }
    return a;
  }

  AgentAction random_action(std::size_t n) {
    AgentAction a;
    for (std::size_t i = 0; i < n; ++i) {
      a.window_adjust.push_back(uniform(random_, -1.0, 1.0));
      a.schedule_logit.push_back(uniform(random_, -1.0, 1.0));
    }
    return a;
  }

  SlotControl control_slot(const ConnectionState& state, const Vector& cwnd) {
    for (const auto& o : state) o.validate();
    nn::check_size(cwnd.size(), state.size(), "window vector");
    SlotControl out;
    out.reward = compute_reward(state, cfg_.theta_min);
    rewards_.push_back(out.reward);
    if (cfg_.mode == AgentMode::uniform_random) {
      out.action = random_action(state.size());
    } else {
      const bool warming = cfg_.learn && learning_slots_++ < cfg_.random_start;
      out.action = warming ? random_action(state.size()) : act(encode(state), cfg_.explore);
      if (cfg_.learn && previous_ && previous_->first.size() == state.size()) {
        replay_.store({previous_->first, previous_->second, out.reward, state, false});
        out.critic_loss = maybe_train();
      }
      previous_ = {state, out.action};
    }
    for (std::size_t n = 0; n < cwnd.size(); ++n) {
      const double w = cwnd[n] * (1.0 + cfg_.window_step * out.action.window_adjust[n]);
      out.window.push_back(std::clamp(w, cfg_.cwnd_min, cfg_.cwnd_max));
      out.cwnd.push_back(map_window(cwnd[n], out.action.window_adjust[n], cfg_.window_step,
                                    cfg_.cwnd_min, cfg_.cwnd_max));
    }
    out.weights = softmax(out.action.schedule_logit);
    return out;
  }

  /// Forgets the pending transition and the noise state (episode boundary).
  void end_episode() {
    previous_.reset();
    noise_.reset();
  }

  const std::vector<double>& rewards() const { return rewards_; }
  void clear_rewards() { rewards_.clear(); }
  const std::vector<double>& losses() const { return losses_; }

  void save(std::ostream& os) {
    nn::Checkpoint ck;
    ck.meta["kind"] = "dql-agent";
    ck.meta["representation"] = std::to_string(cfg_.shape.representation);
    ck.meta["hidden"] = std::to_string(cfg_.shape.hidden);
    ck.meta["train_steps"] = std::to_string(learner_.steps());
    ck.meta["learning_slots"] = std::to_string(learning_slots_);
    ck.sections.push_back({"online", nn::snapshot(learner_.online().params())});
    ck.sections.push_back({"target", nn::snapshot(learner_.target().params())});
    nn::write_checkpoint(os, ck);
  }

  void load(std::istream& is) {
    const auto ck = nn::read_checkpoint(is);
    auto it = ck.meta.find("kind");
    if (it == ck.meta.end() || it->second != "dql-agent") throw IoError("not an agent checkpoint");
    auto online = learner_.online().params();
    auto target = learner_.target().params();
    nn::restore(online, ck.section("online"));
    nn::restore(target, ck.section("target"));
    auto count = [&](const char* key) -> std::uint64_t {
      auto m = ck.meta.find(key);
      if (m == ck.meta.end()) return 0;
      try {
        return std::stoull(m->second);
      } catch (const std::exception&) {
        throw IoError(std::string("bad checkpoint field ") + key);
      }
    };
    learner_.set_steps(count("train_steps"));
    learning_slots_ = count("learning_slots");
  }

  std::uint64_t learning_slots() const { return learning_slots_; }

 private:
  std::optional<double> maybe_train() {
    const std::size_t k = cfg_.train.batch;
    if (replay_.size() < k) return std::nullopt;
    auto sample = replay_.sample(k);
    std::vector<double> td;
    const double loss = learner_.train_step(sample.items, &td);
    if (cfg_.delete_after_sample) {
      replay_.erase(sample.indices);
    } else {
      for (std::size_t i = 0; i < td.size(); ++i)
        replay_.update_priority(sample.indices[i], std::abs(td[i]) + 1e-6);
    }
    losses_.push_back(loss);
    return loss;
  }

  AgentConfig cfg_;
  Learner learner_;
  ReplayBuffer replay_;
  OuNoise noise_;
  Rng random_;
  std::optional<std::pair<ConnectionState, AgentAction>> previous_;
  std::uint64_t learning_slots_ = 0;
  std::vector<double> rewards_;
  std::vector<double> losses_;
};

}  // namespace mplab::agent
