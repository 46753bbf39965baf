#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mplab/harness/runner.hpp"

namespace mplab::harness {

struct EpisodeSummary {
  std::size_t episode = 0;
  std::size_t slots = 0;
  double mean_reward = 0.0;
  std::size_t train_steps = 0;
};

/// Header of the training log: episode, slot, reward, critic_loss, cwnd_k..., weight_k...
inline void write_training_header(std::ostream& os, std::size_t subflows) {
  os << "episode,slot,reward,critic_loss";
  for (std::size_t k = 0; k < subflows; ++k) os << ",cwnd" << k;
  for (std::size_t k = 0; k < subflows; ++k) os << ",weight" << k;
  os << '\n';
}

inline void write_training_row(std::ostream& os, std::size_t episode, const SlotRecord& r) {
  os << episode << ',' << r.slot << ',' << format_number(r.reward) << ','
     << format_optional(r.critic_loss);
  for (double w : r.cwnd) os << ',' << format_number(w);
  for (double w : r.weights) os << ',' << format_number(w);
  os << '\n';
}

/// Offline episodes of the config scenario with the DQL controller; the agent
/// learns in place. `log` (optional) receives one training-CSV row per slot.
inline std::vector<EpisodeSummary> train(const ExperimentConfig& base, DqlAgent& agent,
                                         std::size_t episodes, std::uint64_t seed,
                                         std::ostream* log = nullptr) {
  ExperimentConfig cfg = base;
  cfg.controller = ControllerKind::dql;
  cfg.validate();
  const double len = cfg.training.episode_duration > 0.0 ? cfg.training.episode_duration : cfg.duration;
  const bool saved_learn = agent.config().learn;
  const bool saved_explore = agent.config().explore;
  agent.config().learn = true;
  agent.config().explore = true;
  std::vector<EpisodeSummary> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    RunOptions opt;
    opt.agent = &agent;
    opt.duration = len;
    if (log) opt.on_slot = [&, e](const SlotRecord& r) { write_training_row(*log, e, r); };
    const auto before = agent.learner().steps();
    const auto r = run(cfg, derive_seed(seed, "episode/" + std::to_string(e)), opt);
    EpisodeSummary s;
    s.episode = e;
    s.slots = r.rewards.size();
    for (double x : r.rewards) s.mean_reward += x;
    if (s.slots) s.mean_reward /= static_cast<double>(s.slots);
    s.train_steps = agent.learner().steps() - before;
    out.push_back(s);
    agent.end_episode();
  }
  agent.config().learn = saved_learn;
  agent.config().explore = saved_explore;
  return out;
}

inline double tail_mean(const std::vector<double>& v, std::size_t n) {
  require(!v.empty(), "no slots recorded");
  const std::size_t k = std::min(n, v.size());
  double s = 0.0;
  for (std::size_t i = v.size() - k; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(k);
}

struct SmokeSeed {
  std::uint64_t seed = 0;
  double learned = 0.0;
  double random = 0.0;
  std::size_t train_steps = 0;
};

struct SmokeResult {
  std::vector<SmokeSeed> seeds;
  double mean_difference = 0.0;
  double sd_difference = 0.0;
  double lower_bound = 0.0;  ///< one-sided 95% lower confidence bound on the mean difference
  double seconds = 0.0;
  bool significant() const { return lower_bound > 0.0; }
};

/// One-sided Student-t lower bound on the mean of `d`.
inline double t_lower_bound(const std::vector<double>& d, double confidence, double* mean_out = nullptr,
                            double* sd_out = nullptr) {
  require(d.size() >= 2, "need at least two paired samples");
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double x : d) mean += x / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, confidence);
  if (mean_out) *mean_out = mean;
  if (sd_out) *sd_out = sd;
  return mean - t * sd / std::sqrt(n);
}

/// Per seed: train a fresh agent, then evaluate it greedily without learning
/// against a uniform-random-action agent on the same scenario seed. Compares
/// the mean reward over the final `eval_slots` slots of each evaluation.
inline SmokeResult learning_smoke(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = base;
  cfg.controller = ControllerKind::dql;
  cfg.file_size.reset();
  SmokeResult out;
  std::vector<double> diffs;
  for (auto seed : seeds) {
    SmokeSeed s;
    s.seed = seed;
    const std::uint64_t eval_seed = derive_seed(seed, "evaluation");

    DqlAgent learned(agent_config_for(cfg, seed));
    train(cfg, learned, cfg.training.episodes, seed);
    s.train_steps = learned.learner().steps();
    learned.config().learn = false;
    learned.config().explore = false;
    RunOptions opt;
    opt.agent = &learned;
    s.learned = tail_mean(run(cfg, eval_seed, opt).rewards, cfg.training.eval_slots);

    auto rc = agent_config_for(cfg, seed);
    rc.mode = agent::AgentMode::uniform_random;
    rc.learn = false;
    DqlAgent random(rc);
    opt.agent = &random;
    s.random = tail_mean(run(cfg, eval_seed, opt).rewards, cfg.training.eval_slots);

    diffs.push_back(s.learned - s.random);
    out.seeds.push_back(s);
  }
  out.lower_bound = t_lower_bound(diffs, 0.95, &out.mean_difference, &out.sd_difference);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace mplab::harness
