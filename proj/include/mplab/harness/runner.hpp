#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "mplab/agent/agent.hpp"
#include "mplab/harness/config.hpp"
#include "mplab/harness/metrics.hpp"
#include "mplab/transport/connection.hpp"

namespace mplab::harness {

using agent::DqlAgent;
using transport::Connection;

struct SlotRecord {
  std::size_t connection = 0;
  std::size_t slot = 0;
  double time = 0.0;
  double reward = 0.0;
  std::optional<double> critic_loss;
  std::vector<double> cwnd;
  std::vector<double> weights;
};

using SlotObserver = std::function<void(const SlotRecord&)>;

struct RunOptions {
  /// Drives the first DQL connection and keeps learning in place; the other DQL
  /// connections act with frozen copies. Unset: a fresh agent per run.
  DqlAgent* agent = nullptr;
  std::optional<double> duration;
  SlotObserver on_slot;  ///< slots of the first DQL connection
  std::ostream* trace = nullptr;
};

struct FlowResult {
  FlowKind kind = FlowKind::mptcp;
  std::uint64_t delivered = 0;
  std::optional<double> completion_time;
  double throughput_mbps = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  MetricsSeries series;
  std::vector<FlowResult> flows;
  double elapsed = 0.0;
  double aggregate_mbps = 0.0;
  std::size_t samples = 0;
  std::size_t conservation_violations = 0;
  std::vector<double> rewards;  ///< per slot, first DQL connection
};

inline double packets_to_mbps(double packets, double seconds) {
  return seconds > 0.0 ? packets * netsim::kPacketBytes * 8.0 / 1e6 / seconds : 0.0;
}

inline agent::AgentConfig agent_config_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  agent::AgentConfig a;
  a.seed = seed;
  a.train.batch = cfg.training.batch;
  a.window_step = cfg.training.window_step;
  a.random_start = cfg.training.random_start;
  a.train.actor_delay = cfg.training.actor_delay;
  return a;
}

/// One seeded simulation of the experiment, sampled every sample_interval.
inline RunResult run(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opt = {}) {
  cfg.validate();
  const double duration = opt.duration.value_or(cfg.duration);
  require(duration > 0.0, "run duration must be positive");

  netsim::Simulator sim(cfg.paths, seed);
  sim.set_trace(opt.trace);

  std::vector<std::unique_ptr<Connection>> conns;
  std::vector<FlowKind> kinds;
  for (const auto& g : cfg.flows)
    for (std::size_t k = 0; k < g.count; ++k) {
      transport::ConnectionConfig cc;
      cc.flow_id = static_cast<std::uint32_t>(conns.size());
      cc.paths = g.paths;
      if (g.kind == FlowKind::single) {
        cc.controller = ControllerKind::reno;
        cc.scheduler = SchedulerKind::proportional;
      } else {
        cc.controller = cfg.controller;
        cc.scheduler = cfg.effective_scheduler();
        if (cfg.file_size)
          cc.file_packets = static_cast<std::uint64_t>(
              std::ceil(static_cast<double>(*cfg.file_size) / netsim::kPacketBytes));
      }
      conns.push_back(std::make_unique<Connection>(sim, cc));
      kinds.push_back(g.kind);
    }

  RunResult res;
  res.seed = seed;

  // Agents: the primary one (given or fresh) and frozen copies for the rest.
  std::optional<DqlAgent> owned;
  std::deque<DqlAgent> copies;
  DqlAgent* primary = nullptr;
  std::vector<double> interval_rewards;
  std::size_t primary_slots = 0;
  if (cfg.controller == ControllerKind::dql) {
    primary = opt.agent;
    if (!primary) primary = &owned.emplace(agent_config_for(cfg, derive_seed(seed, "agent")));
    primary->end_episode();
    bool first = true;
    for (std::size_t k = 0; k < conns.size(); ++k) {
      if (kinds[k] != FlowKind::mptcp) continue;
      DqlAgent* ag = primary;
      if (!first)
        ag = &copies.emplace_back(
            DqlAgent::frozen_copy(*primary, derive_seed(seed, "agent/" + std::to_string(k))));
      const bool is_primary = first;
      first = false;
      auto target = std::make_shared<std::vector<double>>();
      for (const auto& s : conns[k]->subflows()) target->push_back(s.cwnd);
      conns[k]->set_slot_hook([&, ag, is_primary, k, target](Connection& c, double len) {
        const auto state = c.observe_slot(len);
        const auto ctl = ag->control_slot(state, *target);
        *target = ctl.window;
        for (std::size_t i = 0; i < ctl.cwnd.size(); ++i) c.set_cwnd(i, ctl.cwnd[i]);
        c.set_agent_weights(ctl.weights);
        interval_rewards.push_back(ctl.reward);
        if (!is_primary) return;
        res.rewards.push_back(ctl.reward);
        if (opt.on_slot)
          opt.on_slot({k, primary_slots, sim.now(), ctl.reward, ctl.critic_loss, ctl.cwnd, ctl.weights});
        ++primary_slots;
      });
    }
  }
  for (auto& c : conns) c->start();

  std::vector<std::uint64_t> last(conns.size(), 0);
  bool any_finite = false;
  for (auto& c : conns) any_finite = any_finite || c->config().file_packets.has_value();
  double t_prev = 0.0;
  for (std::size_t k = 1;; ++k) {
    const double t = std::min(static_cast<double>(k) * cfg.sample_interval, duration);
    sim.advance(t);
    if (!sim.conserved()) ++res.conservation_violations;

    Sample s;
    s.time = t;
    const double dt = t - t_prev;
    std::vector<double> delays;
    double total = 0.0;
    for (std::size_t i = 0; i < conns.size(); ++i) {
      const auto d = conns[i]->delivered();
      s.flow_throughput_mbps.push_back(packets_to_mbps(static_cast<double>(d - last[i]), dt));
      total += static_cast<double>(d - last[i]);
      last[i] = d;
      for (double x : conns[i]->take_reorder_delays()) delays.push_back(x * 1e3);
    }
    s.agg_throughput_mbps = packets_to_mbps(total, dt);
    if (!delays.empty()) {
      s.reorder_p50_ms = quantile(delays, 0.5);
      s.reorder_p95_ms = quantile(delays, 0.95);
    }
    if (!interval_rewards.empty()) {
      double r = 0.0;
      for (double x : interval_rewards) r += x;
      s.reward = r / static_cast<double>(interval_rewards.size());
      interval_rewards.clear();
    }
    res.series.samples.push_back(std::move(s));
    t_prev = t;

    bool all_done = any_finite;
    for (auto& c : conns)
      if (c->config().file_packets && !c->finished()) all_done = false;
    if (t >= duration || all_done) break;
  }

  res.elapsed = t_prev;
  res.samples = res.series.samples.size();
  std::uint64_t delivered = 0;
  for (std::size_t i = 0; i < conns.size(); ++i) {
    FlowResult f;
    f.kind = kinds[i];
    f.delivered = conns[i]->delivered();
    f.completion_time = conns[i]->completion_time();
    f.throughput_mbps = packets_to_mbps(static_cast<double>(f.delivered), res.elapsed);
    delivered += f.delivered;
    res.flows.push_back(f);
  }
  res.aggregate_mbps = packets_to_mbps(static_cast<double>(delivered), res.elapsed);
  return res;
}

/// Builds the agent that drives a DQL run for one seed.
using AgentFactory = std::function<DqlAgent(std::uint64_t seed)>;

/// Runs every seed of the config, fanned out over `workers` threads; results
/// come back in seed-list order. DQL runs use `make_agent` when given, a fresh
/// agent otherwise.
inline std::vector<RunResult> run_seeds(const ExperimentConfig& cfg, AgentFactory make_agent = {},
                                        unsigned workers = 0) {
  cfg.validate();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.seeds.size()));
  std::vector<RunResult> out(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        RunOptions opt;
        std::optional<DqlAgent> local;
        if (make_agent && cfg.controller == ControllerKind::dql)
          opt.agent = &local.emplace(make_agent(cfg.seeds[i]));
        out[i] = run(cfg, cfg.seeds[i], opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace mplab::harness
