#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mplab/errors.hpp"
#include "mplab/netsim/link.hpp"
#include "mplab/transport/controllers.hpp"
#include "mplab/transport/scheduler.hpp"

namespace mplab::harness {

using netsim::LinkChange;
using netsim::LinkField;
using netsim::LinkModel;
using transport::ControllerKind;
using transport::SchedulerKind;

enum class FlowKind { mptcp, single };

/// `count` identical connections over `paths`. Single-path flows run Reno on paths[0].
struct FlowGroup {
  FlowKind kind = FlowKind::mptcp;
  std::size_t count = 1;
  std::vector<std::size_t> paths;

  bool operator==(const FlowGroup&) const = default;
};

struct TrainingSettings {
  std::size_t episodes = 8;
  double episode_duration = 60.0;  ///< 0: the experiment duration
  std::size_t batch = 4;
  double window_step = 0.25;
  std::size_t eval_slots = 100;  ///< tail used for reward comparisons
  std::size_t random_start = 5000;
  std::size_t actor_delay = 1500;

  bool operator==(const TrainingSettings&) const = default;
};

struct ExperimentConfig {
  std::string id = "custom";
  std::vector<LinkModel> paths;
  std::vector<FlowGroup> flows;
  ControllerKind controller = ControllerKind::lia;
  std::optional<SchedulerKind> scheduler;  ///< unset: agent for DQL, proportional otherwise
  double duration = 60.0;
  std::vector<std::uint64_t> seeds{1};
  std::optional<std::uint64_t> file_size;  ///< bytes, per MPTCP connection
  double sample_interval = 0.1;
  std::optional<std::uint64_t> seed;  ///< base seed for single-seed commands
  TrainingSettings training;

  SchedulerKind effective_scheduler() const {
    if (scheduler) return *scheduler;
    return controller == ControllerKind::dql ? SchedulerKind::agent : SchedulerKind::proportional;
  }

  std::size_t connection_count() const {
    std::size_t n = 0;
    for (const auto& g : flows) n += g.count;
    return n;
  }

  void validate() const {
    if (paths.empty()) throw ConfigError("experiment needs at least one path");
    if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    if (!(sample_interval > 0.0)) throw ConfigError("sample interval must be positive");
    if (seeds.empty()) throw ConfigError("seed list is empty");
    if (flows.empty()) throw ConfigError("experiment has no flows");
    for (const auto& p : paths) {
      try {
        p.validate();
        for (const auto& c : p.changes) p.at(c.at);
      } catch (const PreconditionError& e) {
        throw ConfigError(std::string("bad path: ") + e.what());
      }
    }
    for (const auto& g : flows) {
      if (g.paths.empty()) throw ConfigError("flow group has no paths");
      if (g.kind == FlowKind::single && g.paths.size() != 1)
        throw ConfigError("single-path flows take exactly one path");
      for (auto p : g.paths)
        if (p >= paths.size()) throw ConfigError("flow refers to a missing path");
    }
    if (file_size && *file_size == 0) throw ConfigError("file size must be positive");
  }
};

inline LinkModel make_path(double mbps, double delay_s, double loss) {
  LinkModel m;
  m.bandwidth = netsim::mbps_to_pps(mbps);
  m.prop_delay = delay_s;
  m.loss_prob = loss;
  m.queue_capacity = netsim::default_queue_capacity(m.bandwidth, m.prop_delay);
  return m;
}

inline std::vector<std::uint64_t> default_seeds() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

/// Experiments I-IV. "I-body" is the alternative first experiment with
/// 20 Mbps paths and a 30 MB file.
inline ExperimentConfig build_experiment(const std::string& id) {
  ExperimentConfig c;
  c.id = id;
  c.seeds = default_seeds();
  if (id == "I" || id == "I-body") {
    const bool body = id == "I-body";
    const double mbps = body ? 20.0 : 10.0;
    c.paths = {make_path(mbps, 0.050, 0.03), make_path(mbps, 0.050, 0.03)};
    c.flows = {{FlowKind::mptcp, 1, {0, 1}}};
    c.duration = 60.0;
    c.file_size = body ? 30'000'000ull : 600'000'000ull;
  } else if (id == "II") {
    c.paths = {make_path(10.0, 0.020, 0.05), make_path(10.0, 0.020, 0.05)};
    for (int k = 1; k <= 8; ++k)
      c.paths[0].changes.push_back({20.0 * k, LinkField::prop_delay, 0.020 + 0.010 * k});
    c.flows = {{FlowKind::mptcp, 1, {0, 1}}};
    c.duration = 180.0;
  } else if (id == "III" || id == "IV") {
    c.paths = {make_path(10.0, 0.150, 0.04), make_path(10.0, 0.150, 0.04)};
    for (int k = 1; k <= 4; ++k)
      c.paths[0].changes.push_back(
          {20.0 * k, LinkField::bandwidth, netsim::mbps_to_pps(10.0 + 10.0 * k)});
    c.duration = 100.0;
    if (id == "III") {
      c.flows = {{FlowKind::mptcp, 1, {0, 1}}};
    } else {
      c.flows = {{FlowKind::mptcp, 5, {0, 1}}, {FlowKind::single, 5, {0}}};
    }
  } else {
    throw ConfigError("unknown experiment id '" + id + "'");
  }
  return c;
}

// JSON schema. Paths are given in Mbps, milliseconds and loss probability;
// a config naming a built-in experiment starts from it and overrides fields.

inline const char* to_string(FlowKind k) { return k == FlowKind::mptcp ? "mptcp" : "single"; }

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json paths = json::array();
  for (const auto& p : c.paths) {
    json changes = json::array();
    for (const auto& ch : p.changes) {
      json e{{"at_s", ch.at}};
      switch (ch.field) {
        case LinkField::bandwidth: e["bandwidth_mbps"] = netsim::pps_to_mbps(ch.value); break;
        case LinkField::prop_delay: e["delay_ms"] = ch.value * 1e3; break;
        case LinkField::loss_prob: e["loss"] = ch.value; break;
        case LinkField::queue_capacity: e["queue_packets"] = ch.value; break;
      }
      changes.push_back(e);
    }
    paths.push_back({{"bandwidth_mbps", netsim::pps_to_mbps(p.bandwidth)},
                     {"delay_ms", p.prop_delay * 1e3},
                     {"loss", p.loss_prob},
                     {"queue_packets", p.queue_capacity},
                     {"changes", changes}});
  }
  json flows = json::array();
  for (const auto& g : c.flows)
    flows.push_back({{"type", to_string(g.kind)}, {"count", g.count}, {"paths", g.paths}});
  json j{{"experiment", c.id},
         {"paths", paths},
         {"flows", flows},
         {"controller", transport::to_string(c.controller)},
         {"duration_s", c.duration},
         {"seeds", c.seeds},
         {"sample_interval_s", c.sample_interval},
         {"training",
          {{"episodes", c.training.episodes},
           {"episode_duration_s", c.training.episode_duration},
           {"batch", c.training.batch},
           {"window_step", c.training.window_step},
           {"eval_slots", c.training.eval_slots},
           {"random_start", c.training.random_start},
           {"actor_delay", c.training.actor_delay}}}};
  if (c.scheduler) j["scheduler"] = transport::to_string(*c.scheduler);
  if (c.file_size) j["file_size_bytes"] = *c.file_size;
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

namespace detail {

template <class T>
T get(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline LinkModel path_from_json(const nlohmann::json& j) {
  LinkModel m;
  m.bandwidth = netsim::mbps_to_pps(get<double>(j, "bandwidth_mbps"));
  m.prop_delay = get<double>(j, "delay_ms") * 1e-3;
  m.loss_prob = j.contains("loss") ? get<double>(j, "loss") : 0.0;
  m.queue_capacity = j.contains("queue_packets")
                         ? get<std::size_t>(j, "queue_packets")
                         : netsim::default_queue_capacity(m.bandwidth, m.prop_delay);
  if (j.contains("changes")) {
    for (const auto& e : j.at("changes")) {
      LinkChange ch;
      ch.at = get<double>(e, "at_s");
      if (e.contains("bandwidth_mbps")) {
        ch.field = LinkField::bandwidth;
        ch.value = netsim::mbps_to_pps(get<double>(e, "bandwidth_mbps"));
      } else if (e.contains("delay_ms")) {
        ch.field = LinkField::prop_delay;
        ch.value = get<double>(e, "delay_ms") * 1e-3;
      } else if (e.contains("loss")) {
        ch.field = LinkField::loss_prob;
        ch.value = get<double>(e, "loss");
      } else if (e.contains("queue_packets")) {
        ch.field = LinkField::queue_capacity;
        ch.value = get<double>(e, "queue_packets");
      } else {
        throw ConfigError("path change names no field");
      }
      m.changes.push_back(ch);
    }
  }
  return m;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  const std::string id = j.contains("experiment") ? detail::get<std::string>(j, "experiment") : "custom";
  if (id == "I" || id == "I-body" || id == "II" || id == "III" || id == "IV")
    c = build_experiment(id);
  c.id = id;
  if (j.contains("paths")) {
    c.paths.clear();
    for (const auto& p : j.at("paths")) c.paths.push_back(detail::path_from_json(p));
  }
  if (j.contains("flows")) {
    c.flows.clear();
    for (const auto& f : j.at("flows")) {
      FlowGroup g;
      const auto type = detail::get<std::string>(f, "type");
      if (type == "mptcp") g.kind = FlowKind::mptcp;
      else if (type == "single") g.kind = FlowKind::single;
      else throw ConfigError("unknown flow type '" + type + "'");
      g.count = f.contains("count") ? detail::get<std::size_t>(f, "count") : 1;
      g.paths = detail::get<std::vector<std::size_t>>(f, "paths");
      c.flows.push_back(g);
    }
  }
  if (j.contains("controller"))
    c.controller = transport::parse_controller(detail::get<std::string>(j, "controller"));
  if (j.contains("scheduler"))
    c.scheduler = transport::parse_scheduler(detail::get<std::string>(j, "scheduler"));
  if (j.contains("duration_s")) c.duration = detail::get<double>(j, "duration_s");
  if (j.contains("seeds")) c.seeds = detail::get<std::vector<std::uint64_t>>(j, "seeds");
  if (j.contains("file_size_bytes")) {
    if (j.at("file_size_bytes").is_null()) c.file_size.reset();
    else c.file_size = detail::get<std::uint64_t>(j, "file_size_bytes");
  }
  if (j.contains("sample_interval_s")) c.sample_interval = detail::get<double>(j, "sample_interval_s");
  if (j.contains("seed")) c.seed = detail::get<std::uint64_t>(j, "seed");
  if (j.contains("training")) {
    const auto& t = j.at("training");
    auto& s = c.training;
    if (t.contains("episodes")) s.episodes = detail::get<std::size_t>(t, "episodes");
    if (t.contains("episode_duration_s")) s.episode_duration = detail::get<double>(t, "episode_duration_s");
    if (t.contains("batch")) s.batch = detail::get<std::size_t>(t, "batch");
    if (t.contains("window_step")) s.window_step = detail::get<double>(t, "window_step");
    if (t.contains("eval_slots")) s.eval_slots = detail::get<std::size_t>(t, "eval_slots");
    if (t.contains("random_start")) s.random_start = detail::get<std::size_t>(t, "random_start");
    if (t.contains("actor_delay")) s.actor_delay = detail::get<std::size_t>(t, "actor_delay");
  }
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every field that shapes the scenario; controller and scheduler excluded.
inline bool same_scenario(const ExperimentConfig& a, const ExperimentConfig& b) {
  auto strip = [](nlohmann::json j) {
    j.erase("controller");
    j.erase("scheduler");
    j.erase("training");
    j.erase("seed");
    return j;
  };
  return strip(to_json(a)) == strip(to_json(b));
}

}  // namespace mplab::harness
