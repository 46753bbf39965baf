#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "mplab/agent/gradcheck.hpp"
#include "mplab/harness/compare.hpp"
#include "mplab/harness/training.hpp"
#include "mplab/stability/report.hpp"

using namespace mplab;
using namespace mplab::harness;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCheckFailed = 2;
constexpr int kIo = 3;

constexpr std::uint64_t kDefaultSeed = 42;
constexpr std::size_t kGradcheckSeeds = 20;
constexpr double kGradcheckTolerance = 1e-4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::string> controller;
  std::optional<std::string> scheduler;
  std::optional<std::size_t> episodes;
  std::optional<std::string> checkpoint;
};

ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required for this command");
  auto cfg = load_config(o.config);
  if (o.scheduler) cfg.scheduler = transport::parse_scheduler(*o.scheduler);
  return cfg;
}

std::uint64_t base_seed(const Options& o, const std::optional<ExperimentConfig>& cfg) {
  if (o.seed) return *o.seed;
  if (cfg && cfg->seed) return *cfg->seed;
  return kDefaultSeed;
}

/// Seeds for multi-seed commands: --seed alone, else the config's list.
void apply_seed_override(const Options& o, ExperimentConfig& cfg) {
  if (o.seed) cfg.seeds = {*o.seed};
}

fs::path out_dir(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create output directory " + o.out + ": " + ec.message());
  return fs::path(o.out);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
  f.close();
  if (!f) throw IoError("write failed for " + p.string());
}

DqlAgent load_agent(const ExperimentConfig& cfg, const std::string& path, std::uint64_t seed) {
  DqlAgent a(agent_config_for(cfg, seed));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  a.load(in);
  return a;
}

std::string series_csv(const RunResult& r) {
  std::ostringstream os;
  write_csv(os, r.series, r.flows.size());
  return os.str();
}

std::string run_file(const std::string& label, std::uint64_t seed) {
  return "run_" + label + "_seed" + std::to_string(seed) + ".csv";
}

std::vector<RunResult> run_controller(ExperimentConfig cfg, ControllerKind k,
                                      const std::optional<std::string>& checkpoint, const fs::path& dir) {
  cfg.controller = k;
  AgentFactory factory;
  if (k == ControllerKind::dql)
    factory = [&](std::uint64_t seed) {
      return load_agent(cfg, *checkpoint, derive_seed(seed, "agent"));
    };
  auto runs = run_seeds(cfg, factory);
  for (const auto& r : runs) {
    write_file(dir / run_file(transport::to_string(k), r.seed), series_csv(r));
    if (r.conservation_violations)
      throw StateError("packet conservation violated in seed " + std::to_string(r.seed));
  }
  return runs;
}

int cmd_train(const Options& o) {
  auto cfg = load(o);
  cfg.controller = ControllerKind::dql;
  const auto seed = base_seed(o, cfg);
  const std::size_t episodes = o.episodes.value_or(cfg.training.episodes);
  const auto dir = out_dir(o);
  std::size_t subflows = 0;
  for (const auto& g : cfg.flows)
    if (g.kind == FlowKind::mptcp) {
      subflows = g.paths.size();
      break;
    }
  if (subflows == 0) throw UsageError("training needs an MPTCP flow in the config");

  DqlAgent agent(agent_config_for(cfg, seed));
  std::ostringstream log;
  write_training_header(log, subflows);
  const auto eps = train(cfg, agent, episodes, seed, &log);
  write_file(dir / "training.csv", log.str());
  std::ostringstream ck;
  agent.save(ck);
  write_file(dir / "agent.ckpt", ck.str());
  for (const auto& e : eps)
    std::printf("episode %zu: %zu slots, mean reward %.4f, %zu updates\n", e.episode, e.slots,
                e.mean_reward, e.train_steps);
  std::printf("checkpoint written to %s\n", (dir / "agent.ckpt").string().c_str());
  return kOk;
}

int cmd_run(const Options& o) {
  auto cfg = load(o);
  apply_seed_override(o, cfg);
  if (o.controller) cfg.controller = transport::parse_controller(*o.controller);
  const bool dql = cfg.controller == ControllerKind::dql;
  if (dql && !o.checkpoint) throw UsageError("the dql controller needs --checkpoint");
  if (!dql && o.checkpoint) throw UsageError("--checkpoint only applies to the dql controller");
  const auto dir = out_dir(o);
  const auto runs = run_controller(cfg, cfg.controller, o.checkpoint, dir);
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json j{{"seed", r.seed},
                     {"elapsed_s", format_number(r.elapsed)},
                     {"aggregate_mbps", format_number(r.aggregate_mbps)}};
    nlohmann::json done = nlohmann::json::array();
    for (const auto& f : r.flows)
      done.push_back(f.completion_time ? nlohmann::json(format_number(*f.completion_time)) : nlohmann::json());
    j["completion_s"] = done;
    per_seed.push_back(j);
    std::printf("seed %llu: %.3f Mbps over %.1f s\n", static_cast<unsigned long long>(r.seed),
                r.aggregate_mbps, r.elapsed);
  }
  const std::string label = transport::to_string(cfg.controller);
  write_file(dir / ("summary_" + label + ".json"),
             nlohmann::json{{"experiment", cfg.id}, {"controller", label}, {"runs", per_seed}}.dump(2) + "\n");
  return kOk;
}

int cmd_compare(const Options& o) {
  auto cfg = load(o);
  apply_seed_override(o, cfg);
  const auto dir = out_dir(o);
  std::vector<ControllerKind> kinds{ControllerKind::lia, ControllerKind::olia, ControllerKind::balia};
  if (o.checkpoint) kinds.insert(kinds.begin(), ControllerKind::dql);
  std::vector<ControllerRuns> results;
  for (auto k : kinds) {
    auto cc = cfg;
    cc.controller = k;
    results.push_back({transport::to_string(k), cc, run_controller(cfg, k, o.checkpoint, dir)});
  }
  const auto table = compare(results);
  std::ostringstream csv;
  write_summary_csv(csv, table);
  write_file(dir / "compare.csv", csv.str());
  write_file(dir / "compare.json", to_json(table).dump(2) + "\n");
  for (const auto& n : table.notes) std::printf("note: %s\n", n.c_str());
  for (const auto& r : table.rows)
    std::printf("%-6s %-24s %.3f +- %.3f (n=%zu)\n", r.controller.c_str(), r.metric.c_str(), r.mean,
                r.ci_half_width, r.n);
  return kOk;
}

int cmd_stability(const Options& o) {
  std::optional<ExperimentConfig> cfg;
  if (!o.config.empty()) cfg = load(o);
  stability::SuiteOptions so;
  so.seed = base_seed(o, cfg);
  const auto rep = stability::run_stability_suite(so);
  const auto dir = out_dir(o);
  write_file(dir / "stability.txt", rep.text);
  write_file(dir / "stability.csv", rep.csv());
  std::fputs(rep.text.c_str(), stdout);
  std::printf("value iteration %.3f s, Q-learning %.3f s\n", rep.vi_seconds, rep.q_learning_seconds);
  std::printf("verdict: %s\n", rep.ok() ? "all guaranteed checks pass" : "a guaranteed check failed");
  return rep.ok() ? kOk : kCheckFailed;
}

int cmd_gradcheck(const Options& o) {
  std::optional<ExperimentConfig> cfg;
  if (!o.config.empty()) cfg = load(o);
  const auto seed = base_seed(o, cfg);
  const auto dir = out_dir(o);
  std::map<std::string, std::pair<double, std::string>> worst;
  std::ostringstream csv;
  csv << "seed,network,max_relative_error,worst_parameter\n";
  for (std::size_t i = 0; i < kGradcheckSeeds; ++i) {
    const std::uint64_t s = seed + i;
    for (const auto& r : agent::agent_gradcheck(s)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6e", r.max_relative_error);
      csv << s << ',' << r.network << ',' << buf << ',' << r.worst_parameter << '\n';
      auto& w = worst[r.network];
      if (r.max_relative_error >= w.first) w = {r.max_relative_error, r.worst_parameter};
    }
  }
  write_file(dir / "gradcheck.csv", csv.str());
  bool ok = true;
  for (const auto& [net, w] : worst) {
    const bool pass = w.first < kGradcheckTolerance;
    ok = ok && pass;
    std::printf("%-15s max relative error %.3e (%s) %s\n", net.c_str(), w.first, w.second.c_str(),
                pass ? "ok" : "FAIL");
  }
  return ok ? kOk : kCheckFailed;
}

int cmd_trace(const Options& o) {
  auto cfg = load(o);
  if (o.controller) cfg.controller = transport::parse_controller(*o.controller);
  const bool dql = cfg.controller == ControllerKind::dql;
  if (dql && !o.checkpoint) throw UsageError("the dql controller needs --checkpoint");
  const auto seed = base_seed(o, cfg);
  const auto dir = out_dir(o);
  std::ostringstream trace;
  RunOptions opt;
  opt.trace = &trace;
  std::optional<DqlAgent> agent;
  if (dql) opt.agent = &agent.emplace(load_agent(cfg, *o.checkpoint, derive_seed(seed, "agent")));
  const auto r = run(cfg, seed, opt);
  write_file(dir / "trace.csv", trace.str());
  write_file(dir / run_file(transport::to_string(cfg.controller), seed), series_csv(r));
  std::printf("trace of seed %llu written to %s\n", static_cast<unsigned long long>(seed),
              (dir / "trace.csv").string().c_str());
  return r.conservation_violations ? kCheckFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multipath transport lab: training, experiment runs, stability and gradient checks"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("--config", o.config, "Experiment config (JSON)");
  app.add_option("--seed", o.seed, "Seed; overrides the config");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--controller", o.controller, "dql, lia, olia, balia or reno")
      ->check(CLI::IsMember({"dql", "lia", "olia", "balia", "reno"}));
  app.add_option("--scheduler", o.scheduler, "proportional, minrtt or agent")
      ->check(CLI::IsMember({"proportional", "minrtt", "agent"}));
  app.add_option("--episodes", o.episodes, "Training episodes");
  app.add_option("--checkpoint", o.checkpoint, "Agent checkpoint");
  app.fallthrough();

  auto* train = app.add_subcommand("train", "Offline training; writes agent.ckpt and training.csv");
  auto* runc = app.add_subcommand("run", "Run the experiment for every seed; one CSV per seed");
  auto* comp = app.add_subcommand("compare", "Run LIA, OLIA, BALIA (and DQL with --checkpoint) and summarize");
  auto* stab = app.add_subcommand("stability", "Bellman, Q-learning and contraction report");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the agent networks over 20 seeds");
  auto* trc = app.add_subcommand("trace", "One run with a packet event trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(o);
    if (*runc) return cmd_run(o);
    if (*comp) return cmd_compare(o);
    if (*stab) return cmd_stability(o);
    if (*grad) return cmd_gradcheck(o);
    if (*trc) return cmd_trace(o);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kCheckFailed;
  }
  return kUsage;
}
