#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mplab/agent/agent.hpp"
#include "mplab/agent/gradcheck.hpp"

using namespace mplab;
using namespace mplab::agent;
using Catch::Approx;

namespace {

void zero_all(AgentNets& nets) {
  for (auto& p : nets.params()) std::fill(p.value.begin(), p.value.end(), 0.0);
}

SubflowObservation obs(double thr, double rtt = 0.05) {
  SubflowObservation o;
  o.sending_rate = thr * 1.1;
  o.throughput = thr;
  o.rtt = rtt;
  o.schedule_weight = 0.5;
  return o;
}

AgentConfig small_config(std::uint64_t seed = 1) {
  AgentConfig c;
  c.shape = {8, 16};
  c.seed = seed;
  c.replay_capacity = 100;
  return c;
}

}  // namespace

TEST_CASE("representation output size is fixed", "[agent]") {
  AgentNets nets;
  Rng rng(3);
  nets.initialize(rng);
  const ConnectionState one{obs(100)}, two{obs(100), obs(400, 0.2)}, swapped{obs(400, 0.2), obs(100)};
  CHECK(nets.encode(one).final_state.size() == 64);
  CHECK(nets.encode(two).final_state.size() == 64);
  // Sequence encoding: order matters on random weights.
  CHECK(nets.encode(two).final_state != nets.encode(swapped).final_state);
  CHECK_THROWS_AS(nets.encode(ConnectionState{}), PreconditionError);

  zero_all(nets);
  for (double v : nets.encode(two).final_state) CHECK(v == 0.0);
  const auto a = nets.act(nets.encode(two));
  for (std::size_t n = 0; n < 2; ++n) {
    CHECK(a.window_adjust[n] == 0.0);
    CHECK(a.schedule_logit[n] == 0.0);
  }
}

TEST_CASE("reward examples", "[agent]") {
  CHECK(compute_reward(std::vector<double>{1, 1}) == 0.0);
  CHECK(compute_reward(std::vector<double>{std::exp(1.0), std::exp(2.0)}) == Approx(3.0));
  CHECK(compute_reward(std::vector<double>{0, 1}, 1e-6) == Approx(std::log(1e-6)));
  CHECK(compute_reward(std::vector<double>{0, 1}, 1e-6) == Approx(-13.8155).margin(1e-4));
  CHECK_THROWS_AS(compute_reward(std::vector<double>{}), PreconditionError);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> g{uniform(rng, 0, 10), uniform(rng, 0, 10)};
    const double r = compute_reward(g);
    g[i % 2] += uniform(rng, 1e-3, 1.0);
    CHECK(compute_reward(g) > r);
  }
}

TEST_CASE("acting is deterministic without exploration", "[agent]") {
  DqlAgent agent(small_config());
  const ConnectionState s{obs(100), obs(200)};
  const auto rep = agent.encode(s);
  const auto a1 = agent.act(rep, false);
  const auto a2 = agent.act(rep, false);
  CHECK(a1.window_adjust == a2.window_adjust);
  CHECK(a1.schedule_logit == a2.schedule_logit);

  auto cfg = small_config();
  cfg.noise.volatility = 0.0;
  DqlAgent quiet(cfg);
  const auto b1 = quiet.act(quiet.encode(s), false);
  const auto b2 = quiet.act(quiet.encode(s), true);
  CHECK(b1.window_adjust == b2.window_adjust);
  CHECK(b1.schedule_logit == b2.schedule_logit);
}

TEST_CASE("exploration keeps window adjustments bounded", "[agent]") {
  auto cfg = small_config();
  cfg.noise.volatility = 5.0;
  DqlAgent agent(cfg);
  const ConnectionState s{obs(100), obs(200), obs(50)};
  for (int i = 0; i < 500; ++i) {
    const auto a = agent.act(agent.encode(s), true);
    for (double w : a.window_adjust) CHECK((w >= -1.0 && w <= 1.0));
  }
}

TEST_CASE("OU noise steps", "[agent]") {
  OuNoise full({0.0, 1.0, 0.0, 1.0}, Rng(1));
  full.set_value({1.0});
  CHECK(full.step()[0] == 0.0);
  OuNoise frozen({0.0, 0.0, 0.0, 1.0}, Rng(1));
  frozen.set_value({0.7, -0.2});
  CHECK(frozen.step() == nn::Vector{0.7, -0.2});
  CHECK_THROWS_AS(OuNoise({0.0, 1.0, -1.0, 1.0}, Rng(1)), PreconditionError);
  CHECK_THROWS_AS(OuNoise({0.0, 1.0, 1.0, 0.0}, Rng(1)), PreconditionError);
}

TEST_CASE("OU stationary variance", "[agent]") {
  const double kappa = 0.5, sigma = 0.3, dt = 0.1;
  OuNoise ou({0.0, kappa, sigma, dt}, rng_fork(7, "ou"));
  ou.resize(1);
  for (int i = 0; i < 1000; ++i) ou.step();
  double sum = 0.0, sum2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = ou.step()[0];
    sum += x;
    sum2 += x * x;
  }
  const double var = sum2 / n - (sum / n) * (sum / n);
  CHECK(var == Approx(sigma * sigma / (2.0 * kappa)).epsilon(0.10));
}

TEST_CASE("replay storage and eviction", "[agent]") {
  ReplayBuffer buf(2, 0.6, Rng(1));
  Transition t;
  t.reward = 1.0;
  buf.store(t);
  CHECK(buf.size() == 1);
  const auto s = buf.sample(1);
  CHECK(s.items[0].reward == 1.0);
  CHECK(s.probabilities[0] == 1.0);
  t.reward = 2.0;
  buf.store(t);
  t.reward = 3.0;
  buf.store(t);
  CHECK(buf.size() == 2);
  std::set<double> rewards;
  for (int i = 0; i < 50; ++i) rewards.insert(buf.sample(1).items[0].reward);
  CHECK(rewards == std::set<double>{2.0, 3.0});
  CHECK_THROWS_AS(buf.sample(3), UnderflowError);
  CHECK_THROWS_AS(ReplayBuffer(4, 0.6, Rng(1)).sample(1), UnderflowError);
}

TEST_CASE("replay sampling frequencies", "[agent]") {
  SECTION("uniform priorities") {
    ReplayBuffer buf(10, 0.6, Rng(2));
    for (int i = 0; i < 10; ++i) buf.store(Transition{});
    std::vector<int> count(10, 0);
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) ++count[buf.sample(1).indices[0]];
    for (int c : count) CHECK(std::abs(c / double(draws) - 0.1) < 0.01);
  }
  SECTION("exponent zero ignores priorities") {
    ReplayBuffer buf(10, 0.0, Rng(3));
    for (int i = 0; i < 10; ++i) buf.store(Transition{});
    buf.update_priority(0, 1e6);
    for (double p : buf.probabilities()) CHECK(p == Approx(0.1));
  }
  SECTION("one dominant priority") {
    ReplayBuffer buf(10, 1.0, Rng(4));
    for (int i = 0; i < 10; ++i) buf.store(Transition{});
    buf.update_priority(3, 1e6);
    const auto p = buf.probabilities();
    CHECK(p[3] == Approx(1e6 / (1e6 + 9)));
    int hits = 0;
    for (int d = 0; d < 10000; ++d) hits += buf.sample(1).indices[0] == 3;
    CHECK(hits / 10000.0 > 0.99);
    // Next insertion enters at the maximum priority seen.
    CHECK(buf.max_priority() == 1e6);
  }
  SECTION("tiny priorities") {
    ReplayBuffer buf(3, 1.0, Rng(5));
    for (int i = 0; i < 3; ++i) buf.store(Transition{});
    buf.update_priority(1, 1e-12);
    buf.update_priority(2, 1e-12);
    CHECK(buf.probabilities()[0] > 1.0 - 1e-11);
  }
}

TEST_CASE("replay probabilities stay a distribution under churn", "[agent]") {
  ReplayBuffer buf(64, 0.6, Rng(6));
  Rng rng(7);
  for (int step = 0; step < 2000; ++step) {
    buf.store(Transition{});
    if (buf.size() >= 8) {
      auto s = buf.sample(8);
      if (step % 3 == 0) buf.erase(s.indices);
      else
        for (std::size_t i : s.indices) buf.update_priority(i, uniform(rng, 0.01, 5.0));
    }
    const auto p = buf.probabilities();
    double total = 0.0;
    for (double v : p) total += v;
    REQUIRE(std::abs(total - 1.0) < 1e-12);
    REQUIRE(buf.size() <= buf.capacity());
  }
}

TEST_CASE("deleted samples leave the buffer", "[agent]") {
  ReplayBuffer buf(8, 0.6, Rng(8));
  for (int i = 0; i < 5; ++i) buf.store(Transition{});
  auto s = buf.sample(4);
  buf.erase(s.indices);
  std::set<std::size_t> distinct(s.indices.begin(), s.indices.end());
  CHECK(buf.size() == 5 - distinct.size());
  for (std::size_t i : distinct) CHECK(buf.probabilities()[i] == 0.0);
}

TEST_CASE("TD targets", "[agent]") {
  CHECK(bootstrap_target(1.0, 0.95, 2.0, false) == Approx(2.9));
  CHECK(bootstrap_target(1.0, 0.95, 2.0, true) == 1.0);
  AgentNets target({8, 16});
  zero_all(target);
  for (auto& p : target.critic_params())
    if (p.name == "critic.layer2.bias") p.value[0] = 1.0;  // each subflow contributes 1
  Transition t;
  t.reward = 1.0;
  t.next_state = {obs(10), obs(20)};
  CHECK(td_target(target, t, 0.95) == Approx(2.9));
  t.terminal = true;
  CHECK(td_target(target, t, 0.95) == 1.0);
}

TEST_CASE("critic converges on one fixed transition", "[agent]") {
  TrainConfig cfg;
  Learner learner({8, 16}, cfg, Rng(9));
  Transition t;
  t.state = {obs(300), obs(100, 0.1)};
  t.action = {{0.3, -0.2}, {0.1, 0.0}};
  t.reward = 1.0;
  t.terminal = true;
  double q = 0.0;
  for (int i = 0; i < 3000; ++i) learner.train_step({t});
  const auto& nets = learner.online();
  q = nets.value(nets.encode(t.state), t.action);
  CHECK(std::abs(q - 1.0) < 1e-3);
  CHECK(learner.steps() == 3000);
}

TEST_CASE("non-finite loss refuses the update", "[agent]") {
  Learner learner({8, 16}, TrainConfig{}, Rng(10));
  Transition t;
  t.state = {obs(10)};
  t.action = {{0.0}, {0.0}};
  t.reward = std::numeric_limits<double>::infinity();
  t.terminal = true;
  const auto before = nn::snapshot(learner.online().params());
  CHECK_THROWS_AS(learner.train_step({t}), NumericError);
  const auto after = nn::snapshot(learner.online().params());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].values == after[i].values);
}

TEST_CASE("soft update arithmetic", "[agent]") {
  AgentNets online({4, 4}), target({4, 4});
  for (auto& p : online.params()) std::fill(p.value.begin(), p.value.end(), 1.0);
  zero_all(target);
  soft_update(online, target, 0.001);
  for (auto& p : target.params())
    for (double v : p.value) CHECK(v == Approx(0.001).margin(1e-18));
  for (int i = 1; i < 1000; ++i) soft_update(online, target, 0.001);
  for (auto& p : target.params())
    for (double v : p.value) CHECK(std::abs(v - (1.0 - std::pow(0.999, 1000))) < 1e-9);
  CHECK(std::abs(target.params()[0].value[0] - 0.6323) < 1e-4);

  AgentNets same({4, 4});
  Rng rng(11);
  same.initialize(rng);
  AgentNets copy = same;
  soft_update(same, copy, 0.001);
  const auto a = nn::snapshot(same.params()), b = nn::snapshot(copy.params());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);

  AgentNets other({4, 5});
  CHECK_THROWS_AS(soft_update(same, other, 0.001), ShapeError);
}

TEST_CASE("target drift per update is bounded by tau", "[agent]") {
  Learner learner({8, 16}, TrainConfig{}, Rng(12));
  Transition t;
  t.state = {obs(300), obs(100, 0.1)};
  t.action = {{0.3, -0.2}, {0.1, 0.0}};
  t.reward = 2.0;
  t.next_state = t.state;
  for (int i = 0; i < 20; ++i) {
    const auto target_before = nn::snapshot(learner.target().params());
    learner.train_step({t});
    const auto online = nn::snapshot(learner.online().params());
    const auto target_after = nn::snapshot(learner.target().params());
    for (std::size_t k = 0; k < online.size(); ++k) {
      double gap = 0.0, moved = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < online[k].values.size(); ++j) {
        gap = std::max(gap, std::abs(online[k].values[j] - target_before[k].values[j]));
        moved = std::max(moved, std::abs(target_after[k].values[j] - target_before[k].values[j]));
        scale = std::max(scale, std::abs(target_before[k].values[j]));
      }
      // One rounding of the target value on top of the exact bound.
      REQUIRE(moved <= 0.001 * gap + 2.0 * std::numeric_limits<double>::epsilon() * scale);
    }
  }
}

TEST_CASE("slot control mapping", "[agent]") {
  CHECK(map_window(10, 0.0, 0.25, 2, 2048) == 10.0);
  CHECK(map_window(10, 1.0, 0.25, 2, 2048) == 12.0);
  CHECK(map_window(2, -1.0, 0.25, 2, 2048) == 2.0);
  CHECK(map_window(2000, 1.0, 0.25, 2, 2048) == 2048.0);
  const auto w = softmax({0.4, 0.4, 0.4});
  for (double v : w) CHECK(v == Approx(1.0 / 3.0));

  auto cfg = small_config();
  cfg.explore = false;
  cfg.learn = false;
  DqlAgent agent(cfg);
  zero_all(agent.learner().online());
  const auto out = agent.control_slot({obs(10), obs(20), obs(30)}, {10, 17, 33});
  CHECK(out.cwnd == nn::Vector{10, 17, 33});
  CHECK(out.window == nn::Vector{10, 17, 33});
  for (double v : out.weights) CHECK(v == Approx(1.0 / 3.0));
  CHECK(out.reward == Approx(std::log(10.0) + std::log(20.0) + std::log(30.0)));
}

TEST_CASE("agent stores transitions and trains from replay", "[agent]") {
  auto cfg = small_config();
  cfg.train.batch = 4;
  DqlAgent agent(cfg);
  Rng rng(13);
  int trained = 0;
  for (int slot = 0; slot < 40; ++slot) {
    const auto out = agent.control_slot(random_state(rng, 2), {10, 10});
    trained += out.critic_loss.has_value();
  }
  // 39 transitions, each consumed once in batches of four (duplicates are dropped too).
  CHECK(trained >= 9);
  CHECK(agent.replay().size() < 4);
  CHECK(agent.learner().steps() == static_cast<std::uint64_t>(trained));
  CHECK(agent.rewards().size() == 40);
}

TEST_CASE("uniform random agent ignores its networks", "[agent]") {
  auto cfg = small_config();
  cfg.mode = AgentMode::uniform_random;
  DqlAgent agent(cfg);
  Rng rng(14);
  double lo = 1.0, hi = -1.0;
  for (int slot = 0; slot < 200; ++slot) {
    const auto out = agent.control_slot(random_state(rng, 2), {10, 10});
    for (double a : out.action.window_adjust) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  CHECK(lo < -0.9);
  CHECK(hi > 0.9);
  CHECK(agent.replay().size() == 0);
  CHECK(agent.learner().steps() == 0);
}

TEST_CASE("agent checkpoint round trip", "[agent]") {
  DqlAgent a(small_config(1)), b(small_config(2));
  std::stringstream ss;
  a.save(ss);
  const std::string bytes = ss.str();
  b.load(ss);
  std::stringstream again;
  b.save(again);
  CHECK(again.str() == bytes);
  const ConnectionState s{obs(100), obs(200)};
  CHECK(a.act(a.encode(s), false).window_adjust == b.act(b.encode(s), false).window_adjust);

  DqlAgent wide(AgentConfig{});
  std::stringstream in(bytes);
  CHECK_THROWS_AS(wide.load(in), ShapeError);
  std::stringstream junk("mplab-checkpoint 1\nend\n");
  CHECK_THROWS_AS(b.load(junk), IoError);
}

TEST_CASE("frozen copies act like the source but never learn", "[agent]") {
  auto cfg = small_config();
  cfg.explore = false;
  DqlAgent source(cfg);
  auto copy = DqlAgent::frozen_copy(source, 99);
  const ConnectionState s{obs(100), obs(200)};
  CHECK(copy.act(copy.encode(s), false).window_adjust == source.act(source.encode(s), false).window_adjust);
  Rng rng(15);
  for (int i = 0; i < 40; ++i) copy.control_slot(random_state(rng, 2), {10, 10});
  CHECK(copy.learner().steps() == 0);
}

TEST_CASE("agent gradients match finite differences", "[agent][gradcheck]") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& r : agent_gradcheck(seed, {12, 16}, 3)) {
      INFO(r.network << " seed " << seed << " worst " << r.worst_parameter);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("unquantized window lets small windows grow", "[agent]") {
  auto cfg = small_config();
  cfg.mode = AgentMode::uniform_random;
  DqlAgent agent(cfg);
  Rng rng(3);
  nn::Vector w{2.0, 2.0};
  for (int i = 0; i < 200; ++i) {
    const auto out = agent.control_slot(random_state(rng, 2), w);
    for (std::size_t n = 0; n < 2; ++n) {
      CHECK(out.window[n] == Approx(std::clamp(w[n] * (1 + 0.25 * out.action.window_adjust[n]), 2.0, 2048.0)));
      CHECK(out.cwnd[n] == std::max(2.0, std::floor(out.window[n])));
    }
    w = out.window;
  }
  // A steady +1 from 2: the floored window alone would stay at 2 forever.
  double x = 2.0;
  for (int i = 0; i < 4; ++i) x = std::clamp(x * 1.25, 2.0, 2048.0);
  CHECK(std::floor(x) == 4.0);
  CHECK(map_window(2.0, 1.0, 0.25, 2.0, 2048.0) == 2.0);
}

TEST_CASE("random start and actor delay", "[agent]") {
  auto cfg = small_config(4);
  cfg.train.batch = 2;
  cfg.train.actor_delay = 3;
  cfg.random_start = 5;
  cfg.delete_after_sample = false;
  DqlAgent agent(cfg);
  const auto actor0 = nn::snapshot(agent.learner().online().actor_params());
  const auto critic0 = nn::snapshot(agent.learner().online().critic_params());
  Rng rng(8);
  auto twin_cfg = cfg;
  twin_cfg.mode = AgentMode::uniform_random;
  DqlAgent twin(twin_cfg);
  for (int i = 0; i < 5; ++i) {
    const auto s = random_state(rng, 2);
    // Warm-up actions come from the same stream as the random agent.
    CHECK(agent.control_slot(s, {10, 10}).action.window_adjust ==
          twin.control_slot(s, {10, 10}).action.window_adjust);
  }
  CHECK(agent.learning_slots() == 5);
  CHECK(agent.learner().steps() == 3);
  CHECK(nn::snapshot(agent.learner().online().actor_params()) == actor0);
  CHECK(nn::snapshot(agent.learner().online().critic_params()) != critic0);
  agent.control_slot(random_state(rng, 2), {10, 10});
  CHECK(nn::snapshot(agent.learner().online().actor_params()) != actor0);

  std::stringstream ss;
  agent.save(ss);
  DqlAgent restored(cfg);
  restored.load(ss);
  CHECK(restored.learner().steps() == agent.learner().steps());
  CHECK(restored.learning_slots() == agent.learning_slots());
}
