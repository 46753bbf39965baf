#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mplab/transport/connection.hpp"
#include "mplab/transport/fairness.hpp"
#include "oracles.hpp"

using namespace mplab;
using namespace mplab::transport;
using netsim::LinkModel;
using Catch::Approx;
using namespace mplab::oracles;

namespace {

PathWindow pw(double w, double rtt) { return {w, rtt, 0.0, 0.0}; }

}  // namespace

TEST_CASE("controller increase examples", "[transport]") {
  const std::vector<PathWindow> one{pw(10, 0.1)};
  CHECK(10.0 + window_increase(ControllerKind::reno, one, 0) == Approx(10.1));
  const std::vector<PathWindow> sym{pw(10, 1.0), pw(10, 1.0)};
  CHECK(lia_increase(sym, 0) == Approx(0.025).margin(1e-15));
  CHECK(window_increase(ControllerKind::dql, sym, 0) == 0.0);
  CHECK(balia_alpha(sym, 1) == 1.0);
}

TEST_CASE("coupled controllers reduce to Reno on one path", "[transport]") {
  for (double w : {2.0, 7.5, 40.0})
    for (double rtt : {0.02, 0.3}) {
      const std::vector<PathWindow> one{{w, rtt, 17.0, 30.0}};
      CHECK(lia_increase(one, 0) == Approx(1.0 / w).epsilon(1e-12));
      CHECK(olia_increase(one, 0) == Approx(1.0 / w).epsilon(1e-12));
      CHECK(balia_increase(one, 0) == Approx(1.0 / w).epsilon(1e-12));
      for (auto k : {ControllerKind::lia, ControllerKind::olia, ControllerKind::balia})
        CHECK(window_after_loss(k, one, 0, 2.0) == std::max(w / 2.0, 2.0));
    }
}

TEST_CASE("coupled increase is no more aggressive than Reno on the best path", "[transport]") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PathWindow> ps;
    for (int i = 0; i < 3; ++i)
      ps.push_back({uniform(rng, 2.0, 50.0), uniform(rng, 0.01, 0.3), uniform(rng, 0, 100),
                    uniform(rng, 0, 100)});
    for (std::size_t r = 0; r < ps.size(); ++r) {
      CHECK(lia_increase(ps, r) <= 1.0 / ps[r].cwnd + 1e-15);
      CHECK(balia_increase(ps, r) > 0.0);
    }
  }
}

TEST_CASE("OLIA moves window toward the better path", "[transport]") {
  // Path 1 has the larger window, path 0 the better loss history.
  const std::vector<PathWindow> ps{{10, 0.1, 500, 500}, {20, 0.1, 10, 10}};
  const double base0 = (10 / 0.01) / std::pow(100.0 + 200.0, 2);
  const double base1 = (20 / 0.01) / std::pow(100.0 + 200.0, 2);
  CHECK(olia_increase(ps, 0) == Approx(base0 + 0.5 / 10));
  CHECK(olia_increase(ps, 1) == Approx(base1 - 0.5 / 20));
}

TEST_CASE("loss reactions", "[transport]") {
  const std::vector<PathWindow> one{pw(10, 0.1)};
  CHECK(window_after_loss(ControllerKind::reno, one, 0, 2.0) == 5.0);
  const std::vector<PathWindow> sym{pw(10, 0.1), pw(10, 0.1)};
  CHECK(window_after_loss(ControllerKind::balia, sym, 0, 2.0) == 5.0);
  const std::vector<PathWindow> floor{pw(2, 0.1)};
  for (auto k : {ControllerKind::reno, ControllerKind::lia, ControllerKind::olia, ControllerKind::balia})
    CHECK(window_after_loss(k, floor, 0, 2.0) == 2.0);
  CHECK(window_after_loss(ControllerKind::dql, one, 0, 2.0) == 10.0);
  // BALIA caps its decrease multiplier at 1.5 on a much slower path.
  const std::vector<PathWindow> skew{pw(10, 1.0), pw(40, 0.1)};
  CHECK(window_after_loss(ControllerKind::balia, skew, 0, 2.0) == 10.0 - 5.0 * 1.5);
}

TEST_CASE("controller and scheduler names round trip", "[transport]") {
  for (auto k : {ControllerKind::dql, ControllerKind::lia, ControllerKind::olia,
                 ControllerKind::balia, ControllerKind::reno})
    CHECK(parse_controller(to_string(k)) == k);
  for (auto k : {SchedulerKind::proportional, SchedulerKind::minrtt, SchedulerKind::agent})
    CHECK(parse_scheduler(to_string(k)) == k);
  CHECK_THROWS_AS(parse_controller("cubic"), ConfigError);
  CHECK_THROWS_AS(parse_scheduler("roundrobin"), ConfigError);
}

TEST_CASE("batch scheduler examples", "[transport]") {
  CHECK(schedule_batch({2, 1}, {10, 10}, 9) == Allocation{6, 3});
  CHECK(schedule_batch({1, 1}, {10, 10}, 5) == Allocation{3, 2});
  CHECK(schedule_batch({9, 1}, {2, 10}, 8) == Allocation{2, 6});
  CHECK(schedule_batch({1, 1}, {10, 10}, 0) == Allocation{0, 0});
  CHECK(proportional_split({0, 0, 0}, 4) == Allocation{2, 1, 1});
  CHECK_THROWS_AS(proportional_split({1, -1}, 3), PreconditionError);
}

TEST_CASE("uncapped split stays within one packet of exact shares", "[transport]") {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 6);
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& v : w) total += v = uniform(rng, 0.0, 100.0);
    const std::uint64_t budget = uniform_index(rng, 1001);
    const auto a = proportional_split(w, budget);
    CHECK(std::accumulate(a.begin(), a.end(), std::uint64_t{0}) == budget);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(static_cast<double>(a[i]) - budget * w[i] / total) < 1.0);
  }
}

TEST_CASE("capped allocation matches the brute-force oracle", "[transport]") {
  Rng rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 4);
    std::vector<double> w(n);
    Allocation open(n);
    std::uint64_t room = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = static_cast<double>(uniform_index(rng, 5));  // small integers force ties
      room += open[i] = uniform_index(rng, 9);
    }
    const std::uint64_t budget = uniform_index(rng, room + 1);
    INFO("trial " << trial);
    CHECK(schedule_batch(w, open, budget) == brute_force_allocation(w, open, budget));
  }
}

TEST_CASE("min-RTT scheduler", "[transport]") {
  CHECK(schedule_min_rtt({0.010, 0.050}, {3, 5}, 6) == Allocation{3, 3});
  CHECK(schedule_min_rtt({0.010, 0.050}, {3, 5}, 2) == Allocation{2, 0});
  CHECK(schedule_min_rtt({0.050, 0.010}, {3, 5}, 6) == Allocation{1, 5});
  CHECK(schedule_min_rtt({0.02, 0.02}, {3, 5}, 4) == Allocation{3, 1});
}

TEST_CASE("reorder buffer examples", "[transport]") {
  ReorderBuffer a(1);
  auto d1 = a.on_receive(1, 1.0);
  auto d2 = a.on_receive(2, 2.0);
  CHECK(d1.seqs == std::vector<std::uint64_t>{1});
  CHECK(d2.seqs == std::vector<std::uint64_t>{2});
  CHECK(d1.delays == std::vector<double>{0.0});
  CHECK(d2.delays == std::vector<double>{0.0});

  ReorderBuffer b(1);
  CHECK(b.on_receive(2, 1.0).seqs.empty());
  const auto d = b.on_receive(1, 3.0);
  CHECK(d.seqs == std::vector<std::uint64_t>{1, 2});
  CHECK(d.delays == std::vector<double>{0.0, 2.0});

  b.on_receive(2, 4.0);
  b.on_receive(5, 4.0);
  b.on_receive(5, 4.5);
  CHECK(b.duplicates() == 2);
  CHECK(b.held() == 1);
}

TEST_CASE("reorder buffer on random permutations matches a replay oracle", "[transport]") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 100;
    std::vector<std::uint64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    ReorderBuffer buf;
    std::vector<std::uint64_t> order;
    std::vector<double> delay(n, -1.0);
    for (std::size_t t = 0; t < n; ++t) {
      const auto d = buf.on_receive(perm[t], static_cast<double>(t));
      for (std::size_t k = 0; k < d.seqs.size(); ++k) {
        order.push_back(d.seqs[k]);
        delay[d.seqs[k]] = d.delays[k];
      }
    }
    std::vector<std::uint64_t> sorted(n);
    std::iota(sorted.begin(), sorted.end(), 0);
    REQUIRE(order == sorted);
    REQUIRE(delay == replay_delays(perm));
    REQUIRE(buf.held() == 0);
  }
}

TEST_CASE("proportional fairness check", "[transport]") {
  const std::vector<double> one{1, 1};
  CHECK(proportional_fairness_check(one, one));
  CHECK(proportional_fairness_check(one, std::vector<double>{2, 0}));
  CHECK_FALSE(proportional_fairness_check(one, std::vector<double>{2, 1}));
  CHECK_THROWS_AS(proportional_fairness_check(std::vector<double>{1, 0}, one), PreconditionError);
  CHECK_THROWS_AS(proportional_fairness_check(one, std::vector<double>{1}), ShapeError);
}

TEST_CASE("connection delivers everything in order over lossy paths", "[transport]") {
  netsim::Simulator sim({path(400, 0.02, 0.03), path(200, 0.05, 0.01)}, 3);
  ConnectionConfig cfg;
  cfg.paths = {0, 1};
  cfg.file_packets = 3000;
  Connection c(sim, cfg);
  c.start();
  bool conserved = true;
  for (int k = 1; k <= 600 && !c.finished(); ++k) {
    sim.advance(k * 0.1);
    conserved = conserved && sim.conserved();
  }
  REQUIRE(c.finished());
  CHECK(conserved);
  CHECK(c.delivered() == 3000);
  CHECK(c.receiver().expected() == 3000);
  CHECK(*c.completion_time() > 0.0);
  for (const auto& s : c.subflows()) {
    CHECK(s.cwnd >= cfg.cwnd_min);
    CHECK(s.loss_events > 0);
    CHECK(s.goodput >= 0.0);
  }
}

TEST_CASE("acknowledging a packet that was never sent is a protocol error", "[transport]") {
  netsim::Simulator sim({path(100, 0.01)}, 1);
  ConnectionConfig cfg;
  cfg.paths = {0};
  Connection c(sim, cfg);
  CHECK_THROWS_AS(c.on_ack(0, 99, 0.0, 0), ProtocolError);
}

TEST_CASE("DQL windows ignore acknowledgements and losses", "[transport]") {
  netsim::Simulator sim({path(200, 0.02, 0.02)}, 5);
  ConnectionConfig cfg;
  cfg.paths = {0};
  cfg.controller = ControllerKind::dql;
  cfg.cwnd_init = 13.0;
  Connection c(sim, cfg);
  int slots = 0;
  c.set_slot_hook([&](Connection& conn, double len) {
    ++slots;
    const auto obs = conn.observe_slot(len);
    CHECK(obs.size() == 1);
    CHECK(obs[0].window_change == 0.0);
  });
  c.start();
  sim.advance(5.0);
  CHECK(c.subflows()[0].cwnd == 13.0);
  CHECK(c.subflows()[0].loss_events > 0);
  CHECK(slots > 10);
}

TEST_CASE("slot observations report rates and RTT gaps", "[transport]") {
  netsim::Simulator sim({path(500, 0.01), path(500, 0.04)}, 8);
  ConnectionConfig cfg;
  cfg.paths = {0, 1};
  cfg.controller = ControllerKind::dql;
  cfg.scheduler = SchedulerKind::agent;
  Connection c(sim, cfg);
  ConnectionState last;
  c.set_slot_hook([&](Connection& conn, double len) {
    conn.set_agent_weights({3.0, 1.0});
    conn.set_cwnd(0, conn.subflows()[0].cwnd + 1.0);
    last = conn.observe_slot(len);
  });
  c.start();
  sim.advance(3.0);
  REQUIRE(last.size() == 2);
  for (const auto& o : last) CHECK_NOTHROW(o.validate());
  CHECK(last[0].rtt_diff == 0.0);
  CHECK(last[1].rtt_diff == Approx(last[1].rtt - last[0].rtt));
  CHECK(last[1].rtt_diff > 0.0);
  CHECK(last[0].throughput > 0.0);
  CHECK(last[0].schedule_weight > last[1].schedule_weight);
  const auto w = c.scheduler_weights();
  CHECK(w[0] + w[1] == Approx(1.0));
}

TEST_CASE("Reno sawtooth averages three quarters of its peak", "[transport]") {
  const auto t = run({path(1000, 0.02, 0.0, 20)}, ControllerKind::reno, 120.0, 1);
  // Skip the first 20 s, then compare mean window with mean per-cycle peak.
  std::vector<double> w(t.cwnd.begin() + 200, t.cwnd.end());
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < w.size(); ++i)
    if (w[i] > w[i - 1] && w[i] > w[i + 1]) peaks.push_back(w[i]);
  REQUIRE(peaks.size() >= 3);
  const double peak = std::accumulate(peaks.begin(), peaks.end(), 0.0) / peaks.size();
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
  INFO("peak " << peak << " mean " << mean);
  CHECK(mean / peak == Approx(0.75).epsilon(0.10));
  CHECK(t.conserved);
}

TEST_CASE("Reno throughput follows the inverse square root of loss", "[transport]") {
  const auto low = run({path(10000, 0.05, 0.005)}, ControllerKind::reno, 200.0, 2);
  const auto high = run({path(10000, 0.05, 0.02)}, ControllerKind::reno, 200.0, 2);
  const double ratio = static_cast<double>(low.delivered) / static_cast<double>(high.delivered);
  INFO("ratio " << ratio);
  CHECK(ratio > 2.0 / 1.5);
  CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("single-path coupled controllers track Reno", "[transport]") {
  for (double loss : {0.0, 0.01}) {
    const auto reno = run({path(1000, 0.03, loss)}, ControllerKind::reno, 60.0, 4);
    for (auto k : {ControllerKind::lia, ControllerKind::olia, ControllerKind::balia}) {
      const auto t = run({path(1000, 0.03, loss)}, k, 60.0, 4);
      INFO(to_string(k) << " loss " << loss);
      CHECK(rms_relative(t.cwnd, reno.cwnd) < 0.05);
    }
  }
}

TEST_CASE("symmetric paths split traffic evenly", "[transport]") {
  for (auto k : {ControllerKind::lia, ControllerKind::olia, ControllerKind::balia}) {
    const auto t = run({path(800, 0.02), path(800, 0.02)}, k, 60.0, 6);
    const double share = static_cast<double>(t.acked_per_subflow[0]) /
                         static_cast<double>(t.acked_per_subflow[0] + t.acked_per_subflow[1]);
    INFO(to_string(k) << " share " << share);
    CHECK(std::abs(share - 0.5) <= 0.05);
    CHECK(t.conserved);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto l = run({path(800, 0.02, 0.01), path(800, 0.02, 0.01)}, k, 600.0, seed);
      const double ls = static_cast<double>(l.acked_per_subflow[0]) /
                        static_cast<double>(l.acked_per_subflow[0] + l.acked_per_subflow[1]);
      INFO("lossy seed " << seed << " share " << ls);
      CHECK(std::abs(ls - 0.5) <= 0.05);
    }
  }
}

TEST_CASE("min-RTT connection prefers the short path", "[transport]") {
  const auto t = run({path(400, 0.01), path(400, 0.08)}, ControllerKind::lia, 20.0, 7,
                     SchedulerKind::minrtt);
  CHECK(t.acked_per_subflow[0] > t.acked_per_subflow[1]);
}

TEST_CASE("connections are deterministic for a seed", "[transport]") {
  const auto a = run({path(300, 0.02, 0.02), path(300, 0.04, 0.01)}, ControllerKind::olia, 20.0, 11);
  const auto b = run({path(300, 0.02, 0.02), path(300, 0.04, 0.01)}, ControllerKind::olia, 20.0, 11);
  const auto c = run({path(300, 0.02, 0.02), path(300, 0.04, 0.01)}, ControllerKind::olia, 20.0, 12);
  CHECK(a.cwnd == b.cwnd);
  CHECK(a.delivered == b.delivered);
  CHECK(a.cwnd != c.cwnd);
}
