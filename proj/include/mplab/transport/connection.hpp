#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "mplab/agent/observation.hpp"
#include "mplab/netsim/simulator.hpp"
#include "mplab/tensor/matrix.hpp"
#include "mplab/transport/controllers.hpp"
#include "mplab/transport/reorder.hpp"
#include "mplab/transport/scheduler.hpp"

namespace mplab::transport {

using netsim::Packet;
using netsim::Simulator;
using netsim::Time;

inline constexpr double kInitialRtt = 0.1;  ///< assumed before the first sample, and the first slot length
inline constexpr double kRttGain = 0.125;

struct ConnectionConfig {
  std::uint32_t flow_id = 0;
  std::vector<std::size_t> paths;  ///< one subflow per entry
  ControllerKind controller = ControllerKind::lia;
  SchedulerKind scheduler = SchedulerKind::proportional;
  std::optional<std::uint64_t> file_packets;  ///< unset: unlimited backlog
  double cwnd_init = 10.0;
  double cwnd_min = 2.0;
  double cwnd_max = 2048.0;
  Time start = 0.0;
};

struct Subflow {
  struct Outstanding {
    std::uint64_t seq;
    Time sent;
  };

  std::size_t id = 0;
  std::size_t path = 0;
  double cwnd = 10.0;
  double srtt = 0.0;
  bool has_rtt = false;
  std::uint64_t in_flight = 0;
  std::uint64_t next_subflow_seq = 0;
  std::map<std::uint64_t, Outstanding> unacked;
  std::set<std::uint64_t> declared_lost;
  std::uint64_t recovery_point = 0;  ///< losses below this belong to the last reduction

  std::deque<Time> ack_times;
  Time first_ack = -1.0;
  double goodput = 0.0;  ///< theta: packets/s over the last smoothed RTT

  double acked_since_loss = 0.0;
  double acked_between_losses = 0.0;
  std::uint64_t acked_total = 0;
  std::uint64_t loss_events = 0;
  std::uint64_t spurious = 0;

  // Slot accounting for the agent.
  std::uint64_t sent_in_slot = 0;
  std::uint64_t acked_in_slot = 0;
  double cwnd_at_slot_start = 10.0;
  double schedule_weight = 0.0;

  double rtt_or_default() const { return has_rtt ? srtt : kInitialRtt; }
  std::uint64_t open_window() const {
    const auto w = static_cast<std::uint64_t>(std::ceil(cwnd));
    return w > in_flight ? w - in_flight : 0;
  }
};

/// Sender and receiver halves of one (MP)TCP connection on a Simulator.
/// A single-path TCP flow is a connection with one subflow and Reno.
class Connection {
 public:
  using SlotHook = std::function<void(Connection&, double slot_length)>;

  Connection(Simulator& sim, ConnectionConfig cfg) : sim_(sim), cfg_(std::move(cfg)) {
    require(!cfg_.paths.empty(), "connection needs at least one subflow");
    require(cfg_.cwnd_min >= 1.0 && cfg_.cwnd_max >= cfg_.cwnd_min, "bad window bounds");
    for (std::size_t i = 0; i < cfg_.paths.size(); ++i) {
      require(cfg_.paths[i] < sim_.path_count(), "subflow path out of range");
      Subflow s;
      s.id = i;
      s.path = cfg_.paths[i];
      s.cwnd = std::clamp(cfg_.cwnd_init, cfg_.cwnd_min, cfg_.cwnd_max);
      s.cwnd_at_slot_start = s.cwnd;
      s.schedule_weight = 1.0 / static_cast<double>(cfg_.paths.size());
      subflows_.push_back(std::move(s));
    }
    agent_weights_.assign(subflows_.size(), 1.0 / static_cast<double>(subflows_.size()));
  }

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Schedules the first transmission and, when a hook is set, the slot timer.
  void start() {
    sim_.events().schedule(std::max(cfg_.start, sim_.now()), [this] {
      slot_started_ = sim_.now();
      if (slot_hook_) schedule_slot();
      try_send();
    });
  }

  void set_slot_hook(SlotHook hook) { slot_hook_ = std::move(hook); }

  const ConnectionConfig& config() const { return cfg_; }
  std::uint32_t flow_id() const { return cfg_.flow_id; }
  std::vector<Subflow>& subflows() { return subflows_; }
  const std::vector<Subflow>& subflows() const { return subflows_; }
  const ReorderBuffer& receiver() const { return receiver_; }

  std::uint64_t delivered() const { return receiver_.delivered(); }
  std::optional<Time> completion_time() const { return completed_at_; }
  bool finished() const { return completed_at_.has_value(); }

  /// Reordering delays recorded since the last call.
  std::vector<double> take_reorder_delays() { return std::exchange(reorder_delays_, {}); }

  std::vector<PathWindow> path_windows() const {
    std::vector<PathWindow> out;
    for (const auto& s : subflows_)
      out.push_back({s.cwnd, s.rtt_or_default(), s.acked_since_loss, s.acked_between_losses});
    return out;
  }

  /// Sets a subflow window directly (the agent's control); clamped to bounds.
  void set_cwnd(std::size_t i, double w) {
    subflows_.at(i).cwnd = std::clamp(w, cfg_.cwnd_min, cfg_.cwnd_max);
  }

  /// Agent scheduling preference; combined 50/50 with goodput weights.
  void set_agent_weights(std::vector<double> w) {
    nn::check_size(w.size(), subflows_.size(), "agent weights");
    agent_weights_ = std::move(w);
  }

  /// Observation of the slot that just ended; resets slot counters.
  ConnectionState observe_slot(double slot_length) {
    ConnectionState st;
    double min_rtt = std::numeric_limits<double>::infinity();
    for (const auto& s : subflows_) min_rtt = std::min(min_rtt, s.rtt_or_default());
    for (auto& s : subflows_) {
      SubflowObservation o;
      o.sending_rate = static_cast<double>(s.sent_in_slot) / slot_length;
      o.throughput = static_cast<double>(s.acked_in_slot) / slot_length;
      o.rtt = s.rtt_or_default();
      o.window_change = s.cwnd - s.cwnd_at_slot_start;
      o.schedule_weight = std::clamp(s.schedule_weight, 0.0, 1.0);
      o.rtt_diff = o.rtt - min_rtt;
      st.push_back(o);
      s.sent_in_slot = 0;
      s.acked_in_slot = 0;
      s.cwnd_at_slot_start = s.cwnd;
    }
    return st;
  }

  /// Current scheduler weights (normalized), as used for the next batch.
  std::vector<double> scheduler_weights() const {
    const std::size_t n = subflows_.size();
    std::vector<double> g(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = subflows_[i];
      g[i] = s.goodput > 0.0 ? s.goodput : s.cwnd / s.rtt_or_default();
      total += g[i];
    }
    for (auto& v : g) v = total > 0.0 ? v / total : 1.0 / static_cast<double>(n);
    if (cfg_.scheduler != SchedulerKind::agent) return g;
    double at = 0.0;
    for (double v : agent_weights_) at += v;
    for (std::size_t i = 0; i < n; ++i)
      g[i] = 0.5 * g[i] + 0.5 * (at > 0.0 ? agent_weights_[i] / at : 1.0 / static_cast<double>(n));
    return g;
  }

  void try_send() {
    if (finished()) return;
    const std::size_t n = subflows_.size();
    std::vector<std::uint64_t> open(n);
    std::uint64_t total_open = 0;
    for (std::size_t i = 0; i < n; ++i) total_open += open[i] = subflows_[i].open_window();
    std::uint64_t available = retransmit_.size();
    if (cfg_.file_packets)
      available += *cfg_.file_packets > next_seq_ ? *cfg_.file_packets - next_seq_ : 0;
    else
      available = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t budget = std::min(total_open, available);
    if (budget == 0) return;

    Allocation alloc;
    std::vector<std::size_t> order;
    if (cfg_.scheduler == SchedulerKind::minrtt) {
      std::vector<double> rtts(n);
      for (std::size_t i = 0; i < n; ++i) rtts[i] = subflows_[i].rtt_or_default();
      alloc = schedule_min_rtt(rtts, open, budget);
      order = weight_order([&] {
        std::vector<double> neg(n);
        for (std::size_t i = 0; i < n; ++i) neg[i] = -rtts[i];
        return neg;
      }());
      for (std::size_t i = 0; i < n; ++i)
        subflows_[i].schedule_weight = static_cast<double>(alloc[i]) / static_cast<double>(budget);
    } else {
      const auto w = scheduler_weights();
      alloc = schedule_batch(w, open, budget);
      order = weight_order(w);
      for (std::size_t i = 0; i < n; ++i) subflows_[i].schedule_weight = w[i];
    }
    for (std::size_t i : order)
      for (std::uint64_t k = 0; k < alloc[i]; ++k) transmit(i, take_next_seq());
  }

  // Receiver side: deliver in order, acknowledge on the reverse path.
  void on_arrival(const Packet& p) {
    auto d = receiver_.on_receive(p.seq, sim_.now());
    for (double delay : d.delays) reorder_delays_.push_back(delay);
    if (cfg_.file_packets && !completed_at_ && receiver_.delivered() >= *cfg_.file_packets)
      completed_at_ = sim_.now();
    const std::uint64_t data_ack = receiver_.expected();
    sim_.send_ack(subflows_[p.subflow].path, [this, sub = p.subflow, sseq = p.subflow_seq,
                                              sent = p.send_time, data_ack] {
      on_ack(sub, sseq, sent, data_ack);
    });
  }

  /// Sender side. An acknowledgement for a packet never sent is a protocol error.
  void on_ack(std::size_t i, std::uint64_t sseq, Time sent, std::uint64_t data_ack) {
    auto& s = subflows_[i];
    const Time now = sim_.now();
    // Everything below the cumulative data ack has reached the application.
    data_acked_ = std::max(data_acked_, data_ack);
    retransmit_.erase(retransmit_.begin(), retransmit_.lower_bound(data_acked_));
    auto it = s.unacked.find(sseq);
    if (it == s.unacked.end()) {
      if (s.declared_lost.erase(sseq)) {
        ++s.spurious;
        try_send();
        return;
      }
      throw ProtocolError("acknowledgement for a packet that was never in flight");
    }
    s.unacked.erase(it);
    --s.in_flight;
    ++s.acked_in_slot;
    ++s.acked_total;
    s.acked_since_loss += 1.0;

    const double sample = now - sent;
    if (!s.has_rtt) {
      s.srtt = sample;
      s.has_rtt = true;
    } else {
      s.srtt += kRttGain * (sample - s.srtt);
    }
    s.ack_times.push_back(now);
    if (s.first_ack < 0.0) s.first_ack = now;
    while (!s.ack_times.empty() && s.ack_times.front() <= now - s.srtt) s.ack_times.pop_front();
    s.goodput = now - s.first_ack >= s.srtt ? static_cast<double>(s.ack_times.size()) / s.srtt
                                            : s.cwnd / s.srtt;

    if (cfg_.controller != ControllerKind::dql) {
      const auto windows = path_windows();
      s.cwnd = std::clamp(s.cwnd + window_increase(cfg_.controller, windows, i), cfg_.cwnd_min,
                          cfg_.cwnd_max);
    }

    // Three later packets acknowledged on a FIFO path: the gap is a loss.
    std::vector<std::uint64_t> lost;
    for (auto u = s.unacked.begin(); u != s.unacked.end() && u->first + 3 <= sseq; ++u)
      lost.push_back(u->first);
    if (!lost.empty()) declare_lost(i, lost);
    try_send();
  }

 private:
  std::uint64_t take_next_seq() {
    if (!retransmit_.empty()) {
      const auto seq = *retransmit_.begin();
      retransmit_.erase(retransmit_.begin());
      return seq;
    }
    return next_seq_++;
  }

  void transmit(std::size_t i, std::uint64_t seq) {
    auto& s = subflows_[i];
    Packet pkt;
    pkt.flow = cfg_.flow_id;
    pkt.subflow = static_cast<std::uint32_t>(i);
    pkt.seq = seq;
    pkt.subflow_seq = s.next_subflow_seq++;
    pkt.send_time = sim_.now();
    s.unacked.emplace(pkt.subflow_seq, Subflow::Outstanding{seq, pkt.send_time});
    ++s.in_flight;
    if (static_cast<double>(s.in_flight) > std::ceil(s.cwnd))
      throw StateError("subflow exceeded its congestion window");
    ++s.sent_in_slot;
    sim_.send(s.path, pkt, [this](const Packet& p) { on_arrival(p); });
    arm_timer(i);
  }

  void declare_lost(std::size_t i, const std::vector<std::uint64_t>& sseqs) {
    auto& s = subflows_[i];
    bool new_event = false;
    for (auto sseq : sseqs) {
      auto it = s.unacked.find(sseq);
      if (it == s.unacked.end()) continue;
      if (it->second.seq >= data_acked_) retransmit_.insert(it->second.seq);
      s.unacked.erase(it);
      s.declared_lost.insert(sseq);
      --s.in_flight;
      if (sseq >= s.recovery_point) new_event = true;
    }
    if (!new_event) return;
    ++s.loss_events;
    s.recovery_point = s.next_subflow_seq;
    s.acked_between_losses = s.acked_since_loss;
    s.acked_since_loss = 0.0;
    const auto windows = path_windows();
    s.cwnd = std::clamp(window_after_loss(cfg_.controller, windows, i, cfg_.cwnd_min),
                        cfg_.cwnd_min, cfg_.cwnd_max);
  }

  Time rto(const Subflow& s) const { return s.has_rtt ? 2.0 * s.srtt : 1.0; }

  // One pending timer per subflow; on firing it re-checks the oldest packet.
  void arm_timer(std::size_t i) {
    if (timer_pending_.size() < subflows_.size()) timer_pending_.assign(subflows_.size(), false);
    if (timer_pending_[i]) return;
    const auto& s = subflows_[i];
    if (s.unacked.empty()) return;
    timer_pending_[i] = true;
    sim_.events().schedule(std::max(sim_.now(), s.unacked.begin()->second.sent + rto(s)),
                           [this, i] { on_timer(i); });
  }

  void on_timer(std::size_t i) {
    timer_pending_[i] = false;
    auto& s = subflows_[i];
    if (s.unacked.empty() || finished()) return;
    const Time now = sim_.now();
    const Time limit = rto(s);
    std::vector<std::uint64_t> expired;
    for (const auto& [sseq, o] : s.unacked)
      if (o.sent + limit <= now) expired.push_back(sseq);
    if (!expired.empty()) {
      declare_lost(i, expired);
      try_send();
    }
    arm_timer(i);
  }

  void schedule_slot() {
    double slot = 0.0;
    for (const auto& s : subflows_) slot = std::max(slot, s.rtt_or_default());
    sim_.events().schedule_in(slot, [this] {
      if (finished()) return;
      const double len = sim_.now() - slot_started_;
      slot_started_ = sim_.now();
      slot_hook_(*this, len);
      schedule_slot();
      try_send();
    });
  }

  Simulator& sim_;
  ConnectionConfig cfg_;
  std::vector<Subflow> subflows_;
  std::vector<double> agent_weights_;
  std::vector<bool> timer_pending_;
  std::set<std::uint64_t> retransmit_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t data_acked_ = 0;
  ReorderBuffer receiver_;
  std::vector<double> reorder_delays_;
  std::optional<Time> completed_at_;
  SlotHook slot_hook_;
  Time slot_started_ = 0.0;
};

}  // namespace mplab::transport
