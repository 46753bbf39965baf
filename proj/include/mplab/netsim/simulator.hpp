#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mplab/netsim/event_queue.hpp"
#include "mplab/netsim/link.hpp"

namespace mplab::netsim {

struct Packet {
  std::uint32_t flow = 0;
  std::uint32_t subflow = 0;
  std::uint64_t seq = 0;          ///< connection-level
  std::uint64_t subflow_seq = 0;  ///< per-subflow transmission counter
  double size = kPacketBytes;
  Time send_time = 0.0;
};

struct FlowCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;

  bool conserved() const { return sent == delivered + lost + dropped + in_flight; }
};

/// Paths with a data direction (Link) and a lossless reverse direction for
/// acknowledgements that costs the path's current propagation delay.
class Simulator {
 public:
  Simulator(const std::vector<LinkModel>& paths, std::uint64_t seed) {
    require(!paths.empty(), "simulator needs at least one path");
    for (std::size_t i = 0; i < paths.size(); ++i) {
      links_.emplace_back(paths[i], rng_fork(seed, "loss/path" + std::to_string(i)));
      links_.back().model().changes.clear();
      for (const auto& c : paths[i].changes)
        events_.schedule(c.at, [this, i, c] {
          links_[i].model().apply(c);
          trace("change", 0, static_cast<std::uint32_t>(i), static_cast<std::uint64_t>(c.field));
        });
    }
  }

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  EventQueue& events() { return events_; }
  Time now() const { return events_.now(); }
  std::size_t path_count() const { return links_.size(); }
  const LinkModel& path(std::size_t i) const { return links_.at(i).model(); }

  void set_trace(std::ostream* os) {
    trace_ = os;
    if (trace_) *trace_ << "time,event,flow,subflow,seq\n";
  }

  /// Hands a data packet to path `path_index`. `on_arrival` fires at the
  /// receiver side; a dropped or lost packet never calls it.
  SendOutcome send(std::size_t path_index, const Packet& pkt,
                   std::function<void(const Packet&)> on_arrival) {
    auto& c = counters_[pkt.flow];
    ++c.sent;
    ++total_.sent;
    trace("send", pkt.flow, pkt.subflow, pkt.seq);
    const auto res = links_.at(path_index).send(now());
    switch (res.outcome) {
      case SendOutcome::dropped:
        ++c.dropped;
        ++total_.dropped;
        trace("drop", pkt.flow, pkt.subflow, pkt.seq);
        break;
      case SendOutcome::lost:
        ++c.lost;
        ++total_.lost;
        trace("loss", pkt.flow, pkt.subflow, pkt.seq);
        break;
      case SendOutcome::scheduled:
        ++c.in_flight;
        ++total_.in_flight;
        events_.schedule(res.arrival, [this, pkt, cb = std::move(on_arrival)] {
          auto& fc = counters_[pkt.flow];
          --fc.in_flight;
          ++fc.delivered;
          --total_.in_flight;
          ++total_.delivered;
          trace("arrive", pkt.flow, pkt.subflow, pkt.seq);
          cb(pkt);
        });
        break;
    }
    return res.outcome;
  }

  /// Acknowledgement over the reverse direction of `path_index`.
  void send_ack(std::size_t path_index, std::function<void()> on_ack) {
    events_.schedule_in(links_.at(path_index).model().prop_delay, std::move(on_ack));
  }

  std::size_t advance(Time until) { return events_.advance(until); }

  const FlowCounters& counters(std::uint32_t flow) { return counters_[flow]; }
  const FlowCounters& totals() const { return total_; }

  /// Per-flow and global conservation of packets handed to the links.
  bool conserved() const {
    FlowCounters sum;
    for (const auto& [id, c] : counters_) {
      if (!c.conserved()) return false;
      sum.sent += c.sent;
      sum.delivered += c.delivered;
      sum.lost += c.lost;
      sum.dropped += c.dropped;
      sum.in_flight += c.in_flight;
    }
    return total_.conserved() && sum.sent == total_.sent && sum.delivered == total_.delivered &&
           sum.lost == total_.lost && sum.dropped == total_.dropped &&
           sum.in_flight == total_.in_flight;
  }

 private:
  void trace(const char* event, std::uint32_t flow, std::uint32_t subflow, std::uint64_t seq) {
    if (!trace_) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.9f,%s,%u,%u,%llu\n", now(), event, flow, subflow,
                  static_cast<unsigned long long>(seq));
    *trace_ << buf;
  }

  EventQueue events_;
  std::vector<Link> links_;
  std::map<std::uint32_t, FlowCounters> counters_;
  FlowCounters total_;
  std::ostream* trace_ = nullptr;
};

}  // namespace mplab::netsim
