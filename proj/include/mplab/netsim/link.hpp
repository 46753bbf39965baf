#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "mplab/errors.hpp"
#include "mplab/netsim/event_queue.hpp"
#include "mplab/rng.hpp"

namespace mplab::netsim {

inline constexpr double kPacketBytes = 1500.0;

inline double mbps_to_pps(double mbps) { return mbps * 1e6 / (8.0 * kPacketBytes); }
inline double pps_to_mbps(double pps) { return pps * 8.0 * kPacketBytes / 1e6; }

enum class LinkField { bandwidth, prop_delay, loss_prob, queue_capacity };

inline const char* to_string(LinkField f) {
  switch (f) {
    case LinkField::bandwidth: return "bandwidth";
    case LinkField::prop_delay: return "prop_delay";
    case LinkField::loss_prob: return "loss_prob";
    case LinkField::queue_capacity: return "queue_capacity";
  }
  return "?";
}

struct LinkChange {
  Time at = 0.0;
  LinkField field = LinkField::bandwidth;
  double value = 0.0;
};

struct LinkModel {
  double bandwidth = 1000.0;  ///< packets/s
  double prop_delay = 0.01;   ///< seconds, one way
  double loss_prob = 0.0;
  std::size_t queue_capacity = 10;
  std::vector<LinkChange> changes;

  void validate() const {
    require(bandwidth > 0.0 && std::isfinite(bandwidth), "link bandwidth must be positive");
    require(prop_delay >= 0.0 && std::isfinite(prop_delay), "propagation delay must be >= 0");
    require(loss_prob >= 0.0 && loss_prob <= 1.0, "loss probability must lie in [0,1]");
    require(queue_capacity >= 1, "queue capacity must be at least 1");
  }

  void apply(const LinkChange& c) {
    switch (c.field) {
      case LinkField::bandwidth: bandwidth = c.value; break;
      case LinkField::prop_delay: prop_delay = c.value; break;
      case LinkField::loss_prob: loss_prob = c.value; break;
      case LinkField::queue_capacity: queue_capacity = static_cast<std::size_t>(c.value); break;
    }
    validate();
  }

  /// Parameters in force at time t after applying every scheduled change with at <= t.
  LinkModel at(Time t) const {
    LinkModel m = *this;
    for (const auto& c : changes)
      if (c.at <= t) m.apply(c);
    m.changes.clear();
    return m;
  }
};

/// Queue capacity default: bandwidth-delay product of the round trip, at least 10 packets.
inline std::size_t default_queue_capacity(double bandwidth_pps, double prop_delay) {
  return std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(bandwidth_pps * 2.0 * prop_delay)));
}

enum class SendOutcome { scheduled, dropped, lost };

struct SendResult {
  SendOutcome outcome = SendOutcome::scheduled;
  Time arrival = 0.0;
};

/// One direction of a path: FIFO transmitter, drop-tail queue, Bernoulli loss.
/// A packet is queued while its transmission start lies in the future.
class Link {
 public:
  Link(LinkModel model, Rng loss_rng) : model_(std::move(model)), rng_(std::move(loss_rng)) {
    model_.validate();
  }

  const LinkModel& model() const { return model_; }
  LinkModel& model() { return model_; }

  std::size_t queued(Time now) {
    while (!starts_.empty() && starts_.front() <= now) starts_.pop_front();
    return starts_.size();
  }

  SendResult send(Time now) {
    if (queued(now) >= model_.queue_capacity) return {SendOutcome::dropped, now};
    if (model_.loss_prob > 0.0 && uniform01(rng_) < model_.loss_prob)
      return {SendOutcome::lost, now};
    const Time start = std::max(now, busy_until_);
    const Time tx = 1.0 / model_.bandwidth;
    busy_until_ = start + tx;
    if (start > now) starts_.push_back(start);
    return {SendOutcome::scheduled, busy_until_ + model_.prop_delay};
  }

 private:
  LinkModel model_;
  Rng rng_;
  Time busy_until_ = 0.0;
  std::deque<Time> starts_;
};

}  // namespace mplab::netsim
