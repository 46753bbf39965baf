#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab::netsim {

using Time = double;

/// Time-ordered callbacks. Equal timestamps fire in insertion order.
class EventQueue {
 public:
  using Action = std::function<void()>;

  Time now() const { return now_; }
  std::size_t pending() const { return heap_.size(); }
  std::uint64_t fired() const { return fired_; }

  void schedule(Time at, Action action) {
    if (at < now_) throw PreconditionError("event scheduled in the past");
    heap_.push({at, next_id_++, std::move(action)});
  }

  void schedule_in(Time delay, Action action) { schedule(now_ + delay, std::move(action)); }

  /// Fires every event with time <= until, then sets the clock to `until`.
  std::size_t advance(Time until) {
    if (until < now_) throw PreconditionError("cannot advance backwards in time");
    std::size_t count = 0;
    while (!heap_.empty() && heap_.top().at <= until) {
      // Move out before popping: the action may schedule more events.
      Entry e = std::move(const_cast<Entry&>(heap_.top()));
      heap_.pop();
      now_ = e.at;
      e.action();
      ++count;
      ++fired_;
    }
    now_ = until;
    return count;
  }

 private:
  struct Entry {
    Time at;
    std::uint64_t id;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.id > b.id;
    }
  };

  Time now_ = 0.0;
  std::uint64_t next_id_ = 0;
  std::uint64_t fired_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
};

}  // namespace mplab::netsim
