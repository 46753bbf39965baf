#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace mplab::transport {

struct Delivery {
  std::vector<std::uint64_t> seqs;  ///< in delivery order
  std::vector<double> delays;       ///< time each delivered packet spent held
};

/// Receiver-side in-order delivery. Out-of-order packets wait for the gap to fill.
class ReorderBuffer {
 public:
  explicit ReorderBuffer(std::uint64_t first_seq = 0) : expected_(first_seq) {}

  std::uint64_t expected() const { return expected_; }
  std::size_t held() const { return held_.size(); }
  std::uint64_t duplicates() const { return duplicates_; }
  std::uint64_t delivered() const { return delivered_; }

  Delivery on_receive(std::uint64_t seq, double now) {
    Delivery out;
    if (seq < expected_ || held_.count(seq)) {
      ++duplicates_;
      return out;
    }
    if (seq != expected_) {
      held_.emplace(seq, now);
      return out;
    }
    out.seqs.push_back(seq);
    out.delays.push_back(0.0);
    ++expected_;
    for (auto it = held_.begin(); it != held_.end() && it->first == expected_;
         it = held_.erase(it)) {
      out.seqs.push_back(it->first);
      out.delays.push_back(now - it->second);
      ++expected_;
    }
    delivered_ += out.seqs.size();
    return out;
  }

 private:
  std::uint64_t expected_;
  std::map<std::uint64_t, double> held_;
  std::uint64_t duplicates_ = 0;
  std::uint64_t delivered_ = 0;
};

}  // namespace mplab::transport
