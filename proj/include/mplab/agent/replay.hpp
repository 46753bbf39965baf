#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mplab/agent/observation.hpp"
#include "mplab/errors.hpp"
#include "mplab/rng.hpp"
#include "mplab/tensor/matrix.hpp"

namespace mplab::agent {

struct AgentAction {
  nn::Vector window_adjust;   ///< per subflow, in [-1, 1]
  nn::Vector schedule_logit;  ///< per subflow

  std::size_t size() const { return window_adjust.size(); }
};

struct Transition {
  ConnectionState state;
  AgentAction action;
  double reward = 0.0;
  ConnectionState next_state;
  bool terminal = false;
};

/// Binary sum tree over leaf priorities.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves) {
    require(leaves > 0, "sum tree needs at least one leaf");
    base_ = 1;
    while (base_ < leaves) base_ <<= 1;
    nodes_.assign(2 * base_, 0.0);
    leaves_ = leaves;
  }

  std::size_t leaves() const { return leaves_; }
  double total() const { return nodes_[1]; }
  double get(std::size_t i) const { return nodes_[base_ + i]; }

  void set(std::size_t i, double value) {
    require(i < leaves_, "sum tree index out of range");
    std::size_t k = base_ + i;
    nodes_[k] = value;
    for (k >>= 1; k >= 1; k >>= 1) nodes_[k] = nodes_[2 * k] + nodes_[2 * k + 1];
  }

  /// Leaf whose cumulative interval contains `mass`, skipping zero-priority leaves.
  std::size_t find(double mass) const {
    std::size_t k = 1;
    while (k < base_) {
      const double left = nodes_[2 * k];
      if (mass < left || nodes_[2 * k + 1] <= 0.0) {
        k = 2 * k;
      } else {
        mass -= left;
        k = 2 * k + 1;
      }
    }
    return k - base_;
  }

 private:
  std::size_t base_ = 1;
  std::size_t leaves_ = 0;
  std::vector<double> nodes_;
};

struct Sample {
  std::vector<std::size_t> indices;
  std::vector<Transition> items;
  std::vector<double> probabilities;
};

/// Proportional prioritized replay. Sampling probability is p_i^alpha / sum_j p_j^alpha.
/// New items enter at the largest priority seen so far; the oldest item is
/// evicted when full.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double exponent, Rng rng)
      : capacity_(capacity), exponent_(exponent), tree_(capacity), slots_(capacity),
        rng_(std::move(rng)) {
    require(capacity > 0, "replay capacity must be positive");
    require(exponent >= 0.0, "priority exponent must be non-negative");
  }

  std::size_t size() const { return age_.size(); }
  std::size_t capacity() const { return capacity_; }
  double exponent() const { return exponent_; }
  double max_priority() const { return max_priority_; }

  std::size_t store(Transition t) {
    std::size_t slot;
    if (size() == capacity_) {
      auto oldest = age_.begin();
      slot = oldest->second;
      age_.erase(oldest);
    } else if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
    } else {
      slot = next_fresh_++;
    }
    slots_[slot] = Entry{std::move(t), max_priority_, clock_};
    age_.emplace(clock_++, slot);
    tree_.set(slot, scaled(max_priority_));
    return slot;
  }

  /// k independent draws with probability proportional to priority^exponent.
  Sample sample(std::size_t k) {
    if (size() < k || size() == 0)
      throw UnderflowError("replay holds " + std::to_string(size()) + " items, asked for " +
                           std::to_string(k));
    Sample out;
    const double total = tree_.total();
    for (std::size_t d = 0; d < k; ++d) {
      const std::size_t i = tree_.find(uniform01(rng_) * total);
      out.indices.push_back(i);
      out.items.push_back(slots_[i]->t);
      out.probabilities.push_back(tree_.get(i) / total);
    }
    return out;
  }

  void update_priority(std::size_t index, double priority) {
    require(priority > 0.0 && std::isfinite(priority), "priority must be positive and finite");
    auto& e = slots_.at(index);
    require(e.has_value(), "no transition stored at that index");
    e->priority = priority;
    max_priority_ = std::max(max_priority_, priority);
    tree_.set(index, scaled(priority));
  }

  /// Drops the given items (duplicates allowed) after a training step consumed them.
  void erase(const std::vector<std::size_t>& indices) {
    for (std::size_t i : indices) {
      auto& e = slots_.at(i);
      if (!e) continue;
      age_.erase(e->inserted);
      e.reset();
      tree_.set(i, 0.0);
      free_.push_back(i);
    }
  }

  /// Current sampling probability of every slot (zero for empty slots).
  std::vector<double> probabilities() const {
    std::vector<double> p(capacity_, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < capacity_; ++i) total += tree_.get(i);
    if (total > 0.0)
      for (std::size_t i = 0; i < capacity_; ++i) p[i] = tree_.get(i) / total;
    return p;
  }

  const Transition& at(std::size_t index) const {
    const auto& e = slots_.at(index);
    require(e.has_value(), "no transition stored at that index");
    return e->t;
  }

 private:
  struct Entry {
    Transition t;
    double priority;
    std::uint64_t inserted;
  };

  double scaled(double priority) const { return std::pow(priority, exponent_); }

  std::size_t capacity_;
  double exponent_;
  SumTree tree_;
  std::vector<std::optional<Entry>> slots_;
  std::map<std::uint64_t, std::size_t> age_;  ///< insertion clock -> slot
  std::vector<std::size_t> free_;
  std::size_t next_fresh_ = 0;
  std::uint64_t clock_ = 0;
  double max_priority_ = 1.0;
  Rng rng_;
};

}  // namespace mplab::agent
