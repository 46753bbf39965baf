#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab::transport {

enum class SchedulerKind { proportional, minrtt, agent };

inline const char* to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::proportional: return "proportional";
    case SchedulerKind::minrtt: return "minrtt";
    case SchedulerKind::agent: return "agent";
  }
  return "?";
}

inline SchedulerKind parse_scheduler(const std::string& s) {
  if (s == "proportional") return SchedulerKind::proportional;
  if (s == "minrtt") return SchedulerKind::minrtt;
  if (s == "agent") return SchedulerKind::agent;
  throw ConfigError("unknown scheduler '" + s + "'");
}

using Allocation = std::vector<std::uint64_t>;

/// Indices sorted by descending weight; ties keep the lower index first.
inline std::vector<std::size_t> weight_order(const std::vector<double>& weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  return order;
}

/// Largest-remainder split of `budget` in proportion to `weights` (no caps).
inline Allocation proportional_split(const std::vector<double>& weights, std::uint64_t budget) {
  const std::size_t n = weights.size();
  require(n > 0, "scheduler needs at least one subflow");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), "scheduler weights must be finite and non-negative");
    total += w;
  }
  Allocation out(n, 0);
  if (budget == 0) return out;
  std::vector<double> share(n);
  for (std::size_t i = 0; i < n; ++i)
    share[i] = total > 0.0 ? static_cast<double>(budget) * weights[i] / total
                           : static_cast<double>(budget) / static_cast<double>(n);
  std::uint64_t given = 0;
  std::vector<double> rem(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint64_t>(std::floor(share[i]));
    rem[i] = share[i] - static_cast<double>(out[i]);
    given += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; given < budget; k = (k + 1) % n, ++given) ++out[order[k]];
  return out;
}

/// Proportional split capped by each subflow's open window; the excess spills
/// to the remaining subflows in descending weight order.
inline Allocation schedule_batch(const std::vector<double>& weights,
                                 const std::vector<std::uint64_t>& open, std::uint64_t budget) {
  require(open.size() == weights.size(), "one open window per subflow");
  Allocation out = proportional_split(weights, budget);
  std::uint64_t spill = 0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] > open[i]) {
      spill += out[i] - open[i];
      out[i] = open[i];
    }
  for (std::size_t i : weight_order(weights)) {
    if (spill == 0) break;
    const std::uint64_t room = open[i] - out[i];
    const std::uint64_t take = std::min(room, spill);
    out[i] += take;
    spill -= take;
  }
  return out;
}

/// Fills the smallest-RTT subflow's open window first; equal RTTs go to the lower id.
inline Allocation schedule_min_rtt(const std::vector<double>& rtts,
                                   const std::vector<std::uint64_t>& open, std::uint64_t budget) {
  require(open.size() == rtts.size() && !rtts.empty(), "one open window per subflow");
  std::vector<std::size_t> order(rtts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rtts[a] < rtts[b]; });
  Allocation out(rtts.size(), 0);
  for (std::size_t i : order) {
    const std::uint64_t take = std::min(open[i], budget);
    out[i] = take;
    budget -= take;
  }
  return out;
}

}  // namespace mplab::transport
