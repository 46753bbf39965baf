#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab::transport {

enum class ControllerKind { dql, lia, olia, balia, reno };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::dql: return "dql";
    case ControllerKind::lia: return "lia";
    case ControllerKind::olia: return "olia";
    case ControllerKind::balia: return "balia";
    case ControllerKind::reno: return "reno";
  }
  return "?";
}

inline ControllerKind parse_controller(const std::string& s) {
  if (s == "dql") return ControllerKind::dql;
  if (s == "lia") return ControllerKind::lia;
  if (s == "olia") return ControllerKind::olia;
  if (s == "balia") return ControllerKind::balia;
  if (s == "reno") return ControllerKind::reno;
  throw ConfigError("unknown controller '" + s + "'");
}

/// What the window formulas need to know about one subflow.
struct PathWindow {
  double cwnd = 10.0;
  double rtt = 0.1;
  /// Packets acknowledged since the last loss, and between the last two losses.
  double acked_since_loss = 0.0;
  double acked_between_losses = 0.0;
};

inline double reno_increase(const PathWindow& p) { return 1.0 / p.cwnd; }

/// RFC 6356 coupled increase:
/// min(a / sum w, 1 / w_r), a = sum w * max_k(w_k / rtt_k^2) / (sum_k w_k / rtt_k)^2.
inline double lia_increase(std::span<const PathWindow> paths, std::size_t r) {
  double total = 0.0, best = 0.0, rate = 0.0;
  for (const auto& p : paths) {
    total += p.cwnd;
    best = std::max(best, p.cwnd / (p.rtt * p.rtt));
    rate += p.cwnd / p.rtt;
  }
  const double a = total * best / (rate * rate);
  return std::min(a / total, 1.0 / paths[r].cwnd);
}

/// OLIA (Khalili et al., "MPTCP is not Pareto-optimal"):
/// (w_r / rtt_r^2) / (sum_p w_p / rtt_p)^2 + alpha_r / w_r, where alpha moves
/// window from the largest-window paths M to the best paths B (largest
/// l_p / rtt_p^2 with l_p = max of the last two inter-loss counts) outside M.
inline double olia_increase(std::span<const PathWindow> paths, std::size_t r) {
  const std::size_t n = paths.size();
  double rate = 0.0, max_w = 0.0, best_q = 0.0;
  std::vector<double> quality(n);
  for (std::size_t p = 0; p < n; ++p) {
    rate += paths[p].cwnd / paths[p].rtt;
    max_w = std::max(max_w, paths[p].cwnd);
    const double l = std::max(paths[p].acked_since_loss, paths[p].acked_between_losses);
    quality[p] = l / (paths[p].rtt * paths[p].rtt);
    best_q = std::max(best_q, quality[p]);
  }
  std::size_t in_m = 0, best_not_m = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const bool m = paths[p].cwnd == max_w;
    in_m += m;
    best_not_m += !m && quality[p] == best_q;
  }
  const bool r_in_m = paths[r].cwnd == max_w;
  const bool r_best = quality[r] == best_q;
  double alpha = 0.0;
  if (best_not_m > 0) {
    if (!r_in_m && r_best) alpha = 1.0 / (static_cast<double>(n) * best_not_m);
    else if (r_in_m) alpha = -1.0 / (static_cast<double>(n) * in_m);
  }
  const auto& pr = paths[r];
  return (pr.cwnd / (pr.rtt * pr.rtt)) / (rate * rate) + alpha / pr.cwnd;
}

/// BALIA (Peng et al., "Multipath TCP: analysis, design and implementation"):
/// x_r = w_r / rtt_r, alpha_r = max_k x_k / x_r;
/// increase (x_r / (rtt_r (sum x)^2)) ((1 + alpha_r) / 2) ((4 + alpha_r) / 5).
inline double balia_alpha(std::span<const PathWindow> paths, std::size_t r) {
  double best = 0.0;
  for (const auto& p : paths) best = std::max(best, p.cwnd / p.rtt);
  return best / (paths[r].cwnd / paths[r].rtt);
}

inline double balia_increase(std::span<const PathWindow> paths, std::size_t r) {
  double sum_x = 0.0;
  for (const auto& p : paths) sum_x += p.cwnd / p.rtt;
  const double x = paths[r].cwnd / paths[r].rtt;
  const double a = balia_alpha(paths, r);
  return (x / (paths[r].rtt * sum_x * sum_x)) * ((1.0 + a) / 2.0) * ((4.0 + a) / 5.0);
}

/// Per-ACK window increment. DQL windows change only at slot boundaries.
inline double window_increase(ControllerKind k, std::span<const PathWindow> paths, std::size_t r) {
  switch (k) {
    case ControllerKind::reno: return reno_increase(paths[r]);
    case ControllerKind::lia: return lia_increase(paths, r);
    case ControllerKind::olia: return olia_increase(paths, r);
    case ControllerKind::balia: return balia_increase(paths, r);
    case ControllerKind::dql: return 0.0;
  }
  return 0.0;
}

/// Window after a loss event on subflow r, floored at cwnd_min.
inline double window_after_loss(ControllerKind k, std::span<const PathWindow> paths, std::size_t r,
                                double cwnd_min) {
  const double w = paths[r].cwnd;
  switch (k) {
    case ControllerKind::dql: return w;
    case ControllerKind::balia:
      return std::max(w - (w / 2.0) * std::min(balia_alpha(paths, r), 1.5), cwnd_min);
    default: return std::max(w / 2.0, cwnd_min);
  }
}

}  // namespace mplab::transport
