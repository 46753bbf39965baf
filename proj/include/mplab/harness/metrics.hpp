#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab::harness {

struct Sample {
  double time = 0.0;
  double agg_throughput_mbps = 0.0;
  std::vector<double> flow_throughput_mbps;
  std::optional<double> reorder_p50_ms;
  std::optional<double> reorder_p95_ms;
  std::optional<double> reward;  ///< mean reward of the agent slots ending in the interval
};

struct MetricsSeries {
  std::vector<Sample> samples;

  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& s : samples) t.push_back(s.time);
    return t;
  }
  std::vector<double> aggregate() const {
    std::vector<double> v;
    for (const auto& s : samples) v.push_back(s.agg_throughput_mbps);
    return v;
  }
};

/// At each sample t, the mean of the samples with time in (t - window, t].
inline std::vector<double> moving_average(const std::vector<double>& times,
                                          const std::vector<double>& values, double window) {
  require(window > 0.0, "moving-average window must be positive");
  require(times.size() == values.size(), "times and values differ in length");
  std::vector<double> out(values.size());
  std::size_t lo = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(i == 0 || times[i] >= times[i - 1], "sample times must be nondecreasing");
    while (times[lo] <= times[i] - window) ++lo;
    // Deviations from the oldest sample, so a constant window averages exactly.
    double dev = 0.0;
    for (std::size_t k = lo; k <= i; ++k) dev += values[k] - values[lo];
    out[i] = values[lo] + dev / static_cast<double>(i - lo + 1);
  }
  return out;
}

/// Linear interpolation between order statistics; q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

inline std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

/// time_s, agg_throughput_mbps, flow<k>_mbps..., reorder_p50_ms, reorder_p95_ms, reward.
/// Empty fields mean no data in that interval.
inline void write_csv(std::ostream& os, const MetricsSeries& m, std::size_t flows) {
  os << "time_s,agg_throughput_mbps";
  for (std::size_t k = 0; k < flows; ++k) os << ",flow" << k << "_mbps";
  os << ",reorder_p50_ms,reorder_p95_ms,reward\n";
  for (const auto& s : m.samples) {
    os << format_number(s.time) << ',' << format_number(s.agg_throughput_mbps);
    for (std::size_t k = 0; k < flows; ++k)
      os << ',' << (k < s.flow_throughput_mbps.size() ? format_number(s.flow_throughput_mbps[k]) : "");
    os << ',' << format_optional(s.reorder_p50_ms) << ',' << format_optional(s.reorder_p95_ms) << ','
       << format_optional(s.reward) << '\n';
  }
}

}  // namespace mplab::harness
