#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "mplab/harness/runner.hpp"

namespace mplab::harness {

struct ComparabilityError : ConfigError {
  using ConfigError::ConfigError;
};

struct ControllerRuns {
  std::string label;  ///< usually the controller name
  ExperimentConfig config;
  std::vector<RunResult> runs;
};

struct SummaryRow {
  std::string controller;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_half_width = 0.0;  ///< 95% two-sided Student t; 0 for a single run
};

struct SummaryTable {
  std::string experiment;
  std::vector<std::string> notes;
  std::vector<SummaryRow> rows;

  const SummaryRow& row(const std::string& controller, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.controller == controller && r.metric == metric) return r;
    throw PreconditionError("no summary row " + controller + "/" + metric);
  }
};

inline SummaryRow summarize(std::string controller, std::string metric, const std::vector<double>& v) {
  require(!v.empty(), "no runs to summarize");
  SummaryRow r{std::move(controller), std::move(metric), v.size(), 0.0, 0.0};
  const double n = static_cast<double>(v.size());
  for (double x : v) r.mean += x / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    boost::math::students_t dist(n - 1.0);
    r.ci_half_width = boost::math::quantile(dist, 0.975) * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return r;
}

inline bool has_single_path_flows(const ExperimentConfig& c) {
  for (const auto& g : c.flows)
    if (g.kind == FlowKind::single) return true;
  return false;
}

inline double class_mean(const RunResult& r, FlowKind kind) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& f : r.flows)
    if (f.kind == kind) {
      s += f.throughput_mbps;
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

/// Mean and 95% CI of aggregate throughput per controller across seeds. With
/// competing single-path flows, the per-flow means of both classes as well.
inline SummaryTable compare(const std::vector<ControllerRuns>& results) {
  require(results.size() >= 2, "compare needs at least two controllers");
  const auto& ref = results.front();
  for (const auto& r : results) {
    if (!same_scenario(r.config, ref.config))
      throw ComparabilityError("'" + r.label + "' ran a different scenario than '" + ref.label + "'");
    if (r.runs.size() != ref.runs.size())
      throw ComparabilityError("'" + r.label + "' has a different number of runs");
    for (std::size_t i = 0; i < r.runs.size(); ++i)
      if (r.runs[i].seed != ref.runs[i].seed)
        throw ComparabilityError("'" + r.label + "' ran different seeds");
  }
  SummaryTable t;
  t.experiment = ref.config.id;
  if (ref.config.id == "I")
    t.notes.push_back("experiment I uses 10 Mbps paths and a 600 MB file; the I-body variant uses 20 Mbps and 30 MB");
  else if (ref.config.id == "I-body")
    t.notes.push_back("I-body variant: 20 Mbps paths and a 30 MB file; experiment I uses 10 Mbps and 600 MB");
  const bool classes = has_single_path_flows(ref.config);
  for (const auto& r : results) {
    std::vector<double> agg, mp, sp;
    for (const auto& run : r.runs) {
      agg.push_back(run.aggregate_mbps);
      mp.push_back(class_mean(run, FlowKind::mptcp));
      sp.push_back(class_mean(run, FlowKind::single));
    }
    t.rows.push_back(summarize(r.label, "agg_throughput_mbps", agg));
    if (classes) {
      t.rows.push_back(summarize(r.label, "mptcp_flow_mean_mbps", mp));
      t.rows.push_back(summarize(r.label, "single_flow_mean_mbps", sp));
    }
  }
  return t;
}

inline void write_summary_csv(std::ostream& os, const SummaryTable& t) {
  os << "controller,metric,n,mean,ci95_half_width\n";
  for (const auto& r : t.rows)
    os << r.controller << ',' << r.metric << ',' << r.n << ',' << format_number(r.mean) << ','
       << format_number(r.ci_half_width) << '\n';
}

inline nlohmann::json to_json(const SummaryTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"controller", r.controller},
                    {"metric", r.metric},
                    {"n", r.n},
                    {"mean", format_number(r.mean)},
                    {"ci95_half_width", format_number(r.ci_half_width)}});
  return {{"experiment", t.experiment}, {"notes", t.notes}, {"rows", rows}};
}

}  // namespace mplab::harness
