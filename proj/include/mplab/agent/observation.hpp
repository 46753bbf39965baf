#pragma once

#include <cmath>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab {

/// Per-subflow state seen by the agent at a slot boundary.
struct SubflowObservation {
  double sending_rate = 0.0;     ///< packets/s sent during the slot
  double throughput = 0.0;       ///< packets/s acknowledged during the slot
  double rtt = 0.1;              ///< smoothed RTT, seconds
  double window_change = 0.0;    ///< cwnd delta over the slot, packets
  double schedule_weight = 0.0;  ///< share of the scheduler in [0,1]
  double rtt_diff = 0.0;         ///< rtt minus the smallest rtt of the connection

  void validate() const {
    require(std::isfinite(sending_rate) && std::isfinite(throughput) && std::isfinite(rtt) &&
                std::isfinite(window_change) && std::isfinite(schedule_weight) &&
                std::isfinite(rtt_diff),
            "observation fields must be finite");
    require(rtt > 0.0, "observation rtt must be positive");
    require(schedule_weight >= 0.0 && schedule_weight <= 1.0, "schedule weight outside [0,1]");
  }
};

/// Ordered by subflow id.
using ConnectionState = std::vector<SubflowObservation>;

}  // namespace mplab
