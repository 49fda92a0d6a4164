#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "closroute/topology.hpp"

namespace closroute {

/// Rate given to flows that never touch a link (same-host transfers).
inline constexpr double kUnboundedRate = std::numeric_limits<double>::infinity();

struct FlowPath {
  std::string id;
  const Route* route = nullptr;
};

/// rates[i] belongs to the i-th flow handed to waterfill, in bits/second.
struct RateAllocation {
  std::vector<std::string> ids;
  std::vector<double> rates;

  double rate_of(const std::string& id) const;
};

/// Max-min fair rates by progressive filling: the link with the smallest
/// residual-capacity-per-unfrozen-flow saturates first and freezes its flows
/// at that share. Results do not depend on the order of `flows`.
RateAllocation waterfill(std::span<const FlowPath> flows, const ClosTopology& topo);

/// Smallest finite rate. Throws when there is none.
double min_bandwidth(const RateAllocation& alloc);

}  // namespace closroute
