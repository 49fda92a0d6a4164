#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "closroute/routing.hpp"
#include "closroute/topology.hpp"
#include "closroute/workload.hpp"

namespace closroute {

struct ControllerModel {
  Scheme scheme = Scheme::Greedy;
  double reaction_latency = 10e-3;   // seconds
  double elephant_threshold = 1e6;   // bytes; smaller flows stay on ECMP
  bool precomputed_failures = false; // failure reroutes skip the reaction latency
  bool ecmp_fallback = false;        // new elephants ride ECMP until the controller answers
  bool volume_weighted = false;      // greedy weighs commodities by remaining bytes
  bool parallel_greedy = false;
  AnnealSchedule anneal;
  ExactLimits exact;
};

struct FailurePlan {
  std::vector<double> times;
  std::vector<int> counts;
  std::uint64_t seed = 0;
};

inline constexpr int kNoUdpPort = -1;

/// Source port that steers a flow over `route`'s spine; kNoUdpPort for routes
/// that stay below the spine layer.
int encode_route_as_udp_port(const Route& route, int port_base);
/// Inverse of encode_route_as_udp_port for spine routes.
int decode_udp_port(int port, int port_base);

struct FlowRecord {
  std::string commodity_id;
  Endpoint src;
  Endpoint dst;
  std::uint64_t volume = 0;  // bytes
  double start = 0.0;
  double end = 0.0;
  double fct = 0.0;
  double throughput = 0.0;  // bits/second, volume / fct
  double delivered = 0.0;   // bytes integrated from the rate history
  int udp_port = kNoUdpPort;
};

struct MetricsRecord {
  std::string job_id;
  int iteration = 0;
  double comm_start = 0.0;
  double comm_end = 0.0;
  double allreduce_time = 0.0;  // longest flow of the iteration
  std::vector<FlowRecord> flow_records;  // same-host transfers are not recorded
};

struct DecisionLog {
  double time = 0.0;
  double runtime_s = 0.0;  // wall clock of the routing scheme; not deterministic
  std::size_t commodities = 0;
  std::uint32_t max_spine_load = 0;
};

struct ActiveFlowView {
  const std::string* id;
  const Route* route;
  double rate;
};

/// Passed to the observer after every rate recomputation.
struct SimSnapshot {
  double time;
  const ClosTopology& topo;
  std::span<const ActiveFlowView> flows;
};

struct SimOptions {
  HardwareProfile hardware;
  std::optional<FailurePlan> failures;
  std::uint64_t seed = 0;
  int udp_port_base = 49152;
  std::function<void(const SimSnapshot&)> observer;
};

struct SimResult {
  std::vector<MetricsRecord> metrics;  // in completion order
  std::vector<DecisionLog> decisions;
  std::vector<int> failed_spines;      // at the end of the run
  double end_time = 0.0;
};

/// Places jobs one after another on free GPUs; job k uses seed
/// derive_seed(seed, k).
void place_jobs(const ClosTopology& topo, std::span<Job> jobs, std::uint64_t seed);

/// Runs every job through num_iterations compute/communication rounds. Jobs
/// must already be placed. Deterministic per (inputs, seed) apart from the
/// runtime_s fields.
SimResult run_scenario(const ClosTopology& topo, std::vector<Job> jobs, const ControllerModel& controller,
                       const SimOptions& options);

/// Uniformly random endpoint pairs on distinct ToRs, ids "c0", "c1", ...
std::vector<CommoditySpec> random_inter_tor_commodities(const ClosTopology& topo, std::size_t count,
                                                        std::uint64_t seed);

/// Median wall-clock seconds over `repetitions` runs of one scheme on a seeded
/// random commodity set, per requested count.
std::vector<std::pair<std::size_t, double>> measure_scheme_runtime(Scheme scheme, std::span<const std::size_t> counts,
                                                                   const ClosTopology& topo, std::uint64_t seed,
                                                                   const SchemeOptions& options = {},
                                                                   int repetitions = 5);

}  // namespace closroute
