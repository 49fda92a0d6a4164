#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "closroute/routing.hpp"
#include "closroute/sim.hpp"
#include "closroute/topology.hpp"
#include "closroute/workload.hpp"

namespace closroute {

/// A config problem; `field()` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config error at '" + field + "': " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct TopologyConfig {
  int num_spines = 32;
  int num_tors = 64;
  int hosts_per_tor = 4;
  int nics_per_host = 8;
  double link_capacity_bps = 100e9;

  ClosTopology build() const { return build_topology(num_spines, num_tors, hosts_per_tor, nics_per_host, link_capacity_bps); }
};

struct JobSpec {
  std::string id;
  std::string model;
  int dp = 2;
  int num_iterations = 10;
  std::optional<double> arrival_s;  // drawn from the arrival window when absent
};

/// Draws a job mix per seed instead of (or in addition to) listed jobs.
struct RandomJobs {
  int min_count = 1;
  int max_count = 5;
  std::vector<std::string> models;  // empty: whole catalogue
  int num_iterations = 10;
};

struct FailSweepConfig {
  double time_s = 20.0;
  std::uint64_t seed = 7;
};

struct ScenarioConfig {
  std::string scenario_id = "scenario";
  TopologyConfig topology;
  std::vector<ModelConfig> models = default_model_catalogue();
  std::vector<int> allowed_dp{2, 4, 8};
  std::vector<JobSpec> jobs;
  std::optional<RandomJobs> random_jobs;
  double arrival_window_s = 10.0;
  ControllerModel controller;  // scheme comes from `schemes`
  std::vector<Scheme> schemes{Scheme::Greedy, Scheme::Ecmp};
  std::vector<std::uint64_t> seeds{1};
  std::optional<FailurePlan> failures;
  FailSweepConfig failsweep;
  HardwareProfile hardware;
  int udp_port_base = 49152;
  bool report_runtime = false;  // adds wall-clock runtime_s rows (not reproducible)
};

/// Parses and validates; throws ConfigError naming the field.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Jobs for one seed, placed on `topo`. Identical for every scheme.
std::vector<Job> realize_jobs(const ScenarioConfig& config, const ClosTopology& topo, std::uint64_t seed);

}  // namespace closroute
