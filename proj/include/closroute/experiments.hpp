#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "closroute/scenario.hpp"
#include "closroute/sim.hpp"

namespace closroute {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3, kExitViolation = 4 };

struct ResultRow {
  std::string scenario;
  std::string scheme;
  std::string job;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kResultHeader = "scenario,scheme,job,metric,value,seed";

/// Shortest round-trip decimal form, independent of locale.
std::string format_double(double v);
/// Sorts by (scenario, scheme, job, metric, seed).
void sort_rows(std::vector<ResultRow>& rows);
void write_rows_csv(std::ostream& out, std::span<const ResultRow> rows);

/// Sim-level invariants gathered through the observer and the final records.
struct InvariantReport {
  std::size_t snapshots = 0;
  std::size_t overloaded_links = 0;    // sum of rates above capacity
  std::size_t dead_spine_routes = 0;   // flow routed through a failed spine
  std::size_t idle_snapshots = 0;      // active flows but no saturated link
  std::size_t conservation_errors = 0; // delivered bytes differ from volume
  std::size_t barrier_errors = 0;      // iteration overlap within a job
  std::vector<std::string> examples;

  bool ok() const {
    return overloaded_links + dead_spine_routes + idle_snapshots + conservation_errors + barrier_errors == 0;
  }
  void merge(const InvariantReport& other);
};

struct ScenarioRun {
  std::string scenario;
  Scheme scheme = Scheme::Greedy;
  std::uint64_t seed = 0;
  SimResult result;
  InvariantReport invariants;
};

struct RunOutput {
  std::vector<ResultRow> rows;  // sorted
  std::vector<ScenarioRun> runs;
  InvariantReport invariants;
};

/// Every (scheme, seed) pair of the config, fanned out over OpenMP threads.
/// Rows carry `scenario_tag` in their scenario column.
RunOutput run_experiments(const ScenarioConfig& config, const std::string& scenario_tag, bool check_invariants);

std::vector<ResultRow> rows_from_result(const std::string& scenario, Scheme scheme, std::uint64_t seed,
                                        const SimResult& result, bool report_runtime);

struct RunOptions {
  bool trace = false;
  std::optional<std::vector<Scheme>> schemes;
  std::optional<std::vector<std::uint64_t>> seeds;
};

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
            const RunOptions& options, std::ostream& log);

struct ValidateLimits {
  int max_tors = 8;
  int max_spines = 4;               // live spines per instance
  std::size_t max_commodities = 14; // inter-ToR commodities per instance
  int failed_spines = 0;            // extra spines built and then failed per instance
};

struct InstanceResult {
  std::uint64_t index = 0;
  int tors = 0;
  int live_spines = 0;
  int failed_spines = 0;
  std::size_t commodities = 0;
  std::uint32_t max_degree = 0;
  std::uint32_t greedy_load = 0;
  std::uint32_t exact_load = 0;
  std::uint32_t edge_color_load = 0;
  double ratio = 0.0;
  double greedy_min_bw = 0.0;
  double exact_min_bw = 0.0;
};

struct ValidationReport {
  std::vector<InstanceResult> instances;
  double max_ratio = 0.0;
  std::size_t violations = 0;            // greedy > 2 * exact
  std::size_t bandwidth_violations = 0;  // greedy min rate < exact min rate / 2
  std::size_t edge_color_ceil_mismatches = 0;
  std::size_t edge_color_exact_mismatches = 0;

  bool ok() const {
    return violations + bandwidth_violations + edge_color_ceil_mismatches + edge_color_exact_mismatches == 0;
  }
};

/// Random unit-demand instances (unit capacities, one NIC per commodity end)
/// checked greedy vs exact vs edge colouring. Instance i depends only on
/// (seed, i).
ValidationReport validate_instances(std::size_t count, std::uint64_t seed, const ValidateLimits& limits);
void write_validation_csv(std::ostream& out, const ValidationReport& report);

int cmd_validate(std::size_t instances, std::uint64_t seed, const ValidateLimits& limits,
                 const std::optional<std::filesystem::path>& out_path, std::ostream& log);

int cmd_bench(std::span<const std::size_t> counts, std::span<const Scheme> schemes, const std::filesystem::path& out_path,
              std::uint64_t seed, const TopologyConfig& topology, std::ostream& log);

/// One sweep group per failure count, failures injected at failsweep.time_s.
/// Also re-checks the greedy bound on small instances with the same number of
/// failed spines.
int cmd_failsweep(const std::filesystem::path& config_path, std::span<const int> failure_counts,
                  const std::filesystem::path& out_path, const RunOptions& options, std::ostream& log);

}  // namespace closroute
