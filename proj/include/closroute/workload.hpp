#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "closroute/topology.hpp"

namespace closroute {

struct ModelConfig {
  std::string name;
  double num_params = 0.0;
  int bytes_per_param = 4;
  int tp = 1;  // tensor-parallel width
  int pp = 1;  // pipeline depth

  int full_copy_gpus() const { return tp * pp; }
};

/// BLOOM, GPT-3 and LLaMA2-70B with their tensor/pipeline widths.
std::vector<ModelConfig> default_model_catalogue();

struct Job {
  std::string id;
  ModelConfig model;
  int dp = 1;
  double arrival_time = 0.0;
  int num_iterations = 1;
  std::vector<Endpoint> placement;  // tp * pp * dp entries, replica-major

  int num_gpus() const { return model.tp * model.pp * dp; }
};

/// Data-parallel ring over the replicas holding one (tensor, pipeline) shard.
struct Ring {
  std::string job_id;
  int tp_index = 0;
  int pp_index = 0;
  std::vector<Endpoint> members;  // ordered by replica index
  std::uint64_t shard_bytes = 0;
};

struct CommoditySpec {
  std::string id;
  std::string job_id;
  Endpoint src;
  Endpoint dst;
  std::uint64_t volume = 0;  // bytes
};

/// Tracks which endpoints are already claimed by running jobs.
class Occupancy {
 public:
  explicit Occupancy(const ClosTopology& topo);

  bool used(const Endpoint& e) const { return used_[static_cast<std::size_t>(index(e))] != 0; }
  int free_count() const { return free_; }
  /// Throws if any endpoint is already claimed.
  void claim(std::span<const Endpoint> endpoints);
  void release(std::span<const Endpoint> endpoints);

 private:
  int index(const Endpoint& e) const { return (e.tor * hosts_per_tor_ + e.host) * nics_per_host_ + e.nic; }

  int hosts_per_tor_;
  int nics_per_host_;
  int free_;
  std::vector<char> used_;
};

/// Samples hosts uniformly (among hosts with free GPUs) and consumes each
/// sampled host's free GPUs in NIC order before moving to the next.
std::vector<Endpoint> place_job(const ClosTopology& topo, const ModelConfig& model, int dp,
                                const Occupancy& occupancy, std::uint64_t seed);

std::uint64_t shard_bytes(const ModelConfig& model);

/// Replica r's shard (i, j) sits at placement[r*tp*pp + j*tp + i].
std::vector<Ring> build_rings(const Job& job);

/// One aggregate commodity per ring edge k -> k+1, each carrying
/// ceil(2 (N-1) / N * shard) bytes.
std::vector<CommoditySpec> ring_allreduce_commodities(const Ring& ring, int iteration);

struct HardwareProfile {
  double peak_flops = 312e12;
  double utilization = 0.3;
  double tokens_per_batch = 2e6;
};

/// Forward + backward time per iteration using the 6 * params * tokens FLOP
/// estimate spread over every GPU in the job.
double compute_phase_duration(const Job& job, const HardwareProfile& hw);

/// `num_jobs` sorted i.i.d. uniform draws in [0, window).
std::vector<double> arrival_schedule(int num_jobs, double window, std::uint64_t seed);

}  // namespace closroute
