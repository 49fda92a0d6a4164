#include "closroute/workload.hpp"

#include <algorithm>
#include <stdexcept>

#include "closroute/random.hpp"

namespace closroute {

std::vector<ModelConfig> default_model_catalogue() {
  return {
      {"bloom", 176e9, 4, 4, 12},
      {"gpt3", 175e9, 4, 8, 8},
      {"llama2_70b", 70e9, 4, 8, 16},
  };
}

Occupancy::Occupancy(const ClosTopology& topo)
    : hosts_per_tor_(topo.hosts_per_tor()),
      nics_per_host_(topo.nics_per_host()),
      free_(topo.num_endpoints()),
      used_(static_cast<std::size_t>(topo.num_endpoints()), 0) {}

void Occupancy::claim(std::span<const Endpoint> endpoints) {
  for (const auto& e : endpoints) {
    if (used(e)) throw std::logic_error("endpoint " + to_string(e) + " already in use");
  }
  for (const auto& e : endpoints) used_[static_cast<std::size_t>(index(e))] = 1;
  free_ -= static_cast<int>(endpoints.size());
}

void Occupancy::release(std::span<const Endpoint> endpoints) {
  for (const auto& e : endpoints) {
    auto& slot = used_[static_cast<std::size_t>(index(e))];
    if (slot) {
      slot = 0;
      ++free_;
    }
  }
}

std::vector<Endpoint> place_job(const ClosTopology& topo, const ModelConfig& model, int dp,
                                const Occupancy& occupancy, std::uint64_t seed) {
  if (model.tp < 1 || model.pp < 1 || dp < 1) throw std::invalid_argument("parallelism widths must be >= 1");
  const int needed = model.tp * model.pp * dp;
  if (needed > occupancy.free_count()) {
    throw std::runtime_error("job needs " + std::to_string(needed) + " GPUs but only " +
                             std::to_string(occupancy.free_count()) + " are free");
  }

  std::vector<int> hosts;  // global host indices with at least one free NIC
  const int num_hosts = topo.num_tors() * topo.hosts_per_tor();
  for (int h = 0; h < num_hosts; ++h) {
    const Endpoint first{h / topo.hosts_per_tor(), h % topo.hosts_per_tor(), 0};
    for (int n = 0; n < topo.nics_per_host(); ++n) {
      if (!occupancy.used(Endpoint{first.tor, first.host, n})) {
        hosts.push_back(h);
        break;
      }
    }
  }

  Rng rng(seed);
  std::vector<Endpoint> placement;
  placement.reserve(static_cast<std::size_t>(needed));
  for (std::size_t i = 0; i < hosts.size() && static_cast<int>(placement.size()) < needed; ++i) {
    std::swap(hosts[i], hosts[i + uniform_below(rng, hosts.size() - i)]);
    const int h = hosts[i];
    for (int n = 0; n < topo.nics_per_host() && static_cast<int>(placement.size()) < needed; ++n) {
      const Endpoint e{h / topo.hosts_per_tor(), h % topo.hosts_per_tor(), n};
      if (!occupancy.used(e)) placement.push_back(e);
    }
  }
  return placement;
}

std::uint64_t shard_bytes(const ModelConfig& model) {
  if (!(model.num_params > 0.0)) throw std::invalid_argument("model " + model.name + " has no parameters");
  const auto total = static_cast<std::uint64_t>(model.num_params) * static_cast<std::uint64_t>(model.bytes_per_param);
  const auto parts = static_cast<std::uint64_t>(model.tp * model.pp);
  return (total + parts - 1) / parts;
}

std::vector<Ring> build_rings(const Job& job) {
  const int tp = job.model.tp;
  const int pp = job.model.pp;
  const int copy = tp * pp;
  if (static_cast<int>(job.placement.size()) != copy * job.dp) {
    throw std::invalid_argument("job " + job.id + " placement has " + std::to_string(job.placement.size()) +
                                " entries, expected " + std::to_string(copy * job.dp));
  }
  const auto shard = shard_bytes(job.model);
  std::vector<Ring> rings;
  rings.reserve(static_cast<std::size_t>(copy));
  for (int j = 0; j < pp; ++j) {
    for (int i = 0; i < tp; ++i) {
      Ring ring{job.id, i, j, {}, shard};
      ring.members.reserve(static_cast<std::size_t>(job.dp));
      for (int r = 0; r < job.dp; ++r) {
        ring.members.push_back(job.placement[static_cast<std::size_t>(r * copy + j * tp + i)]);
      }
      rings.push_back(std::move(ring));
    }
  }
  return rings;
}

std::vector<CommoditySpec> ring_allreduce_commodities(const Ring& ring, int iteration) {
  const auto n = static_cast<std::uint64_t>(ring.members.size());
  if (n < 2) throw std::invalid_argument("ring of job " + ring.job_id + " has fewer than two members");
  const std::uint64_t volume = (2 * (n - 1) * ring.shard_bytes + n - 1) / n;
  const std::string prefix = ring.job_id + "/r" + std::to_string(ring.tp_index) + "." +
                             std::to_string(ring.pp_index) + "/it" + std::to_string(iteration) + "/e";
  std::vector<CommoditySpec> out;
  out.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    out.push_back({prefix + std::to_string(k), ring.job_id, ring.members[k], ring.members[(k + 1) % n], volume});
  }
  return out;
}

double compute_phase_duration(const Job& job, const HardwareProfile& hw) {
  if (!(hw.peak_flops > 0.0) || !(hw.utilization > 0.0) || !(hw.tokens_per_batch > 0.0)) {
    throw std::invalid_argument("hardware parameters must be positive");
  }
  const double gpus = static_cast<double>(job.num_gpus());
  return 6.0 * job.model.num_params * hw.tokens_per_batch / (gpus * hw.peak_flops * hw.utilization);
}

std::vector<double> arrival_schedule(int num_jobs, double window, std::uint64_t seed) {
  if (!(window > 0.0)) throw std::invalid_argument("arrival window must be > 0");
  if (num_jobs < 0) throw std::invalid_argument("job count must be >= 0");
  Rng rng(seed);
  std::vector<double> times(static_cast<std::size_t>(num_jobs));
  for (auto& t : times) t = uniform_unit(rng) * window;
  std::sort(times.begin(), times.end());
  return times;
}

}  // namespace closroute
