#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "closroute/topology.hpp"
#include "closroute/workload.hpp"

namespace closroute {

enum class Scheme { Greedy, Ecmp, EdgeColoring, Annealing, Exact };

/// Accepts "greedy", "ecmp", "edge_coloring", "annealing", "exact".
std::optional<Scheme> parse_scheme(std::string_view name);
std::string_view scheme_name(Scheme scheme);

/// routes[i] is the route of commodities[i] in the input the choice was
/// computed from.
struct PathChoice {
  std::vector<Route> routes;

  bool operator==(const PathChoice&) const = default;
};

/// Number of assigned commodities per directed link.
class LoadMap {
 public:
  explicit LoadMap(const ClosTopology& topo) : counts_(topo.num_links(), 0) {}

  void add(const Route& route) {
    for (LinkId l : route.links) ++counts_[l.value];
  }
  std::uint32_t count(LinkId link) const { return counts_[link.value]; }
  std::span<const std::uint32_t> counts() const { return counts_; }

 private:
  std::vector<std::uint32_t> counts_;
};

enum class LoadScope { SpineLinksOnly, AllLinks };

LoadMap build_load_map(const PathChoice& choice, const ClosTopology& topo);
std::uint32_t max_link_load(const PathChoice& choice, const ClosTopology& topo, LoadScope scope);

/// The route a commodity takes when it must not cross the spine layer, or
/// nullopt when its endpoints sit under different ToRs. Validates endpoints.
std::optional<Route> local_route(const ClosTopology& topo, const CommoditySpec& c);

/// Greedy least-congested assignment in the given commodity order. Each
/// commodity starts on its lowest live spine and moves to a later spine only
/// if that spine's busiest ToR<->spine link carries strictly fewer
/// assignments. NIC links are shared by every candidate of a commodity, so
/// they never change the choice and are left out of the comparison.
PathChoice greedy_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo);

/// Same procedure with each commodity contributing `weights[i]` instead of 1.
PathChoice greedy_assign_weighted(std::span<const CommoditySpec> commodities,
                                  std::span<const double> weights, const ClosTopology& topo);

/// Maximal connected components of the graph linking commodities that share a
/// source ToR or a destination ToR. Each part lists input indices in input
/// order; parts are ordered by their first index. Commodities that never
/// reach the spine layer are singletons.
std::vector<std::vector<std::size_t>> decompose_components(std::span<const CommoditySpec> commodities);

/// Runs the greedy pass on every component concurrently (OpenMP). Output is
/// identical to greedy_assign.
PathChoice greedy_assign_parallel(std::span<const CommoditySpec> commodities, const ClosTopology& topo);

/// Spine ECMP hashing would pick for this commodity id.
int ecmp_spine(std::string_view commodity_id, const ClosTopology& topo, std::uint64_t seed);
PathChoice ecmp_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                       std::uint64_t seed);

/// Proper edge colouring of the source-ToR/destination-ToR multigraph with
/// max-degree colours; colour c maps to live spine c mod live_count.
PathChoice edge_color_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo);

struct AnnealSchedule {
  double initial_temp = 1.0;
  double cooling_factor = 0.999;
  std::optional<std::size_t> moves;  // nullopt: 100 per commodity
};

PathChoice anneal_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                         const AnnealSchedule& schedule, std::uint64_t seed);

struct ExactLimits {
  std::size_t max_commodities = 16;
};

/// Branch and bound over spine vectors minimising the max ToR<->spine load.
/// Among optimal vectors the lexicographically smallest (by live spine
/// index, in input order) is returned. Throws when the inter-ToR commodity
/// count exceeds the limit.
PathChoice exact_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                        const ExactLimits& limits = {});

struct SchemeOptions {
  std::uint64_t seed = 0;
  AnnealSchedule anneal;
  ExactLimits exact;
  bool parallel_greedy = false;
  std::span<const double> weights;  // greedy only; empty means unit demands
};

PathChoice assign_paths(Scheme scheme, std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                        const SchemeOptions& options = {});

/// Highest source-side or destination-side inter-ToR degree.
std::uint32_t max_tor_degree(std::span<const CommoditySpec> commodities);

}  // namespace closroute
