#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace closroute {

/// A GPU-facing network endpoint: one NIC on one host under one ToR.
struct Endpoint {
  int tor = 0;
  int host = 0;
  int nic = 0;

  auto operator<=>(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);

/// Dense index of a directed link inside a ClosTopology.
struct LinkId {
  std::uint32_t value = 0;

  auto operator<=>(const LinkId&) const = default;
};

enum class LinkKind { NicUp, NicDown, TorUp, SpineDown };

enum class NodeKind { Nic, Tor, Spine };

struct Node {
  NodeKind kind = NodeKind::Nic;
  int index = 0;  // global NIC index, ToR index or spine index

  auto operator<=>(const Node&) const = default;
};

enum class RouteKind { IntraHost, IntraTor, Spine };

struct Route {
  RouteKind kind = RouteKind::IntraHost;
  int spine = -1;  // meaningful only for RouteKind::Spine
  std::vector<LinkId> links;

  bool operator==(const Route&) const = default;
};

/// Two-layer Clos fabric: every ToR connects to every spine, every NIC to its
/// ToR. Links are directed and all share one capacity. Immutable.
class ClosTopology {
 public:
  ClosTopology(int num_spines, int num_tors, int hosts_per_tor, int nics_per_host,
               double link_capacity_bps);

  int num_spines() const { return num_spines_; }
  int num_tors() const { return num_tors_; }
  int hosts_per_tor() const { return hosts_per_tor_; }
  int nics_per_host() const { return nics_per_host_; }
  double link_capacity() const { return link_capacity_; }

  int num_endpoints() const { return num_tors_ * hosts_per_tor_ * nics_per_host_; }
  int nics_per_tor() const { return hosts_per_tor_ * nics_per_host_; }

  /// Sorted, distinct.
  const std::vector<int>& failed_spines() const { return failed_; }
  const std::vector<int>& live_spines() const { return live_; }
  bool spine_live(int spine) const { return spine_alive_[static_cast<std::size_t>(spine)] != 0; }

  /// Copy with `spines` added to the failed set. Throws if that would leave
  /// no live spine or an index is out of range.
  ClosTopology with_failed_spines(std::span<const int> spines) const;

  bool contains(const Endpoint& e) const;
  int endpoint_index(const Endpoint& e) const;
  Endpoint endpoint_at(int index) const;

  // Link index space: [nic up | nic down | tor->spine | spine->tor].
  // Links of failed spines keep their ids but are not part of the edge set.
  std::uint32_t num_links() const {
    return static_cast<std::uint32_t>(2 * num_endpoints() + 2 * num_tors_ * num_spines_);
  }
  std::uint32_t num_spine_links() const {
    return static_cast<std::uint32_t>(2 * num_tors_ * num_spines_);
  }
  /// Offset of the first ToR<->spine link; spine links occupy
  /// [spine_link_base(), num_links()).
  std::uint32_t spine_link_base() const { return static_cast<std::uint32_t>(2 * num_endpoints()); }

  LinkId nic_up(const Endpoint& e) const;
  LinkId nic_down(const Endpoint& e) const;
  LinkId tor_up(int tor, int spine) const {
    return LinkId{spine_link_base() + static_cast<std::uint32_t>(tor * num_spines_ + spine)};
  }
  LinkId spine_down(int spine, int tor) const {
    return LinkId{spine_link_base() + static_cast<std::uint32_t>((num_tors_ + tor) * num_spines_ + spine)};
  }

  LinkKind link_kind(LinkId id) const;
  bool is_spine_link(LinkId id) const { return id.value >= spine_link_base(); }
  /// False for links attached to a failed spine.
  bool link_live(LinkId id) const;
  Node link_tail(LinkId id) const;
  Node link_head(LinkId id) const;
  std::string link_name(LinkId id) const;

  /// Route over `spine` between endpoints on distinct ToRs (no liveness check).
  Route spine_route(const Endpoint& src, const Endpoint& dst, int spine) const;

 private:
  int num_spines_;
  int num_tors_;
  int hosts_per_tor_;
  int nics_per_host_;
  double link_capacity_;
  std::vector<int> failed_;
  std::vector<int> live_;
  std::vector<char> spine_alive_;
};

ClosTopology build_topology(int num_spines, int num_tors, int hosts_per_tor, int nics_per_host,
                            double link_capacity_bps);

/// All shortest routes from src to dst. Distinct ToRs yield one route per live
/// spine in ascending spine order.
std::vector<Route> enumerate_routes(const ClosTopology& topo, const Endpoint& src,
                                    const Endpoint& dst);

/// Fails `k` additional spines chosen uniformly without replacement from the
/// currently live ones. Deterministic per seed.
ClosTopology fail_spines(const ClosTopology& topo, int k, std::uint64_t seed);

}  // namespace closroute
