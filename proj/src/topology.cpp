#include "closroute/topology.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "closroute/random.hpp"

namespace closroute {

std::string to_string(const Endpoint& e) {
  return "t" + std::to_string(e.tor) + ".h" + std::to_string(e.host) + ".n" + std::to_string(e.nic);
}

ClosTopology::ClosTopology(int num_spines, int num_tors, int hosts_per_tor, int nics_per_host,
                           double link_capacity_bps)
    : num_spines_(num_spines),
      num_tors_(num_tors),
      hosts_per_tor_(hosts_per_tor),
      nics_per_host_(nics_per_host),
      link_capacity_(link_capacity_bps) {
  if (num_spines < 1) throw std::invalid_argument("num_spines must be >= 1");
  if (num_tors < 2) throw std::invalid_argument("num_tors must be >= 2");
  if (hosts_per_tor < 1) throw std::invalid_argument("hosts_per_tor must be >= 1");
  if (nics_per_host < 1) throw std::invalid_argument("nics_per_host must be >= 1");
  if (!(link_capacity_bps > 0.0)) throw std::invalid_argument("link_capacity must be > 0");
  spine_alive_.assign(static_cast<std::size_t>(num_spines), 1);
  live_.resize(static_cast<std::size_t>(num_spines));
  std::iota(live_.begin(), live_.end(), 0);
}

ClosTopology ClosTopology::with_failed_spines(std::span<const int> spines) const {
  ClosTopology out = *this;
  for (int s : spines) {
    if (s < 0 || s >= num_spines_) {
      throw std::invalid_argument("failed spine index " + std::to_string(s) + " out of range");
    }
    out.spine_alive_[static_cast<std::size_t>(s)] = 0;
  }
  out.failed_.clear();
  out.live_.clear();
  for (int s = 0; s < num_spines_; ++s) {
    (out.spine_alive_[static_cast<std::size_t>(s)] ? out.live_ : out.failed_).push_back(s);
  }
  if (out.live_.empty()) throw std::invalid_argument("at least one spine must stay alive");
  return out;
}

bool ClosTopology::contains(const Endpoint& e) const {
  return e.tor >= 0 && e.tor < num_tors_ && e.host >= 0 && e.host < hosts_per_tor_ && e.nic >= 0 &&
         e.nic < nics_per_host_;
}

int ClosTopology::endpoint_index(const Endpoint& e) const {
  return (e.tor * hosts_per_tor_ + e.host) * nics_per_host_ + e.nic;
}

Endpoint ClosTopology::endpoint_at(int index) const {
  const int nic = index % nics_per_host_;
  const int host_global = index / nics_per_host_;
  return Endpoint{host_global / hosts_per_tor_, host_global % hosts_per_tor_, nic};
}

LinkId ClosTopology::nic_up(const Endpoint& e) const {
  return LinkId{static_cast<std::uint32_t>(endpoint_index(e))};
}

LinkId ClosTopology::nic_down(const Endpoint& e) const {
  return LinkId{static_cast<std::uint32_t>(num_endpoints() + endpoint_index(e))};
}

LinkKind ClosTopology::link_kind(LinkId id) const {
  const auto n = static_cast<std::uint32_t>(num_endpoints());
  const auto ts = static_cast<std::uint32_t>(num_tors_ * num_spines_);
  if (id.value < n) return LinkKind::NicUp;
  if (id.value < 2 * n) return LinkKind::NicDown;
  if (id.value < 2 * n + ts) return LinkKind::TorUp;
  return LinkKind::SpineDown;
}

bool ClosTopology::link_live(LinkId id) const {
  if (!is_spine_link(id)) return true;
  const auto offset = (id.value - spine_link_base()) % static_cast<std::uint32_t>(num_tors_ * num_spines_);
  return spine_live(static_cast<int>(offset % static_cast<std::uint32_t>(num_spines_)));
}

Node ClosTopology::link_tail(LinkId id) const {
  const int n = num_endpoints();
  const int ts = num_tors_ * num_spines_;
  const int v = static_cast<int>(id.value);
  switch (link_kind(id)) {
    case LinkKind::NicUp:
      return {NodeKind::Nic, v};
    case LinkKind::NicDown:
      return {NodeKind::Tor, endpoint_at(v - n).tor};
    case LinkKind::TorUp:
      return {NodeKind::Tor, (v - 2 * n) / num_spines_};
    case LinkKind::SpineDown:
      return {NodeKind::Spine, (v - 2 * n - ts) % num_spines_};
  }
  return {};
}

Node ClosTopology::link_head(LinkId id) const {
  const int n = num_endpoints();
  const int ts = num_tors_ * num_spines_;
  const int v = static_cast<int>(id.value);
  switch (link_kind(id)) {
    case LinkKind::NicUp:
      return {NodeKind::Tor, endpoint_at(v).tor};
    case LinkKind::NicDown:
      return {NodeKind::Nic, v - n};
    case LinkKind::TorUp:
      return {NodeKind::Spine, (v - 2 * n) % num_spines_};
    case LinkKind::SpineDown:
      return {NodeKind::Tor, (v - 2 * n - ts) / num_spines_};
  }
  return {};
}

std::string ClosTopology::link_name(LinkId id) const {
  auto name = [this](Node node) {
    switch (node.kind) {
      case NodeKind::Nic:
        return to_string(endpoint_at(node.index));
      case NodeKind::Tor:
        return "tor" + std::to_string(node.index);
      case NodeKind::Spine:
        return "spine" + std::to_string(node.index);
    }
    return std::string{};
  };
  return name(link_tail(id)) + "->" + name(link_head(id));
}

Route ClosTopology::spine_route(const Endpoint& src, const Endpoint& dst, int spine) const {
  return Route{RouteKind::Spine, spine,
               {nic_up(src), tor_up(src.tor, spine), spine_down(spine, dst.tor), nic_down(dst)}};
}

ClosTopology build_topology(int num_spines, int num_tors, int hosts_per_tor, int nics_per_host,
                            double link_capacity_bps) {
  return ClosTopology(num_spines, num_tors, hosts_per_tor, nics_per_host, link_capacity_bps);
}

std::vector<Route> enumerate_routes(const ClosTopology& topo, const Endpoint& src,
                                    const Endpoint& dst) {
  if (!topo.contains(src) || !topo.contains(dst)) {
    throw std::invalid_argument("endpoint outside topology: " + to_string(src) + " -> " + to_string(dst));
  }
  if (src == dst) throw std::invalid_argument("source and destination coincide: " + to_string(src));
  if (src.tor == dst.tor && src.host == dst.host) return {Route{RouteKind::IntraHost, -1, {}}};
  if (src.tor == dst.tor) return {Route{RouteKind::IntraTor, -1, {topo.nic_up(src), topo.nic_down(dst)}}};

  std::vector<Route> routes;
  routes.reserve(topo.live_spines().size());
  for (int s : topo.live_spines()) routes.push_back(topo.spine_route(src, dst, s));
  return routes;
}

ClosTopology fail_spines(const ClosTopology& topo, int k, std::uint64_t seed) {
  auto live = topo.live_spines();
  if (k < 0) throw std::invalid_argument("failure count must be >= 0");
  if (static_cast<std::size_t>(k) >= live.size()) {
    throw std::invalid_argument("cannot fail " + std::to_string(k) + " of " + std::to_string(live.size()) +
                                " live spines; at least one must survive");
  }
  if (k == 0) return topo;
  Rng rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + uniform_below(rng, live.size() - i);
    std::swap(live[i], live[j]);
  }
  std::vector<int> chosen(live.begin(), live.begin() + k);
  std::sort(chosen.begin(), chosen.end());
  return topo.with_failed_spines(chosen);
}

}  // namespace closroute
