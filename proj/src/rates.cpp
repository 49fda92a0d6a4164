#include "closroute/rates.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace closroute {

double RateAllocation::rate_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return rates[i];
  }
  throw std::out_of_range("no rate for flow " + id);
}

RateAllocation waterfill(std::span<const FlowPath> flows, const ClosTopology& topo) {
  RateAllocation out;
  out.ids.reserve(flows.size());
  for (const auto& f : flows) out.ids.push_back(f.id);
  out.rates.assign(flows.size(), kUnboundedRate);
  if (flows.empty()) return out;

  // Canonical processing order makes the floating-point arithmetic, and so
  // the result, independent of the caller's ordering.
  std::vector<std::size_t> order(flows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (flows[a].id != flows[b].id) return flows[a].id < flows[b].id;
    return flows[a].route->links < flows[b].route->links;
  });

  struct LinkState {
    double residual = 0.0;
    std::size_t unfrozen = 0;
    std::uint32_t version = 0;
    std::vector<std::size_t> flows;
  };
  std::vector<std::int32_t> local(topo.num_links(), -1);
  std::vector<LinkState> links;
  for (auto i : order) {
    for (LinkId l : flows[i].route->links) {
      auto& slot = local[l.value];
      if (slot < 0) {
        slot = static_cast<std::int32_t>(links.size());
        links.push_back({topo.link_capacity(), 0, 0, {}});
      }
      auto& st = links[static_cast<std::size_t>(slot)];
      st.flows.push_back(i);
      ++st.unfrozen;
    }
  }

  struct Entry {
    double share;
    std::size_t link;
    std::uint32_t version;
    bool operator>(const Entry& o) const { return share != o.share ? share > o.share : link > o.link; }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  auto share_of = [](const LinkState& st) { return std::max(st.residual, 0.0) / static_cast<double>(st.unfrozen); };
  for (std::size_t k = 0; k < links.size(); ++k) heap.push({share_of(links[k]), k, 0});

  std::vector<char> frozen(flows.size(), 0);
  std::vector<std::size_t> pushed_in_round(links.size(), 0);
  std::size_t round = 0;
  while (!heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    auto& sat = links[top.link];
    if (top.version != sat.version || sat.unfrozen == 0) continue;
    const double share = top.share;
    for (auto f : sat.flows) {
      if (frozen[f]) continue;
      frozen[f] = 1;
      out.rates[f] = share;
      for (LinkId l : flows[f].route->links) {
        auto& st = links[static_cast<std::size_t>(local[l.value])];
        st.residual -= share;
        --st.unfrozen;
        ++st.version;
      }
    }
    sat.residual = 0.0;
    ++round;
    for (auto f : sat.flows) {
      for (LinkId l : flows[f].route->links) {
        const auto k = static_cast<std::size_t>(local[l.value]);
        auto& st = links[k];
        if (st.unfrozen > 0 && pushed_in_round[k] != round) {
          pushed_in_round[k] = round;
          heap.push({share_of(st), k, st.version});
        }
      }
    }
  }
  return out;
}

double min_bandwidth(const RateAllocation& alloc) {
  double best = kUnboundedRate;
  for (double r : alloc.rates) best = std::min(best, r);
  if (best == kUnboundedRate) throw std::invalid_argument("allocation has no finite rate");
  return best;
}

}  // namespace closroute
