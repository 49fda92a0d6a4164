#include "closroute/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "closroute/random.hpp"

namespace closroute {

namespace {

constexpr int kLocal = -1;

void check_endpoints(const ClosTopology& topo, const CommoditySpec& c) {
  if (!topo.contains(c.src) || !topo.contains(c.dst)) {
    throw std::invalid_argument("commodity " + c.id + " has an endpoint outside the topology");
  }
  if (c.src == c.dst) throw std::invalid_argument("commodity " + c.id + " has identical endpoints");
}

bool crosses_spines(const CommoditySpec& c) { return c.src.tor != c.dst.tor; }

// Spine-link load index relative to ClosTopology::spine_link_base().
struct SpineIndex {
  std::size_t tors;
  std::size_t spines;

  std::size_t up(int tor, int spine) const { return static_cast<std::size_t>(tor) * spines + static_cast<std::size_t>(spine); }
  std::size_t down(int spine, int tor) const {
    return (tors + static_cast<std::size_t>(tor)) * spines + static_cast<std::size_t>(spine);
  }
};

SpineIndex spine_index(const ClosTopology& topo) {
  return {static_cast<std::size_t>(topo.num_tors()), static_cast<std::size_t>(topo.num_spines())};
}

PathChoice materialize(std::span<const CommoditySpec> commodities, std::span<const int> spines,
                       const ClosTopology& topo) {
  PathChoice out;
  out.routes.reserve(commodities.size());
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    const auto& c = commodities[i];
    if (auto local = local_route(topo, c)) {
      out.routes.push_back(std::move(*local));
    } else {
      out.routes.push_back(topo.spine_route(c.src, c.dst, spines[i]));
    }
  }
  return out;
}

template <typename Load, typename WeightFn>
void greedy_pass(std::span<const CommoditySpec> commodities, std::span<const std::size_t> order,
                 const ClosTopology& topo, std::span<Load> loads, WeightFn weight, std::span<int> spines) {
  const auto ix = spine_index(topo);
  const auto& live = topo.live_spines();
  for (std::size_t i : order) {
    const auto& c = commodities[i];
    if (!crosses_spines(c)) {
      spines[i] = kLocal;
      continue;
    }
    int best = live.front();
    Load best_load = std::max(loads[ix.up(c.src.tor, best)], loads[ix.down(best, c.dst.tor)]);
    for (std::size_t k = 1; k < live.size(); ++k) {
      const int s = live[k];
      const Load l = std::max(loads[ix.up(c.src.tor, s)], loads[ix.down(s, c.dst.tor)]);
      if (l < best_load) {
        best_load = l;
        best = s;
      }
    }
    const Load w = weight(i);
    loads[ix.up(c.src.tor, best)] += w;
    loads[ix.down(best, c.dst.tor)] += w;
    spines[i] = best;
  }
}

void validate_all(std::span<const CommoditySpec> commodities, const ClosTopology& topo) {
  for (const auto& c : commodities) check_endpoints(topo, c);
}

// Union-find over ToR roles: [0, T) as source, [T, 2T) as destination.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::optional<Scheme> parse_scheme(std::string_view name) {
  if (name == "greedy") return Scheme::Greedy;
  if (name == "ecmp") return Scheme::Ecmp;
  if (name == "edge_coloring") return Scheme::EdgeColoring;
  if (name == "annealing") return Scheme::Annealing;
  if (name == "exact") return Scheme::Exact;
  return std::nullopt;
}

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::Greedy:
      return "greedy";
    case Scheme::Ecmp:
      return "ecmp";
    case Scheme::EdgeColoring:
      return "edge_coloring";
    case Scheme::Annealing:
      return "annealing";
    case Scheme::Exact:
      return "exact";
  }
  return "unknown";
}

LoadMap build_load_map(const PathChoice& choice, const ClosTopology& topo) {
  LoadMap map(topo);
  for (const auto& r : choice.routes) map.add(r);
  return map;
}

std::uint32_t max_link_load(const PathChoice& choice, const ClosTopology& topo, LoadScope scope) {
  const auto map = build_load_map(choice, topo);
  const auto counts = map.counts();
  const auto first = scope == LoadScope::SpineLinksOnly ? counts.begin() + topo.spine_link_base() : counts.begin();
  if (first == counts.end()) return 0;
  return *std::max_element(first, counts.end());
}

std::optional<Route> local_route(const ClosTopology& topo, const CommoditySpec& c) {
  check_endpoints(topo, c);
  if (c.src.tor != c.dst.tor) return std::nullopt;
  if (c.src.host == c.dst.host) return Route{RouteKind::IntraHost, -1, {}};
  return Route{RouteKind::IntraTor, -1, {topo.nic_up(c.src), topo.nic_down(c.dst)}};
}

PathChoice greedy_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo) {
  validate_all(commodities, topo);
  std::vector<std::uint32_t> loads(topo.num_spine_links(), 0);
  std::vector<int> spines(commodities.size(), kLocal);
  std::vector<std::size_t> order(commodities.size());
  std::iota(order.begin(), order.end(), 0);
  greedy_pass<std::uint32_t>(commodities, order, topo, loads, [](std::size_t) { return 1u; }, spines);
  return materialize(commodities, spines, topo);
}

PathChoice greedy_assign_weighted(std::span<const CommoditySpec> commodities, std::span<const double> weights,
                                  const ClosTopology& topo) {
  if (weights.size() != commodities.size()) throw std::invalid_argument("one weight per commodity required");
  validate_all(commodities, topo);
  std::vector<double> loads(topo.num_spine_links(), 0.0);
  std::vector<int> spines(commodities.size(), kLocal);
  std::vector<std::size_t> order(commodities.size());
  std::iota(order.begin(), order.end(), 0);
  greedy_pass<double>(commodities, order, topo, loads, [&](std::size_t i) { return weights[i]; }, spines);
  return materialize(commodities, spines, topo);
}

std::vector<std::vector<std::size_t>> decompose_components(std::span<const CommoditySpec> commodities) {
  int max_tor = 0;
  for (const auto& c : commodities) max_tor = std::max({max_tor, c.src.tor, c.dst.tor});
  const auto tors = static_cast<std::size_t>(max_tor) + 1;
  DisjointSets sets(2 * tors);
  for (const auto& c : commodities) {
    if (crosses_spines(c)) sets.unite(static_cast<std::size_t>(c.src.tor), tors + static_cast<std::size_t>(c.dst.tor));
  }

  std::vector<std::vector<std::size_t>> parts;
  std::vector<std::size_t> part_of_root(2 * tors, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    const auto& c = commodities[i];
    if (!crosses_spines(c)) {
      parts.push_back({i});
      continue;
    }
    const auto root = sets.find(static_cast<std::size_t>(c.src.tor));
    auto& slot = part_of_root[root];
    if (slot == static_cast<std::size_t>(-1)) {
      slot = parts.size();
      parts.emplace_back();
    }
    parts[slot].push_back(i);
  }
  return parts;
}

PathChoice greedy_assign_parallel(std::span<const CommoditySpec> commodities, const ClosTopology& topo) {
  validate_all(commodities, topo);
  const auto parts = decompose_components(commodities);
  // Components touch disjoint ToR<->spine links, so they share one load array
  // without synchronisation.
  std::vector<std::uint32_t> loads(topo.num_spine_links(), 0);
  std::vector<int> spines(commodities.size(), kLocal);
  const auto n = static_cast<std::ptrdiff_t>(parts.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    greedy_pass<std::uint32_t>(commodities, parts[static_cast<std::size_t>(p)], topo, std::span(loads),
                               [](std::size_t) { return 1u; }, std::span(spines));
  }
  return materialize(commodities, spines, topo);
}

int ecmp_spine(std::string_view commodity_id, const ClosTopology& topo, std::uint64_t seed) {
  const auto& live = topo.live_spines();
  const std::uint64_t h = mix64(fnv1a(commodity_id) ^ mix64(seed));
  return live[h % live.size()];
}

PathChoice ecmp_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo, std::uint64_t seed) {
  validate_all(commodities, topo);
  std::vector<int> spines(commodities.size(), kLocal);
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    if (crosses_spines(commodities[i])) spines[i] = ecmp_spine(commodities[i].id, topo, seed);
  }
  return materialize(commodities, spines, topo);
}

std::uint32_t max_tor_degree(std::span<const CommoditySpec> commodities) {
  std::vector<std::uint32_t> out_deg;
  std::vector<std::uint32_t> in_deg;
  std::uint32_t best = 0;
  for (const auto& c : commodities) {
    if (!crosses_spines(c)) continue;
    const auto need = static_cast<std::size_t>(std::max(c.src.tor, c.dst.tor)) + 1;
    if (out_deg.size() < need) {
      out_deg.resize(need, 0);
      in_deg.resize(need, 0);
    }
    best = std::max({best, ++out_deg[static_cast<std::size_t>(c.src.tor)], ++in_deg[static_cast<std::size_t>(c.dst.tor)]});
  }
  return best;
}

PathChoice edge_color_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo) {
  validate_all(commodities, topo);
  const auto delta = static_cast<std::size_t>(max_tor_degree(commodities));
  const auto tors = static_cast<std::size_t>(topo.num_tors());
  constexpr std::ptrdiff_t kNone = -1;

  // at[node * delta + colour] = edge using that colour at node; node is a
  // source ToR in [0, T) or a destination ToR in [T, 2T).
  std::vector<std::ptrdiff_t> at(2 * tors * delta, kNone);
  std::vector<std::size_t> colour(commodities.size(), 0);
  auto left = [&](std::size_t e) { return static_cast<std::size_t>(commodities[e].src.tor); };
  auto right = [&](std::size_t e) { return tors + static_cast<std::size_t>(commodities[e].dst.tor); };
  auto slot = [&](std::size_t node, std::size_t c) -> std::ptrdiff_t& { return at[node * delta + c]; };
  auto first_free = [&](std::size_t node) {
    for (std::size_t c = 0; c < delta; ++c) {
      if (slot(node, c) == kNone) return c;
    }
    throw std::logic_error("edge colouring ran out of colours");
  };

  std::vector<std::size_t> path;
  for (std::size_t e = 0; e < commodities.size(); ++e) {
    if (!crosses_spines(commodities[e])) continue;
    const auto u = left(e);
    const auto v = right(e);
    const auto a = first_free(u);
    if (slot(v, a) != kNone) {
      const auto b = first_free(v);
      if (slot(u, b) == kNone) {
        colour[e] = b;
        slot(u, b) = slot(v, b) = static_cast<std::ptrdiff_t>(e);
        continue;
      }
      // Swap a/b along the alternating path leaving v on colour a. In a
      // bipartite graph this path cannot reach u, so a becomes free at both.
      path.clear();
      std::size_t node = v;
      std::size_t want = a;
      while (slot(node, want) != kNone) {
        const auto edge = static_cast<std::size_t>(slot(node, want));
        path.push_back(edge);
        node = (left(edge) == node) ? right(edge) : left(edge);
        want = (want == a) ? b : a;
      }
      for (auto edge : path) slot(left(edge), colour[edge]) = slot(right(edge), colour[edge]) = kNone;
      for (auto edge : path) {
        colour[edge] = (colour[edge] == a) ? b : a;
        slot(left(edge), colour[edge]) = slot(right(edge), colour[edge]) = static_cast<std::ptrdiff_t>(edge);
      }
    }
    colour[e] = a;
    slot(u, a) = slot(v, a) = static_cast<std::ptrdiff_t>(e);
  }

  const auto& live = topo.live_spines();
  std::vector<int> spines(commodities.size(), kLocal);
  for (std::size_t e = 0; e < commodities.size(); ++e) {
    if (crosses_spines(commodities[e])) spines[e] = live[colour[e] % live.size()];
  }
  return materialize(commodities, spines, topo);
}

namespace {

// Max load and sum of squared loads over ToR<->spine links, compared
// lexicographically.
struct Energy {
  std::uint32_t max = 0;
  std::uint64_t sum_sq = 0;

  auto operator<=>(const Energy&) const = default;
};

class SpineLoadTracker {
 public:
  SpineLoadTracker(std::size_t links, std::size_t max_load) : loads_(links, 0), histogram_(max_load + 2, 0) {
    histogram_[0] = links;
  }

  void add(std::size_t link) {
    auto& l = loads_[link];
    --histogram_[l];
    sum_sq_ += 2 * static_cast<std::uint64_t>(l) + 1;
    ++l;
    ++histogram_[l];
    max_ = std::max(max_, l);
  }
  void remove(std::size_t link) {
    auto& l = loads_[link];
    --histogram_[l];
    sum_sq_ -= 2 * static_cast<std::uint64_t>(l) - 1;
    --l;
    ++histogram_[l];
    while (max_ > 0 && histogram_[max_] == 0) --max_;
  }
  Energy energy() const { return {max_, sum_sq_}; }

 private:
  std::vector<std::uint32_t> loads_;
  std::vector<std::size_t> histogram_;
  std::uint32_t max_ = 0;
  std::uint64_t sum_sq_ = 0;
};

}  // namespace

PathChoice anneal_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                         const AnnealSchedule& schedule, std::uint64_t seed) {
  if (!(schedule.initial_temp > 0.0)) throw std::invalid_argument("initial temperature must be > 0");
  if (!(schedule.cooling_factor > 0.0 && schedule.cooling_factor < 1.0)) {
    throw std::invalid_argument("cooling factor must lie in (0, 1)");
  }
  auto start = ecmp_assign(commodities, topo, seed);

  std::vector<std::size_t> movable;
  std::vector<int> spines(commodities.size(), kLocal);
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    if (start.routes[i].kind == RouteKind::Spine) {
      movable.push_back(i);
      spines[i] = start.routes[i].spine;
    }
  }
  const auto& live = topo.live_spines();
  const std::size_t moves = schedule.moves.value_or(100 * commodities.size());
  if (movable.empty() || live.size() < 2 || moves == 0) return start;

  const auto ix = spine_index(topo);
  SpineLoadTracker tracker(topo.num_spine_links(), movable.size());
  for (auto i : movable) {
    tracker.add(ix.up(commodities[i].src.tor, spines[i]));
    tracker.add(ix.down(spines[i], commodities[i].dst.tor));
  }

  // Per-spine position inside `live`, to draw a different live spine in O(1).
  std::vector<std::size_t> live_pos(static_cast<std::size_t>(topo.num_spines()), 0);
  for (std::size_t k = 0; k < live.size(); ++k) live_pos[static_cast<std::size_t>(live[k])] = k;

  Rng rng(derive_seed(seed, 0xa11ea1));
  Energy current = tracker.energy();
  Energy best = current;
  std::vector<int> best_spines = spines;
  double temperature = schedule.initial_temp;

  for (std::size_t m = 0; m < moves; ++m) {
    const auto i = movable[uniform_below(rng, movable.size())];
    const auto& c = commodities[i];
    const int from = spines[i];
    auto pick = uniform_below(rng, live.size() - 1);
    if (pick >= live_pos[static_cast<std::size_t>(from)]) ++pick;
    const int to = live[pick];

    tracker.remove(ix.up(c.src.tor, from));
    tracker.remove(ix.down(from, c.dst.tor));
    tracker.add(ix.up(c.src.tor, to));
    tracker.add(ix.down(to, c.dst.tor));
    const Energy proposed = tracker.energy();

    bool accept = proposed < current;
    if (!accept) {
      // Uphill step size: growth of the max load if any, otherwise growth of
      // the squared-load sum.
      const double delta = proposed.max > current.max
                               ? static_cast<double>(proposed.max - current.max)
                               : static_cast<double>(proposed.sum_sq - current.sum_sq);
      accept = uniform_unit(rng) < std::exp(-delta / temperature);
    }
    if (accept) {
      spines[i] = to;
      current = proposed;
      if (current < best) {
        best = current;
        best_spines = spines;
      }
    } else {
      tracker.remove(ix.up(c.src.tor, to));
      tracker.remove(ix.down(to, c.dst.tor));
      tracker.add(ix.up(c.src.tor, from));
      tracker.add(ix.down(from, c.dst.tor));
    }
    temperature *= schedule.cooling_factor;
  }
  return materialize(commodities, best_spines, topo);
}

namespace {

class BranchAndBound {
 public:
  BranchAndBound(std::span<const CommoditySpec> commodities, std::vector<std::size_t> vars, const ClosTopology& topo,
                 std::uint32_t lower_bound, std::uint32_t upper_bound)
      : commodities_(commodities),
        vars_(std::move(vars)),
        live_(topo.live_spines()),
        ix_(spine_index(topo)),
        loads_(topo.num_spine_links(), 0),
        current_(vars_.size(), 0),
        lower_bound_(lower_bound),
        bound_(upper_bound + 1) {}

  // Returns the chosen live-spine position for every variable.
  std::vector<std::size_t> solve() {
    descend(0, 0);
    return best_;
  }

 private:
  bool done() const { return found_ && bound_ <= lower_bound_; }

  void descend(std::size_t depth, std::uint32_t cur_max) {
    if (depth == vars_.size()) {
      best_ = current_;
      bound_ = std::max(cur_max, lower_bound_);
      found_ = true;
      return;
    }
    const auto& c = commodities_[vars_[depth]];
    for (std::size_t k = 0; k < live_.size() && !done(); ++k) {
      const int s = live_[k];
      auto& up = loads_[ix_.up(c.src.tor, s)];
      auto& down = loads_[ix_.down(s, c.dst.tor)];
      const std::uint32_t next = std::max({cur_max, up + 1, down + 1});
      if (next >= bound_) continue;
      ++up;
      ++down;
      current_[depth] = k;
      descend(depth + 1, next);
      --up;
      --down;
    }
  }

  std::span<const CommoditySpec> commodities_;
  std::vector<std::size_t> vars_;
  const std::vector<int>& live_;
  SpineIndex ix_;
  std::vector<std::uint32_t> loads_;
  std::vector<std::size_t> current_;
  std::vector<std::size_t> best_;
  std::uint32_t lower_bound_;
  std::uint32_t bound_;
  bool found_ = false;
};

}  // namespace

PathChoice exact_assign(std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                        const ExactLimits& limits) {
  validate_all(commodities, topo);
  std::vector<std::size_t> vars;
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    if (crosses_spines(commodities[i])) vars.push_back(i);
  }
  if (vars.size() > limits.max_commodities) {
    throw std::runtime_error("exact assignment limited to " + std::to_string(limits.max_commodities) +
                             " inter-ToR commodities, got " + std::to_string(vars.size()));
  }
  std::vector<int> spines(commodities.size(), kLocal);
  if (!vars.empty()) {
    const auto live = static_cast<std::uint32_t>(topo.live_spines().size());
    const std::uint32_t lower = (max_tor_degree(commodities) + live - 1) / live;
    // Greedy's value is always attainable, so it seeds the incumbent bound.
    const std::uint32_t upper = max_link_load(greedy_assign(commodities, topo), topo, LoadScope::SpineLinksOnly);
    BranchAndBound search(commodities, vars, topo, lower, upper);
    const auto positions = search.solve();
    for (std::size_t v = 0; v < vars.size(); ++v) spines[vars[v]] = topo.live_spines()[positions[v]];
  }
  return materialize(commodities, spines, topo);
}

PathChoice assign_paths(Scheme scheme, std::span<const CommoditySpec> commodities, const ClosTopology& topo,
                        const SchemeOptions& options) {
  switch (scheme) {
    case Scheme::Greedy:
      if (!options.weights.empty()) return greedy_assign_weighted(commodities, options.weights, topo);
      return options.parallel_greedy ? greedy_assign_parallel(commodities, topo) : greedy_assign(commodities, topo);
    case Scheme::Ecmp:
      return ecmp_assign(commodities, topo, options.seed);
    case Scheme::EdgeColoring:
      return edge_color_assign(commodities, topo);
    case Scheme::Annealing:
      return anneal_assign(commodities, topo, options.anneal, options.seed);
    case Scheme::Exact:
      return exact_assign(commodities, topo, options.exact);
  }
  throw std::invalid_argument("unknown scheme");
}

}  // namespace closroute
