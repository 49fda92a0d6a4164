#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "closroute/random.hpp"
#include "closroute/rates.hpp"
#include "closroute/routing.hpp"
#include "closroute/sim.hpp"
#include "oracles.hpp"

using namespace closroute;

namespace {

std::vector<FlowPath> as_paths(const std::vector<CommoditySpec>& cs, const PathChoice& choice) {
  std::vector<FlowPath> out;
  for (std::size_t i = 0; i < cs.size(); ++i) out.push_back({cs[i].id, &choice.routes[i]});
  return out;
}

}  // namespace

TEST_CASE("two-job example rates") {
  const auto topo = oracle::two_job_topology();
  const auto cs = oracle::two_job_commodities();

  const auto greedy = greedy_assign(cs, topo);
  const auto alloc = waterfill(as_paths(cs, greedy), topo);
  for (double r : alloc.rates) CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(min_bandwidth(alloc) == doctest::Approx(1.0).epsilon(1e-9));

  // t2's two flows sharing spine 0
  PathChoice shared;
  for (int s : {0, 0, 0, 1}) shared.routes.push_back(topo.spine_route(cs[shared.routes.size()].src,
                                                                      cs[shared.routes.size()].dst, s));
  const auto half = waterfill(as_paths(cs, shared), topo);
  CHECK(half.rate_of("t2-t1") == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(half.rate_of("t2-t3") == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(half.rate_of("t3-t1") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(min_bandwidth(half) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS(half.rate_of("nope"));
}

TEST_CASE("single flow gets the full link") {
  const auto topo = build_topology(2, 2, 1, 1, 100e9);
  const Route r = topo.spine_route({0, 0, 0}, {1, 0, 0}, 1);
  const std::vector<FlowPath> flows{{"a", &r}};
  CHECK(waterfill(flows, topo).rates[0] == 100e9);
}

TEST_CASE("hand-computed three-flow allocation") {
  // a and b share the source NIC; c shares a's destination NIC.
  // NIC of a/b: 1/2 each. c then takes the rest of its link: 1 - 1/2.
  const auto topo = build_topology(2, 3, 2, 1, 1.0);
  const Route a = topo.spine_route({0, 0, 0}, {1, 0, 0}, 0);
  const Route b = topo.spine_route({0, 0, 0}, {2, 0, 0}, 1);
  const Route c = topo.spine_route({2, 1, 0}, {1, 0, 0}, 1);
  const std::vector<FlowPath> flows{{"a", &a}, {"b", &b}, {"c", &c}};
  const auto alloc = waterfill(flows, topo);
  CHECK(alloc.rate_of("a") == doctest::Approx(0.5));
  CHECK(alloc.rate_of("b") == doctest::Approx(0.5));
  CHECK(alloc.rate_of("c") == doctest::Approx(0.5));

  const Route d = topo.spine_route({2, 1, 0}, {0, 1, 0}, 1);
  const std::vector<FlowPath> more{{"a", &a}, {"b", &b}, {"d", &d}};
  const auto alloc2 = waterfill(more, topo);
  CHECK(alloc2.rate_of("d") == doctest::Approx(1.0));
}

TEST_CASE("n flows on one link share it evenly") {
  const auto topo = build_topology(1, 2, 1, 1, 10.0);
  const Route r = topo.spine_route({0, 0, 0}, {1, 0, 0}, 0);
  for (int n = 1; n <= 9; ++n) {
    std::vector<FlowPath> flows;
    for (int i = 0; i < n; ++i) flows.push_back({"f" + std::to_string(i), &r});
    const auto alloc = waterfill(flows, topo);
    for (double x : alloc.rates) CHECK(x == doctest::Approx(10.0 / n).epsilon(1e-12));
  }
}

TEST_CASE("local routes") {
  const auto topo = build_topology(1, 2, 2, 2, 4.0);
  const Route host{RouteKind::IntraHost, -1, {}};
  const Route tor = *local_route(topo, {"t", "j", {0, 0, 0}, {0, 1, 0}, 1});
  const std::vector<FlowPath> flows{{"h", &host}, {"t", &tor}};
  const auto alloc = waterfill(flows, topo);
  CHECK(std::isinf(alloc.rate_of("h")));
  CHECK(alloc.rate_of("t") == 4.0);
  CHECK(min_bandwidth(alloc) == 4.0);

  const std::vector<FlowPath> only_host{{"h", &host}};
  CHECK_THROWS(min_bandwidth(waterfill(only_host, topo)));
  CHECK(waterfill({}, topo).rates.empty());
}

TEST_CASE("waterfill matches the naive oracle and is order independent") {
  const auto topo = build_topology(3, 6, 2, 2, 1.0);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto cs = random_inter_tor_commodities(topo, 5 + seed % 20, derive_seed(3, seed));
    const auto choice = ecmp_assign(cs, topo, seed);
    auto flows = as_paths(cs, choice);
    const auto alloc = waterfill(flows, topo);

    std::vector<std::vector<int>> paths;
    for (const auto& r : choice.routes) {
      std::vector<int> p;
      for (LinkId l : r.links) p.push_back(static_cast<int>(l.value));
      paths.push_back(p);
    }
    const std::vector<double> caps(topo.num_links(), 1.0);
    const auto naive = oracle::naive_max_min(paths, caps);
    for (std::size_t i = 0; i < cs.size(); ++i) CHECK(alloc.rates[i] == doctest::Approx(naive[i]).epsilon(1e-9));

    // feasibility
    std::vector<double> used(topo.num_links(), 0.0);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      for (LinkId l : choice.routes[i].links) used[l.value] += alloc.rates[i];
    }
    for (double u : used) CHECK(u <= 1.0 + 1e-9);

    // each flow is at least capacity / (flows on its busiest link)
    const auto load = build_load_map(choice, topo);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      std::uint32_t worst = 0;
      for (LinkId l : choice.routes[i].links) worst = std::max(worst, load.count(l));
      CHECK(alloc.rates[i] >= 1.0 / worst - 1e-12);
    }

    Rng rng(seed);
    std::shuffle(flows.begin(), flows.end(), rng);
    const auto shuffled = waterfill(flows, topo);
    for (std::size_t i = 0; i < flows.size(); ++i) CHECK(shuffled.rates[i] == alloc.rate_of(flows[i].id));
  }
}
