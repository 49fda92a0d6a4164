#include <doctest.h>

#include <set>

#include "closroute/topology.hpp"

using namespace closroute;

TEST_CASE("build_topology sizes") {
  const auto full = build_topology(32, 64, 4, 8, 100e9);
  CHECK(full.num_endpoints() == 2048);
  CHECK(full.live_spines().size() == 32);
  CHECK(full.failed_spines().empty());
  // 2 NIC links per endpoint + 2 directions per (ToR, spine)
  CHECK(full.num_links() == 2 * 2048 + 2 * 64 * 32);

  const auto fig = build_topology(2, 4, 2, 1, 1.0);
  CHECK(fig.num_endpoints() == 8);
  CHECK(fig.link_capacity() == 1.0);

  const auto minimal = build_topology(1, 2, 1, 1, 1.0);
  CHECK(minimal.num_endpoints() == 2);
  CHECK(minimal.live_spines() == std::vector<int>{0});
}

TEST_CASE("build_topology rejects degenerate sizes") {
  CHECK_THROWS(build_topology(0, 4, 1, 1, 1.0));
  CHECK_THROWS(build_topology(2, 1, 1, 1, 1.0));
  CHECK_THROWS(build_topology(2, 4, 0, 1, 1.0));
  CHECK_THROWS(build_topology(2, 4, 1, -1, 1.0));
  CHECK_THROWS(build_topology(2, 4, 1, 1, 0.0));
}

TEST_CASE("link ids map back to their endpoints") {
  const auto topo = build_topology(3, 4, 2, 2, 1.0);
  std::set<std::uint32_t> seen;
  for (int t = 0; t < 4; ++t) {
    for (int s = 0; s < 3; ++s) {
      const auto up = topo.tor_up(t, s);
      const auto down = topo.spine_down(s, t);
      CHECK(topo.link_kind(up) == LinkKind::TorUp);
      CHECK(topo.link_kind(down) == LinkKind::SpineDown);
      CHECK(topo.link_tail(up) == Node{NodeKind::Tor, t});
      CHECK(topo.link_head(up) == Node{NodeKind::Spine, s});
      CHECK(topo.link_tail(down) == Node{NodeKind::Spine, s});
      CHECK(topo.link_head(down) == Node{NodeKind::Tor, t});
      seen.insert(up.value);
      seen.insert(down.value);
    }
  }
  for (int i = 0; i < topo.num_endpoints(); ++i) {
    const auto e = topo.endpoint_at(i);
    CHECK(topo.endpoint_index(e) == i);
    CHECK(topo.link_tail(topo.nic_up(e)) == Node{NodeKind::Nic, i});
    CHECK(topo.link_head(topo.nic_up(e)) == Node{NodeKind::Tor, e.tor});
    seen.insert(topo.nic_up(e).value);
    seen.insert(topo.nic_down(e).value);
  }
  CHECK(seen.size() == topo.num_links());
}

TEST_CASE("enumerate_routes by locality") {
  const auto topo = build_topology(2, 4, 2, 1, 1.0);

  SUBCASE("different ToRs: one route per spine, ascending") {
    const auto routes = enumerate_routes(topo, {1, 0, 0}, {0, 1, 0});
    REQUIRE(routes.size() == 2);
    CHECK(routes[0].spine == 0);
    CHECK(routes[1].spine == 1);
    for (const auto& r : routes) {
      CHECK(r.kind == RouteKind::Spine);
      CHECK(r.links.size() == 4);
    }
  }
  SUBCASE("same ToR, different host") {
    const auto routes = enumerate_routes(topo, {0, 0, 0}, {0, 1, 0});
    REQUIRE(routes.size() == 1);
    CHECK(routes[0].kind == RouteKind::IntraTor);
    CHECK(routes[0].links == std::vector<LinkId>{topo.nic_up({0, 0, 0}), topo.nic_down({0, 1, 0})});
  }
  SUBCASE("same host") {
    const auto multi = build_topology(2, 4, 2, 4, 1.0);
    const auto routes = enumerate_routes(multi, {3, 1, 0}, {3, 1, 2});
    REQUIRE(routes.size() == 1);
    CHECK(routes[0].kind == RouteKind::IntraHost);
    CHECK(routes[0].links.empty());
  }
  SUBCASE("errors") {
    CHECK_THROWS(enumerate_routes(topo, {0, 0, 0}, {0, 0, 0}));
    CHECK_THROWS(enumerate_routes(topo, {0, 0, 0}, {9, 0, 0}));
  }
}

TEST_CASE("failed spines are skipped by enumeration") {
  const auto topo = build_topology(4, 3, 1, 1, 1.0);
  const std::vector<int> down{1, 3};
  const auto failed = topo.with_failed_spines(down);
  const auto routes = enumerate_routes(failed, {0, 0, 0}, {2, 0, 0});
  REQUIRE(routes.size() == 2);
  CHECK(routes[0].spine == 0);
  CHECK(routes[1].spine == 2);
  CHECK_FALSE(failed.link_live(failed.tor_up(0, 1)));
  CHECK(failed.link_live(failed.tor_up(0, 2)));
  const std::vector<int> rest{0, 2};
  CHECK_THROWS(failed.with_failed_spines(rest));
}

TEST_CASE("route links chain from source NIC to destination NIC") {
  const auto topo = build_topology(5, 6, 3, 2, 1.0);
  for (int a = 0; a < topo.num_endpoints(); a += 7) {
    for (int b = 0; b < topo.num_endpoints(); b += 5) {
      if (a == b) continue;
      const auto src = topo.endpoint_at(a);
      const auto dst = topo.endpoint_at(b);
      const auto routes = enumerate_routes(topo, src, dst);
      if (src.tor != dst.tor) {
        CHECK(routes.size() == static_cast<std::size_t>(topo.num_spines()));
        std::set<int> spines;
        for (const auto& r : routes) spines.insert(r.spine);
        CHECK(spines.size() == routes.size());
      }
      for (const auto& r : routes) {
        if (r.links.empty()) continue;
        CHECK(topo.link_tail(r.links.front()) == Node{NodeKind::Nic, a});
        CHECK(topo.link_head(r.links.back()) == Node{NodeKind::Nic, b});
        for (std::size_t k = 1; k < r.links.size(); ++k) {
          CHECK(topo.link_head(r.links[k - 1]) == topo.link_tail(r.links[k]));
        }
      }
    }
  }
}

TEST_CASE("fail_spines is seeded and bounded") {
  const auto topo = build_topology(32, 64, 4, 8, 100e9);
  const auto a = fail_spines(topo, 8, 7);
  const auto b = fail_spines(topo, 8, 7);
  CHECK(a.failed_spines().size() == 8);
  CHECK(a.failed_spines() == b.failed_spines());
  CHECK(a.live_spines().size() == 24);
  CHECK(enumerate_routes(a, {0, 0, 0}, {1, 0, 0}).size() == 24);

  CHECK(fail_spines(topo, 0, 99).failed_spines().empty());
  CHECK_THROWS(fail_spines(build_topology(2, 4, 2, 1, 1.0), 2, 1));
  CHECK_THROWS(fail_spines(topo, -1, 1));

  // stacking: already failed spines are never drawn again
  const auto more = fail_spines(a, 23, 3);
  CHECK(more.live_spines().size() == 1);
  CHECK_THROWS(fail_spines(a, 24, 3));

  int differing = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    if (fail_spines(topo, 8, seed).failed_spines() != a.failed_spines()) ++differing;
  }
  CHECK(differing >= 9);
}
