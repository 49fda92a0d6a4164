#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "closroute/workload.hpp"

using namespace closroute;

namespace {

ModelConfig model_named(const std::string& name) {
  for (const auto& m : default_model_catalogue()) {
    if (m.name == name) return m;
  }
  FAIL("missing model " << name);
  return {};
}

Job placed_job(const ClosTopology& topo, const ModelConfig& model, int dp, std::uint64_t seed) {
  Occupancy occ(topo);
  Job job{"j", model, dp, 0.0, 1, {}};
  job.placement = place_job(topo, model, dp, occ, seed);
  return job;
}

}  // namespace

TEST_CASE("catalogue widths") {
  const auto bloom = model_named("bloom");
  CHECK(bloom.num_params == 176e9);
  CHECK(bloom.tp == 4);
  CHECK(bloom.pp == 12);
  CHECK(model_named("gpt3").full_copy_gpus() == 64);
  CHECK(model_named("llama2_70b").full_copy_gpus() == 128);
}

TEST_CASE("place_job fills free GPUs without overlap") {
  const auto topo = build_topology(32, 64, 4, 8, 100e9);
  const auto bloom = model_named("bloom");
  Occupancy occ(topo);
  const auto a = place_job(topo, bloom, 8, occ, 11);
  CHECK(a.size() == 384);
  CHECK(std::set<Endpoint>(a.begin(), a.end()).size() == 384);
  CHECK(a == place_job(topo, bloom, 8, occ, 11));
  CHECK(a != place_job(topo, bloom, 8, occ, 12));

  // contiguous per host: every host is either fully used or is the last one touched
  std::map<std::pair<int, int>, int> per_host;
  for (const auto& e : a) ++per_host[{e.tor, e.host}];
  int partial = 0;
  for (const auto& [host, n] : per_host) partial += n != 8;
  CHECK(partial == 0);

  occ.claim(a);
  CHECK(occ.free_count() == 2048 - 384);
  const auto b = place_job(topo, bloom, 4, occ, 11);
  for (const auto& e : b) CHECK_FALSE(occ.used(e));
  CHECK_THROWS(occ.claim(a));
  occ.release(a);
  CHECK(occ.free_count() == 2048);
}

TEST_CASE("place_job refuses oversized jobs") {
  const auto topo = build_topology(2, 4, 2, 8, 1.0);  // 64 GPUs
  Occupancy occ(topo);
  CHECK_THROWS(place_job(topo, model_named("bloom"), 2, occ, 1));
  CHECK(place_job(topo, model_named("gpt3"), 1, occ, 1).size() == 64);
  CHECK_THROWS(place_job(topo, model_named("gpt3"), 0, occ, 1));
}

TEST_CASE("bloom rings and ring commodities") {
  const auto topo = build_topology(32, 64, 4, 8, 100e9);
  const auto job = placed_job(topo, model_named("bloom"), 8, 3);
  const auto rings = build_rings(job);
  REQUIRE(rings.size() == 48);
  // 176e9 * 4 bytes / 48 shards, rounded up
  CHECK(rings[0].shard_bytes == 14666666667ULL);
  for (const auto& r : rings) CHECK(r.members.size() == 8);
  CHECK(rings[5].members[2] == job.placement[2 * 48 + 1 * 4 + 1]);

  const auto cs = ring_allreduce_commodities(rings[0], 0);
  REQUIRE(cs.size() == 8);
  // 2 * 7 / 8 of the shard, rounded up
  CHECK(cs[0].volume == (14ULL * 14666666667ULL + 7) / 8);
  const double gbit = static_cast<double>(cs[0].volume) * 8 / 1e9;
  CHECK(gbit == doctest::Approx(205.33).epsilon(1e-3));
  CHECK(cs[7].dst == rings[0].members[0]);
  CHECK(cs[3].id == "j/r0.0/it0/e3");

  Job bad = job;
  bad.placement.pop_back();
  CHECK_THROWS(build_rings(bad));
}

TEST_CASE("ring volume for small rings") {
  Ring r{"x", 0, 0, {{0, 0, 0}, {1, 0, 0}}, 6'000'000'000ULL};
  CHECK(ring_allreduce_commodities(r, 0)[0].volume == 6'000'000'000ULL);
  r.members.push_back({2, 0, 0});
  r.members.push_back({3, 0, 0});
  CHECK(ring_allreduce_commodities(r, 0)[0].volume == 9'000'000'000ULL);
  r.members.resize(1);
  CHECK_THROWS(ring_allreduce_commodities(r, 0));
}

TEST_CASE("ring volume property: total sent across the ring is 2(N-1) shards") {
  for (std::uint64_t n = 2; n <= 64; ++n) {
    for (std::uint64_t shard : {1ULL, 7ULL, 1000ULL, 14666666667ULL}) {
      Ring r{"p", 0, 0, {}, shard};
      for (std::uint64_t k = 0; k < n; ++k) r.members.push_back({static_cast<int>(k), 0, 0});
      const auto cs = ring_allreduce_commodities(r, 0);
      CHECK(cs.size() == n);
      const auto v = cs[0].volume;
      CHECK(v * n >= 2 * (n - 1) * shard);
      CHECK(v * n < 2 * (n - 1) * shard + n);
      CHECK(v <= 2 * shard);
    }
  }
}

TEST_CASE("llama rings") {
  const auto topo = build_topology(32, 64, 4, 8, 100e9);
  const auto job = placed_job(topo, model_named("llama2_70b"), 4, 9);
  const auto rings = build_rings(job);
  CHECK(rings.size() == 128);
  CHECK(rings[0].shard_bytes == (70'000'000'000ULL * 4 + 127) / 128);
}

TEST_CASE("compute phase duration") {
  Job job{"j", model_named("bloom"), 8, 0.0, 1, {}};
  HardwareProfile hw;
  const double expected = 6.0 * 176e9 * 2e6 / (384 * 312e12 * 0.3);
  CHECK(compute_phase_duration(job, hw) == doctest::Approx(expected).epsilon(1e-12));
  Job half = job;
  half.dp = 4;
  CHECK(compute_phase_duration(half, hw) == doctest::Approx(2 * expected).epsilon(1e-12));
  hw.utilization = 0;
  CHECK_THROWS(compute_phase_duration(job, hw));
}

TEST_CASE("arrival schedule") {
  const auto a = arrival_schedule(50, 10.0, 5);
  CHECK(a.size() == 50);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(a.front() >= 0.0);
  CHECK(a.back() < 10.0);
  CHECK(a == arrival_schedule(50, 10.0, 5));
  CHECK(a != arrival_schedule(50, 10.0, 6));
  CHECK(arrival_schedule(0, 1.0, 1).empty());
  CHECK_THROWS(arrival_schedule(3, 0.0, 1));
}
