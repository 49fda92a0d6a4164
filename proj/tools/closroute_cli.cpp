// closroute: run, validate, bench and failsweep experiments from the shell.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "closroute/experiments.hpp"

namespace {

using namespace closroute;

std::optional<std::vector<Scheme>> parse_schemes(const std::vector<std::string>& names, int& status) {
  if (names.empty()) return std::nullopt;
  std::vector<Scheme> out;
  for (const auto& n : names) {
    auto s = parse_scheme(n);
    if (!s) {
      std::cerr << "error: config error at '--schemes': unknown scheme '" << n << "'\n";
      status = kExitConfig;
      return std::nullopt;
    }
    out.push_back(*s);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path assignment and flow-level simulation for ML training traffic on 2-layer Clos fabrics"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::vector<std::string> scheme_names;
  std::vector<std::uint64_t> seeds;
  bool trace = false;

  auto* run = app.add_subcommand("run", "simulate every (scheme, seed) pair of a scenario");
  run->add_option("--config", config, "scenario config (JSON)")->required();
  run->add_option("--out", out, "result CSV path")->required();
  run->add_option("--schemes", scheme_names, "override the config's scheme list")->delimiter(',');
  run->add_option("--seed", seeds, "override the config's seeds")->delimiter(',');
  run->add_flag("--trace", trace, "also write a per-flow trace CSV");

  std::size_t instances = 1000;
  std::uint64_t validate_seed = 1;
  ValidateLimits limits;
  std::string validate_out;
  auto* validate = app.add_subcommand("validate", "check greedy against the exact optimum on random instances");
  validate->add_option("--instances", instances, "number of random instances");
  validate->add_option("--seed", validate_seed, "base seed");
  validate->add_option("--max-tors", limits.max_tors, "largest ToR count");
  validate->add_option("--max-spines", limits.max_spines, "largest live spine count");
  validate->add_option("--max-commodities", limits.max_commodities, "largest inter-ToR commodity count");
  validate->add_option("--failed-spines", limits.failed_spines, "spines failed in every instance");
  validate->add_option("--out", validate_out, "per-instance CSV path");

  std::vector<std::size_t> bench_counts{100, 500, 1000, 1500};
  std::uint64_t bench_seed = 1;
  TopologyConfig bench_topo;
  auto* bench = app.add_subcommand("bench", "time routing schemes on random commodity sets");
  bench->add_option("--counts", bench_counts, "commodity counts")->delimiter(',');
  bench->add_option("--schemes", scheme_names, "schemes to time")->delimiter(',');
  bench->add_option("--out", out, "result CSV path")->required();
  bench->add_option("--seed", bench_seed, "seed for commodity generation");
  bench->add_option("--spines", bench_topo.num_spines, "spine count");
  bench->add_option("--tors", bench_topo.num_tors, "ToR count");

  std::vector<int> fail_counts{1, 4, 8};
  auto* failsweep = app.add_subcommand("failsweep", "rerun a scenario with k spine failures injected mid-run");
  failsweep->add_option("--config", config, "scenario config (JSON)")->required();
  failsweep->add_option("--out", out, "result CSV path")->required();
  failsweep->add_option("--counts", fail_counts, "failure counts")->delimiter(',');
  failsweep->add_option("--schemes", scheme_names, "override the config's scheme list")->delimiter(',');
  failsweep->add_option("--seed", seeds, "override the config's seeds")->delimiter(',');
  failsweep->add_flag("--trace", trace, "also write a per-flow trace CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  int status = kExitOk;
  const auto schemes = parse_schemes(scheme_names, status);
  if (status != kExitOk) return status;

  RunOptions options;
  options.trace = trace;
  options.schemes = schemes;
  if (!seeds.empty()) options.seeds = seeds;

  if (*run) return cmd_run(config, out, options, std::cerr);
  if (*validate) {
    std::optional<std::filesystem::path> path;
    if (!validate_out.empty()) path = validate_out;
    return cmd_validate(instances, validate_seed, limits, path, std::cout);
  }
  if (*bench) {
    const std::vector<Scheme> list = schemes.value_or(std::vector<Scheme>{Scheme::Greedy, Scheme::Annealing, Scheme::EdgeColoring});
    return cmd_bench(bench_counts, list, out, bench_seed, bench_topo, std::cerr);
  }
  if (*failsweep) return cmd_failsweep(config, fail_counts, out, options, std::cerr);
  return kExitConfig;
}
