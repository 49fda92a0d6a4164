#include "closroute/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "closroute/random.hpp"
#include "closroute/rates.hpp"

namespace closroute {

namespace {

constexpr double kRelTol = 1e-9;
constexpr double kConservationTol = 1e-6;

// Writes to a sibling temp file and renames on commit; an uncommitted file is
// removed on destruction.
class AtomicOutput {
 public:
  explicit AtomicOutput(std::filesystem::path path) : final_(std::move(path)), temp_(final_) {
    temp_ += ".partial";
    if (final_.has_parent_path()) std::filesystem::create_directories(final_.parent_path());
    stream_.open(temp_, std::ios::binary | std::ios::trunc);
    if (!stream_) throw std::runtime_error("cannot write " + temp_.string());
  }
  AtomicOutput(const AtomicOutput&) = delete;
  AtomicOutput& operator=(const AtomicOutput&) = delete;
  ~AtomicOutput() {
    if (!committed_) {
      stream_.close();
      std::error_code ec;
      std::filesystem::remove(temp_, ec);
    }
  }

  std::ostream& stream() { return stream_; }
  void commit() {
    stream_.close();
    if (!stream_) throw std::runtime_error("failed writing " + temp_.string());
    std::filesystem::rename(temp_, final_);
    committed_ = true;
  }

 private:
  std::filesystem::path final_;
  std::filesystem::path temp_;
  std::ofstream stream_;
  bool committed_ = false;
};

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  auto p = out;
  p += suffix;
  return p;
}

void check_snapshot(const SimSnapshot& snap, InvariantReport& report) {
  ++report.snapshots;
  std::map<std::uint32_t, double> usage;
  for (const auto& f : snap.flows) {
    if (f.route->kind == RouteKind::Spine && !snap.topo.spine_live(f.route->spine)) {
      ++report.dead_spine_routes;
      if (report.examples.size() < 8) report.examples.push_back("flow " + *f.id + " routed via failed spine");
    }
    for (LinkId l : f.route->links) usage[l.value] += f.rate;
  }
  const double cap = snap.topo.link_capacity();
  bool saturated = false;
  for (const auto& [link, used] : usage) {
    if (used > cap * (1.0 + kRelTol)) {
      ++report.overloaded_links;
      if (report.examples.size() < 8) {
        report.examples.push_back("link " + snap.topo.link_name(LinkId{link}) + " over capacity at t=" +
                                  format_double(snap.time));
      }
    }
    if (used >= cap * (1.0 - kRelTol)) saturated = true;
  }
  if (!snap.flows.empty() && !saturated) {
    ++report.idle_snapshots;
    if (report.examples.size() < 8) report.examples.push_back("no saturated link at t=" + format_double(snap.time));
  }
}

void check_records(const SimResult& result, InvariantReport& report) {
  std::map<std::string, std::vector<const MetricsRecord*>> by_job;
  for (const auto& m : result.metrics) {
    by_job[m.job_id].push_back(&m);
    for (const auto& f : m.flow_records) {
      const double vol = static_cast<double>(f.volume);
      if (std::abs(f.delivered - vol) > kConservationTol * vol) {
        ++report.conservation_errors;
        if (report.examples.size() < 8) report.examples.push_back("flow " + f.commodity_id + " delivered " + format_double(f.delivered));
      }
    }
  }
  for (auto& [job, records] : by_job) {
    std::sort(records.begin(), records.end(), [](auto* a, auto* b) { return a->iteration < b->iteration; });
    for (std::size_t i = 1; i < records.size(); ++i) {
      if (records[i]->comm_start < records[i - 1]->comm_end) {
        ++report.barrier_errors;
        if (report.examples.size() < 8) report.examples.push_back("job " + job + " iterations overlap");
      }
    }
  }
}

nlohmann::json invariants_json(const InvariantReport& r) {
  return {{"snapshots", r.snapshots},
          {"overloaded_links", r.overloaded_links},
          {"dead_spine_routes", r.dead_spine_routes},
          {"idle_snapshots", r.idle_snapshots},
          {"conservation_errors", r.conservation_errors},
          {"barrier_errors", r.barrier_errors},
          {"ok", r.ok()},
          {"examples", r.examples}};
}

nlohmann::json summary_json(const std::string& scenario, const RunOutput& out) {
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;
  for (const auto& row : out.rows) {
    auto& cell = sums[row.scheme][row.metric];
    cell.first += row.value;
    ++cell.second;
  }
  nlohmann::json schemes = nlohmann::json::object();
  for (const auto& [scheme, metrics] : sums) {
    for (const auto& [metric, cell] : metrics) schemes[scheme][metric] = cell.first / static_cast<double>(cell.second);
  }
  nlohmann::json runtime = nlohmann::json::object();
  for (const auto& run : out.runs) {
    auto& node = runtime[std::string(scheme_name(run.scheme))];
    if (node.is_null()) node = nlohmann::json::object();
    double total = node.value("total_s", 0.0);
    double worst = node.value("max_s", 0.0);
    std::size_t decisions = node.value("decisions", std::size_t{0});
    for (const auto& d : run.result.decisions) {
      total += d.runtime_s;
      worst = std::max(worst, d.runtime_s);
      ++decisions;
    }
    node["total_s"] = total;
    node["max_s"] = worst;
    node["decisions"] = decisions;
    node["mean_s"] = decisions ? total / static_cast<double>(decisions) : 0.0;
  }
  return {{"scenario", scenario}, {"scheme_means", schemes}, {"routing_runtime", runtime},
          {"invariants", invariants_json(out.invariants)}};
}

void write_trace(std::ostream& os, const RunOutput& out) {
  os << "scenario,scheme,seed,job,iteration,commodity,src,dst,volume_bytes,start_s,end_s,fct_s,throughput_bps,udp_port\n";
  for (const auto& run : out.runs) {
    for (const auto& m : run.result.metrics) {
      for (const auto& f : m.flow_records) {
        os << run.scenario << ',' << scheme_name(run.scheme) << ',' << run.seed << ',' << m.job_id << ',' << m.iteration
           << ',' << f.commodity_id << ',' << to_string(f.src) << ',' << to_string(f.dst) << ',' << f.volume << ','
           << format_double(f.start) << ',' << format_double(f.end) << ',' << format_double(f.fct) << ','
           << format_double(f.throughput) << ',' << f.udp_port << '\n';
      }
    }
  }
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.scenario, a.scheme, a.job, a.metric, a.seed) < std::tie(b.scenario, b.scheme, b.job, b.metric, b.seed);
  });
}

void write_rows_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kResultHeader << '\n';
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.scheme << ',' << r.job << ',' << r.metric << ',' << format_double(r.value) << ','
        << r.seed << '\n';
  }
}

void InvariantReport::merge(const InvariantReport& other) {
  snapshots += other.snapshots;
  overloaded_links += other.overloaded_links;
  dead_spine_routes += other.dead_spine_routes;
  idle_snapshots += other.idle_snapshots;
  conservation_errors += other.conservation_errors;
  barrier_errors += other.barrier_errors;
  for (const auto& e : other.examples) {
    if (examples.size() < 8) examples.push_back(e);
  }
}

std::vector<ResultRow> rows_from_result(const std::string& scenario, Scheme scheme, std::uint64_t seed,
                                        const SimResult& result, bool report_runtime) {
  struct Acc {
    double allreduce = 0.0;
    std::size_t iterations = 0;
    double fct = 0.0;
    double throughput = 0.0;
    double min_bw = kUnboundedRate;
    std::size_t flows = 0;
  };
  std::map<std::string, Acc> jobs;
  for (const auto& m : result.metrics) {
    auto& a = jobs[m.job_id];
    a.allreduce += m.allreduce_time;
    ++a.iterations;
    for (const auto& f : m.flow_records) {
      a.fct += f.fct;
      a.throughput += f.throughput;
      a.min_bw = std::min(a.min_bw, f.throughput);
      ++a.flows;
    }
  }
  const std::string name(scheme_name(scheme));
  std::vector<ResultRow> rows;
  for (const auto& [job, a] : jobs) {
    const double flows = static_cast<double>(a.flows);
    rows.push_back({scenario, name, job, "allreduce_time_s", a.allreduce / static_cast<double>(a.iterations), seed});
    rows.push_back({scenario, name, job, "mean_fct_s", a.flows ? a.fct / flows : 0.0, seed});
    rows.push_back({scenario, name, job, "mean_throughput_bps", a.flows ? a.throughput / flows : 0.0, seed});
    rows.push_back({scenario, name, job, "min_bandwidth_bps", a.flows ? a.min_bw : 0.0, seed});
  }
  std::uint32_t max_load = 0;
  double runtime = 0.0;
  for (const auto& d : result.decisions) {
    max_load = std::max(max_load, d.max_spine_load);
    runtime += d.runtime_s;
  }
  rows.push_back({scenario, name, "*", "max_link_load", static_cast<double>(max_load), seed});
  if (report_runtime) {
    const double mean = result.decisions.empty() ? 0.0 : runtime / static_cast<double>(result.decisions.size());
    rows.push_back({scenario, name, "*", "runtime_s", mean, seed});
  }
  return rows;
}

RunOutput run_experiments(const ScenarioConfig& config, const std::string& scenario_tag, bool check_invariants) {
  const auto topo = config.topology.build();
  struct Task {
    Scheme scheme;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (auto scheme : config.schemes) {
    for (auto seed : config.seeds) tasks.push_back({scheme, seed});
  }

  std::vector<ScenarioRun> runs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto n = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto k = static_cast<std::size_t>(t);
    try {
      auto& run = runs[k];
      run.scenario = scenario_tag;
      run.scheme = tasks[k].scheme;
      run.seed = tasks[k].seed;
      auto jobs = realize_jobs(config, topo, run.seed);
      ControllerModel controller = config.controller;
      controller.scheme = run.scheme;
      SimOptions opts;
      opts.hardware = config.hardware;
      opts.failures = config.failures;
      opts.seed = run.seed;
      opts.udp_port_base = config.udp_port_base;
      if (check_invariants) opts.observer = [&run](const SimSnapshot& s) { check_snapshot(s, run.invariants); };
      run.result = run_scenario(topo, std::move(jobs), controller, opts);
      if (check_invariants) check_records(run.result, run.invariants);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunOutput out;
  for (auto& run : runs) {
    auto rows = rows_from_result(scenario_tag, run.scheme, run.seed, run.result, config.report_runtime);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    out.invariants.merge(run.invariants);
  }
  sort_rows(out.rows);
  out.runs = std::move(runs);
  return out;
}

namespace {

ScenarioConfig with_overrides(ScenarioConfig cfg, const RunOptions& options) {
  if (options.schemes) {
    if (options.schemes->empty()) throw ConfigError("--schemes", "must not be empty");
    cfg.schemes = *options.schemes;
  }
  if (options.seeds) {
    if (options.seeds->empty()) throw ConfigError("--seed", "must not be empty");
    cfg.seeds = *options.seeds;
  }
  return cfg;
}

void emit_run(const std::filesystem::path& out_path, const std::string& scenario, const RunOutput& out,
              bool trace, const nlohmann::json& extra) {
  AtomicOutput csv(out_path);
  write_rows_csv(csv.stream(), out.rows);
  auto doc = summary_json(scenario, out);
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  AtomicOutput summary(sibling(out_path, ".summary.json"));
  summary.stream() << doc.dump(2) << '\n';
  std::optional<AtomicOutput> trace_file;
  if (trace) {
    trace_file.emplace(sibling(out_path, ".trace.csv"));
    write_trace(trace_file->stream(), out);
  }
  csv.commit();
  summary.commit();
  if (trace_file) trace_file->commit();
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
            const RunOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    const auto cfg = with_overrides(load_config(config_path), options);
    const auto out = run_experiments(cfg, cfg.scenario_id, true);
    emit_run(out_path, cfg.scenario_id, out, options.trace, nlohmann::json::object());
    log << "wrote " << out.rows.size() << " rows to " << out_path.string() << '\n';
    if (!out.invariants.ok()) {
      log << "simulation invariant violated: " << invariants_json(out.invariants).dump() << '\n';
      return static_cast<int>(kExitViolation);
    }
    return static_cast<int>(kExitOk);
  });
}

ValidationReport validate_instances(std::size_t count, std::uint64_t seed, const ValidateLimits& limits) {
  if (limits.max_tors < 2) throw ConfigError("max_tors", "must be >= 2");
  if (limits.max_spines < 1) throw ConfigError("max_spines", "must be >= 1");
  if (limits.max_commodities < 1) throw ConfigError("max_commodities", "must be >= 1");
  if (limits.failed_spines < 0) throw ConfigError("failed_spines", "must be >= 0");
  const ExactLimits exact_limits{};
  if (limits.max_commodities > exact_limits.max_commodities) {
    throw ConfigError("max_commodities", "exceeds the exact oracle limit of " + std::to_string(exact_limits.max_commodities));
  }

  ValidationReport report;
  report.instances.resize(count);
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    try {
      const auto inst_seed = derive_seed(seed, i);
      Rng rng(inst_seed);
      InstanceResult r;
      r.index = i;
      r.tors = 2 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(limits.max_tors - 1)));
      r.live_spines = 1 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(limits.max_spines)));
      r.failed_spines = limits.failed_spines;
      r.commodities = 1 + uniform_below(rng, limits.max_commodities);

      const auto hosts = static_cast<int>(r.commodities);
      auto topo = fail_spines(build_topology(r.live_spines + r.failed_spines, r.tors, hosts, 1, 1.0), r.failed_spines,
                              derive_seed(inst_seed, 1));
      std::vector<CommoditySpec> cs;
      for (std::size_t k = 0; k < r.commodities; ++k) {
        const int src = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(r.tors)));
        int dst = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(r.tors - 1)));
        if (dst >= src) ++dst;
        const int host = static_cast<int>(k);
        cs.push_back({"c" + std::to_string(k), "v", {src, host, 0}, {dst, host, 0}, 1});
      }

      const auto greedy = greedy_assign(cs, topo);
      const auto exact = exact_assign(cs, topo, exact_limits);
      const auto edge = edge_color_assign(cs, topo);
      r.max_degree = max_tor_degree(cs);
      r.greedy_load = max_link_load(greedy, topo, LoadScope::SpineLinksOnly);
      r.exact_load = max_link_load(exact, topo, LoadScope::SpineLinksOnly);
      r.edge_color_load = max_link_load(edge, topo, LoadScope::SpineLinksOnly);
      r.ratio = static_cast<double>(r.greedy_load) / static_cast<double>(r.exact_load);

      auto min_rate = [&](const PathChoice& choice) {
        std::vector<FlowPath> flows;
        for (std::size_t k = 0; k < cs.size(); ++k) flows.push_back({cs[k].id, &choice.routes[k]});
        return min_bandwidth(waterfill(flows, topo));
      };
      r.greedy_min_bw = min_rate(greedy);
      r.exact_min_bw = min_rate(exact);
      report.instances[i] = r;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& r : report.instances) {
    report.max_ratio = std::max(report.max_ratio, r.ratio);
    if (r.greedy_load > 2 * r.exact_load) ++report.violations;
    if (r.greedy_min_bw < 0.5 * r.exact_min_bw * (1.0 - kRelTol)) ++report.bandwidth_violations;
    const auto live = static_cast<std::uint32_t>(r.live_spines);
    if (r.edge_color_load != (r.max_degree + live - 1) / live) ++report.edge_color_ceil_mismatches;
    if (r.edge_color_load != r.exact_load) ++report.edge_color_exact_mismatches;
  }
  return report;
}

void write_validation_csv(std::ostream& out, const ValidationReport& report) {
  out << "instance,tors,live_spines,failed_spines,commodities,max_degree,greedy_load,exact_load,edge_coloring_load,"
         "ratio,greedy_min_bw,exact_min_bw\n";
  for (const auto& r : report.instances) {
    out << r.index << ',' << r.tors << ',' << r.live_spines << ',' << r.failed_spines << ',' << r.commodities << ','
        << r.max_degree << ',' << r.greedy_load << ',' << r.exact_load << ',' << r.edge_color_load << ','
        << format_double(r.ratio) << ',' << format_double(r.greedy_min_bw) << ',' << format_double(r.exact_min_bw)
        << '\n';
  }
}

namespace {

void print_validation(std::ostream& log, const ValidationReport& report) {
  log << "instances: " << report.instances.size() << '\n'
      << "max_ratio: " << format_double(report.max_ratio) << '\n'
      << "violations: " << report.violations << '\n'
      << "bandwidth_violations: " << report.bandwidth_violations << '\n'
      << "edge_coloring_equals_ceil: " << report.instances.size() - report.edge_color_ceil_mismatches << '/'
      << report.instances.size() << '\n'
      << "edge_coloring_equals_exact: " << report.instances.size() - report.edge_color_exact_mismatches << '/'
      << report.instances.size() << '\n';
}

}  // namespace

int cmd_validate(std::size_t instances, std::uint64_t seed, const ValidateLimits& limits,
                 const std::optional<std::filesystem::path>& out_path, std::ostream& log) {
  return guarded(log, [&] {
    const auto report = validate_instances(instances, seed, limits);
    if (out_path) {
      AtomicOutput csv(*out_path);
      write_validation_csv(csv.stream(), report);
      csv.commit();
    }
    print_validation(log, report);
    return static_cast<int>(report.ok() ? kExitOk : kExitViolation);
  });
}

int cmd_bench(std::span<const std::size_t> counts, std::span<const Scheme> schemes, const std::filesystem::path& out_path,
              std::uint64_t seed, const TopologyConfig& topology, std::ostream& log) {
  return guarded(log, [&] {
    const auto topo = topology.build();
    AtomicOutput csv(out_path);
    csv.stream() << "scheme,count,median_s\n";
    for (auto scheme : schemes) {
      SchemeOptions opts;
      opts.seed = seed;
      for (const auto& [count, median] : measure_scheme_runtime(scheme, counts, topo, seed, opts)) {
        csv.stream() << scheme_name(scheme) << ',' << count << ',' << format_double(median) << '\n';
        log << scheme_name(scheme) << " n=" << count << " median " << format_double(median * 1e3) << " ms\n";
      }
    }
    csv.commit();
    return static_cast<int>(kExitOk);
  });
}

int cmd_failsweep(const std::filesystem::path& config_path, std::span<const int> failure_counts,
                  const std::filesystem::path& out_path, const RunOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    const auto base = with_overrides(load_config(config_path), options);
    for (std::size_t i = 0; i < failure_counts.size(); ++i) {
      const int k = failure_counts[i];
      if (k < 0 || k >= base.topology.num_spines) {
        throw ConfigError("--counts[" + std::to_string(i) + "]",
                          "failure count " + std::to_string(k) + " must lie in [0, num_spines)");
      }
    }

    RunOutput all;
    nlohmann::json groups = nlohmann::json::array();
    bool ok = true;
    for (int k : failure_counts) {
      auto cfg = base;
      cfg.failures.reset();
      if (k > 0) cfg.failures = FailurePlan{{cfg.failsweep.time_s}, {k}, cfg.failsweep.seed};
      const std::string tag = base.scenario_id + "/fail=" + std::to_string(k);
      auto out = run_experiments(cfg, tag, true);

      ValidateLimits limits;
      limits.failed_spines = k;
      const auto small = validate_instances(1000, derive_seed(cfg.failsweep.seed, static_cast<std::uint64_t>(k)), limits);
      ok = ok && out.invariants.ok() && small.ok();
      groups.push_back({{"failed_spines", k},
                        {"invariants", invariants_json(out.invariants)},
                        {"small_instances",
                         {{"count", small.instances.size()},
                          {"max_ratio", small.max_ratio},
                          {"violations", small.violations},
                          {"edge_coloring_exact_mismatches", small.edge_color_exact_mismatches}}}});
      log << "failures=" << k << ": " << out.rows.size() << " rows, invariants " << (out.invariants.ok() ? "ok" : "VIOLATED")
          << ", small-instance max ratio " << format_double(small.max_ratio) << '\n';
      all.rows.insert(all.rows.end(), out.rows.begin(), out.rows.end());
      all.invariants.merge(out.invariants);
      for (auto& run : out.runs) all.runs.push_back(std::move(run));
    }
    sort_rows(all.rows);
    emit_run(out_path, base.scenario_id, all, options.trace, {{"failure_groups", groups}});
    return static_cast<int>(ok ? kExitOk : kExitViolation);
  });
}

}  // namespace closroute
