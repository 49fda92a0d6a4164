#include "closroute/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "closroute/random.hpp"

namespace closroute {

namespace {

using nlohmann::json;

// Typed access with the field path carried along for error messages.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return node_.contains(key); }
  const json& raw(const std::string& key) const { return node_.at(key); }

  void allow_only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : node_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
        throw ConfigError(at(k), "unknown field");
      }
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    if (!has(key)) return;
    out = get<T>(node_.at(key), at(key));
  }

  template <typename T>
  T required(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "missing required field");
    return get<T>(node_.at(key), at(key));
  }

  template <typename T>
  static T get(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path, "expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(path, "expected a non-negative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
    }
    return v.get<T>();
  }

 private:
  const json& node_;
  std::string path_;
};

template <typename T>
std::vector<T> read_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Reader::get<T>(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

TopologyConfig parse_topology(const json& node, const std::string& path) {
  Reader r(node, path);
  r.allow_only({"num_spines", "num_tors", "hosts_per_tor", "nics_per_host", "link_capacity_bps"});
  TopologyConfig t;
  r.read("num_spines", t.num_spines);
  r.read("num_tors", t.num_tors);
  r.read("hosts_per_tor", t.hosts_per_tor);
  r.read("nics_per_host", t.nics_per_host);
  r.read("link_capacity_bps", t.link_capacity_bps);
  require(t.num_spines >= 1, r.at("num_spines"), "must be >= 1");
  require(t.num_tors >= 2, r.at("num_tors"), "must be >= 2");
  require(t.hosts_per_tor >= 1, r.at("hosts_per_tor"), "must be >= 1");
  require(t.nics_per_host >= 1, r.at("nics_per_host"), "must be >= 1");
  require(t.link_capacity_bps > 0.0, r.at("link_capacity_bps"), "must be > 0");
  return t;
}

ModelConfig parse_model(const json& node, const std::string& path) {
  Reader r(node, path);
  r.allow_only({"name", "num_params", "bytes_per_param", "tp", "pp"});
  ModelConfig m;
  m.name = r.required<std::string>("name");
  m.num_params = r.required<double>("num_params");
  r.read("bytes_per_param", m.bytes_per_param);
  r.read("tp", m.tp);
  r.read("pp", m.pp);
  require(m.num_params > 0.0, r.at("num_params"), "must be > 0");
  require(m.bytes_per_param > 0, r.at("bytes_per_param"), "must be > 0");
  require(m.tp >= 1, r.at("tp"), "must be >= 1");
  require(m.pp >= 1, r.at("pp"), "must be >= 1");
  return m;
}

Scheme parse_scheme_field(const json& v, const std::string& path) {
  const auto name = Reader::get<std::string>(v, path);
  auto s = parse_scheme(name);
  if (!s) throw ConfigError(path, "unknown scheme '" + name + "'");
  return *s;
}

void parse_controller(const json& node, const std::string& path, ControllerModel& c) {
  Reader r(node, path);
  r.allow_only({"reaction_latency_s", "elephant_threshold_bytes", "precomputed_failures", "ecmp_fallback",
                "volume_weighted", "parallel_greedy", "annealing", "exact"});
  r.read("reaction_latency_s", c.reaction_latency);
  r.read("elephant_threshold_bytes", c.elephant_threshold);
  r.read("precomputed_failures", c.precomputed_failures);
  r.read("ecmp_fallback", c.ecmp_fallback);
  r.read("volume_weighted", c.volume_weighted);
  r.read("parallel_greedy", c.parallel_greedy);
  require(c.reaction_latency >= 0.0, r.at("reaction_latency_s"), "must be >= 0");
  require(c.elephant_threshold >= 0.0, r.at("elephant_threshold_bytes"), "must be >= 0");
  if (r.has("annealing")) {
    Reader a(r.raw("annealing"), r.at("annealing"));
    a.allow_only({"initial_temp", "cooling_factor", "moves"});
    a.read("initial_temp", c.anneal.initial_temp);
    a.read("cooling_factor", c.anneal.cooling_factor);
    if (a.has("moves")) c.anneal.moves = Reader::get<std::size_t>(a.raw("moves"), a.at("moves"));
    require(c.anneal.initial_temp > 0.0, a.at("initial_temp"), "must be > 0");
    require(c.anneal.cooling_factor > 0.0 && c.anneal.cooling_factor < 1.0, a.at("cooling_factor"),
            "must lie in (0, 1)");
  }
  if (r.has("exact")) {
    Reader e(r.raw("exact"), r.at("exact"));
    e.allow_only({"max_commodities"});
    e.read("max_commodities", c.exact.max_commodities);
  }
}

}  // namespace

ScenarioConfig parse_config(const nlohmann::json& doc) {
  Reader r(doc, "");
  r.allow_only({"scenario_id", "topology", "models", "allowed_dp", "jobs", "random_jobs", "arrival_window_s",
                "controller", "schemes", "seeds", "failures", "failsweep", "hardware", "udp_port_base",
                "report_runtime"});
  ScenarioConfig cfg;
  r.read("scenario_id", cfg.scenario_id);
  require(!cfg.scenario_id.empty(), "scenario_id", "must not be empty");
  if (r.has("topology")) cfg.topology = parse_topology(r.raw("topology"), "topology");

  if (r.has("models")) {
    const auto& list = r.raw("models");
    require(list.is_array(), "models", "expected a list");
    cfg.models.clear();
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto path = "models[" + std::to_string(i) + "]";
      cfg.models.push_back(parse_model(list[i], path));
      require(names.insert(cfg.models.back().name).second, path + ".name", "duplicate model name");
    }
  }
  auto model_known = [&](const std::string& name) {
    return std::any_of(cfg.models.begin(), cfg.models.end(), [&](const ModelConfig& m) { return m.name == name; });
  };

  if (r.has("allowed_dp")) cfg.allowed_dp = read_list<int>(r.raw("allowed_dp"), "allowed_dp");
  require(!cfg.allowed_dp.empty(), "allowed_dp", "must not be empty");
  for (std::size_t i = 0; i < cfg.allowed_dp.size(); ++i) {
    require(cfg.allowed_dp[i] >= 1, "allowed_dp[" + std::to_string(i) + "]", "must be >= 1");
  }
  auto dp_allowed = [&](int dp) { return std::find(cfg.allowed_dp.begin(), cfg.allowed_dp.end(), dp) != cfg.allowed_dp.end(); };

  r.read("arrival_window_s", cfg.arrival_window_s);
  require(cfg.arrival_window_s > 0.0, "arrival_window_s", "must be > 0");

  if (r.has("jobs")) {
    const auto& list = r.raw("jobs");
    require(list.is_array(), "jobs", "expected a list");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto path = "jobs[" + std::to_string(i) + "]";
      Reader j(list[i], path);
      j.allow_only({"id", "model", "dp", "num_iterations", "arrival_s"});
      JobSpec spec;
      spec.id = "job" + std::to_string(i);
      j.read("id", spec.id);
      spec.model = j.required<std::string>("model");
      j.read("dp", spec.dp);
      j.read("num_iterations", spec.num_iterations);
      if (j.has("arrival_s")) spec.arrival_s = Reader::get<double>(j.raw("arrival_s"), j.at("arrival_s"));
      require(model_known(spec.model), j.at("model"), "unknown model '" + spec.model + "'");
      require(dp_allowed(spec.dp), j.at("dp"), "dp " + std::to_string(spec.dp) + " not in allowed_dp");
      require(spec.num_iterations >= 1, j.at("num_iterations"), "must be >= 1");
      require(!spec.arrival_s || *spec.arrival_s >= 0.0, j.at("arrival_s"), "must be >= 0");
      require(ids.insert(spec.id).second, j.at("id"), "duplicate job id");
      cfg.jobs.push_back(std::move(spec));
    }
  }

  if (r.has("random_jobs")) {
    Reader j(r.raw("random_jobs"), "random_jobs");
    j.allow_only({"min_count", "max_count", "models", "num_iterations"});
    RandomJobs rj;
    j.read("min_count", rj.min_count);
    j.read("max_count", rj.max_count);
    j.read("num_iterations", rj.num_iterations);
    if (j.has("models")) rj.models = read_list<std::string>(j.raw("models"), j.at("models"));
    require(rj.min_count >= 0, j.at("min_count"), "must be >= 0");
    require(rj.max_count >= rj.min_count, j.at("max_count"), "must be >= min_count");
    require(rj.num_iterations >= 1, j.at("num_iterations"), "must be >= 1");
    for (std::size_t i = 0; i < rj.models.size(); ++i) {
      require(model_known(rj.models[i]), j.at("models") + "[" + std::to_string(i) + "]",
              "unknown model '" + rj.models[i] + "'");
    }
    cfg.random_jobs = std::move(rj);
  }
  require(!cfg.jobs.empty() || cfg.random_jobs, "jobs", "scenario needs jobs or random_jobs");

  if (r.has("controller")) parse_controller(r.raw("controller"), "controller", cfg.controller);

  if (r.has("schemes")) {
    const auto& list = r.raw("schemes");
    require(list.is_array(), "schemes", "expected a list");
    cfg.schemes.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.schemes.push_back(parse_scheme_field(list[i], "schemes[" + std::to_string(i) + "]"));
    }
  }
  require(!cfg.schemes.empty(), "schemes", "must not be empty");

  if (r.has("seeds")) cfg.seeds = read_list<std::uint64_t>(r.raw("seeds"), "seeds");
  require(!cfg.seeds.empty(), "seeds", "must not be empty");

  if (r.has("failures")) {
    Reader f(r.raw("failures"), "failures");
    f.allow_only({"times_s", "counts", "seed"});
    FailurePlan plan;
    if (f.has("times_s")) plan.times = read_list<double>(f.raw("times_s"), f.at("times_s"));
    if (f.has("counts")) plan.counts = read_list<int>(f.raw("counts"), f.at("counts"));
    f.read("seed", plan.seed);
    require(plan.times.size() == plan.counts.size(), f.at("counts"), "needs one count per entry of times_s");
    int total = 0;
    for (std::size_t i = 0; i < plan.counts.size(); ++i) {
      require(plan.counts[i] >= 0, f.at("counts") + "[" + std::to_string(i) + "]", "must be >= 0");
      require(plan.times[i] >= 0.0, f.at("times_s") + "[" + std::to_string(i) + "]", "must be >= 0");
      total += plan.counts[i];
    }
    require(total < cfg.topology.num_spines, f.at("counts"), "must leave at least one live spine");
    cfg.failures = std::move(plan);
  }

  if (r.has("failsweep")) {
    Reader f(r.raw("failsweep"), "failsweep");
    f.allow_only({"time_s", "seed"});
    f.read("time_s", cfg.failsweep.time_s);
    f.read("seed", cfg.failsweep.seed);
    require(cfg.failsweep.time_s >= 0.0, f.at("time_s"), "must be >= 0");
  }

  if (r.has("hardware")) {
    Reader h(r.raw("hardware"), "hardware");
    h.allow_only({"peak_flops", "utilization", "tokens_per_batch"});
    h.read("peak_flops", cfg.hardware.peak_flops);
    h.read("utilization", cfg.hardware.utilization);
    h.read("tokens_per_batch", cfg.hardware.tokens_per_batch);
    require(cfg.hardware.peak_flops > 0.0, h.at("peak_flops"), "must be > 0");
    require(cfg.hardware.utilization > 0.0, h.at("utilization"), "must be > 0");
    require(cfg.hardware.tokens_per_batch > 0.0, h.at("tokens_per_batch"), "must be > 0");
  }
  r.read("udp_port_base", cfg.udp_port_base);
  require(cfg.udp_port_base >= 0 && cfg.udp_port_base + cfg.topology.num_spines <= 65536, "udp_port_base",
          "ports for every spine must fit in 0..65535");
  r.read("report_runtime", cfg.report_runtime);

  int fixed_gpus = 0;
  for (std::size_t i = 0; i < cfg.jobs.size(); ++i) {
    const auto& spec = cfg.jobs[i];
    const auto& m = *std::find_if(cfg.models.begin(), cfg.models.end(), [&](const ModelConfig& x) { return x.name == spec.model; });
    fixed_gpus += m.tp * m.pp * spec.dp;
  }
  const int cluster = cfg.topology.num_tors * cfg.topology.hosts_per_tor * cfg.topology.nics_per_host;
  require(fixed_gpus <= cluster, "jobs",
          "jobs need " + std::to_string(fixed_gpus) + " GPUs but the cluster has " + std::to_string(cluster));
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return parse_config(doc);
}

std::vector<Job> realize_jobs(const ScenarioConfig& config, const ClosTopology& topo, std::uint64_t seed) {
  auto model_named = [&](const std::string& name) -> const ModelConfig& {
    return *std::find_if(config.models.begin(), config.models.end(), [&](const ModelConfig& m) { return m.name == name; });
  };

  std::vector<Job> jobs;
  for (const auto& spec : config.jobs) {
    jobs.push_back(Job{spec.id, model_named(spec.model), spec.dp, spec.arrival_s.value_or(-1.0), spec.num_iterations, {}});
  }

  if (config.random_jobs) {
    const auto& rj = *config.random_jobs;
    Rng rng(derive_seed(seed, 0x10b5));
    const auto span = static_cast<std::uint64_t>(rj.max_count - rj.min_count + 1);
    const int count = rj.min_count + static_cast<int>(uniform_below(rng, span));
    std::vector<std::string> pool = rj.models;
    if (pool.empty()) {
      for (const auto& m : config.models) pool.push_back(m.name);
    }
    int free_gpus = topo.num_endpoints();
    for (const auto& j : jobs) free_gpus -= j.num_gpus();
    auto dps = config.allowed_dp;
    std::sort(dps.begin(), dps.end());
    for (int k = 0; k < count; ++k) {
      const auto& model = model_named(pool[uniform_below(rng, pool.size())]);
      int dp = config.allowed_dp[uniform_below(rng, config.allowed_dp.size())];
      // Shrink data parallelism when the drawn width does not fit the remaining GPUs.
      if (model.tp * model.pp * dp > free_gpus) {
        dp = 0;
        for (int cand : dps) {
          if (model.tp * model.pp * cand <= free_gpus) dp = cand;
        }
        if (dp == 0) break;
      }
      free_gpus -= model.tp * model.pp * dp;
      jobs.push_back(Job{"rjob" + std::to_string(k), model, dp, -1.0, rj.num_iterations, {}});
    }
  }

  const auto arrivals = arrival_schedule(static_cast<int>(jobs.size()), config.arrival_window_s, derive_seed(seed, 0xa77));
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (jobs[k].arrival_time < 0.0) jobs[k].arrival_time = arrivals[k];
  }
  place_jobs(topo, jobs, derive_seed(seed, 0x91ace));
  return jobs;
}

}  // namespace closroute
