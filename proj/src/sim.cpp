#include "closroute/sim.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>

#include "closroute/random.hpp"
#include "closroute/rates.hpp"

namespace closroute {

int encode_route_as_udp_port(const Route& route, int port_base) {
  if (route.kind != RouteKind::Spine) return kNoUdpPort;
  return port_base + route.spine;
}

int decode_udp_port(int port, int port_base) { return port - port_base; }

void place_jobs(const ClosTopology& topo, std::span<Job> jobs, std::uint64_t seed) {
  Occupancy occupancy(topo);
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    auto& job = jobs[k];
    job.placement = place_job(topo, job.model, job.dp, occupancy, derive_seed(seed, k));
    occupancy.claim(job.placement);
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// A flow this close to its finish (seconds of transmission left) completes in
// the current step.
constexpr double kFinishSlack = 1e-12;

// Tie order at equal timestamps; FlowCompleted is handled outside the queue
// and always goes first.
enum class EventKind : int { ControllerDecision = 1, ComputeDone = 2, JobArrival = 3, SpineFailure = 4 };

struct Event {
  double time;
  EventKind kind;
  std::uint64_t seq;
  std::size_t payload;

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

struct FlowState {
  CommoditySpec commodity;
  std::size_t job = 0;
  Route route;
  bool routed = false;
  bool elephant = false;
  bool admitted = false;  // controller has answered for this flow
  double decision_due = 0.0;
  double remaining = 0.0;  // bytes
  double delivered = 0.0;  // bytes
  double rate = 0.0;       // bits/second
  double start = 0.0;
};

struct JobState {
  Job job;
  int iteration = 0;
  double comm_start = 0.0;
  std::size_t outstanding = 0;
  MetricsRecord current;
};

class Simulator {
 public:
  Simulator(const ClosTopology& topo, std::vector<Job> jobs, const ControllerModel& controller,
            const SimOptions& options)
      : topo_(topo), controller_(controller), options_(options) {
    validate(jobs);
    for (auto& j : jobs) jobs_.push_back(JobState{std::move(j), 0, 0.0, 0, {}});
    for (std::size_t k = 0; k < jobs_.size(); ++k) push(jobs_[k].job.arrival_time, EventKind::JobArrival, k);
    if (options_.failures) {
      const auto& plan = *options_.failures;
      if (plan.times.size() != plan.counts.size()) {
        throw std::invalid_argument("failure plan needs one count per time");
      }
      for (std::size_t k = 0; k < plan.times.size(); ++k) push(plan.times[k], EventKind::SpineFailure, k);
    }
  }

  SimResult run() {
    while (true) {
      const double t_flow = next_completion();
      const double t_event = queue_.empty() ? kInf : queue_.top().time;
      if (t_flow == kInf && t_event == kInf) break;
      if (t_flow <= t_event) {
        advance(t_flow);
        complete_flows();
      } else {
        advance(t_event);
        const Event ev = queue_.top();
        queue_.pop();
        handle(ev);
      }
    }
    if (!active_.empty()) throw std::logic_error("simulation ended with active flows");
    result_.failed_spines = topo_.failed_spines();
    result_.end_time = now_;
    return std::move(result_);
  }

 private:
  void validate(const std::vector<Job>& jobs) const {
    Occupancy occupancy(topo_);
    for (const auto& j : jobs) {
      if (j.num_iterations < 1) throw std::invalid_argument("job " + j.id + " needs at least one iteration");
      if (static_cast<int>(j.placement.size()) != j.num_gpus()) {
        throw std::invalid_argument("job " + j.id + " is not placed");
      }
      for (const auto& e : j.placement) {
        if (!topo_.contains(e)) throw std::invalid_argument("job " + j.id + " placed outside the topology");
      }
      occupancy.claim(j.placement);
    }
  }

  void push(double time, EventKind kind, std::size_t payload) { queue_.push(Event{time, kind, seq_++, payload}); }

  void schedule_decision(double time) {
    if (pending_decisions_.insert(time).second) push(time, EventKind::ControllerDecision, 0);
  }

  double next_completion() const {
    double best = kInf;
    for (auto i : active_) {
      const auto& f = flows_[i];
      if (f.rate > 0.0) best = std::min(best, now_ + f.remaining * 8.0 / f.rate);
    }
    return best;
  }

  void advance(double t) {
    const double dt = t - now_;
    if (dt > 0.0) {
      for (auto i : active_) {
        auto& f = flows_[i];
        if (f.rate <= 0.0) continue;
        const double sent = std::min(f.remaining, f.rate * dt / 8.0);
        f.remaining -= sent;
        f.delivered += f.rate * dt / 8.0;
      }
    }
    now_ = std::max(now_, t);
  }

  void handle(const Event& ev) {
    switch (ev.kind) {
      case EventKind::JobArrival:
        start_compute(ev.payload);
        break;
      case EventKind::ComputeDone:
        start_communication(ev.payload);
        break;
      case EventKind::ControllerDecision:
        pending_decisions_.erase(ev.time);
        controller_decision();
        break;
      case EventKind::SpineFailure:
        spine_failure(ev.payload);
        break;
    }
  }

  void start_compute(std::size_t j) {
    const double duration = compute_phase_duration(jobs_[j].job, options_.hardware);
    push(now_ + duration, EventKind::ComputeDone, j);
  }

  void start_communication(std::size_t j) {
    auto& js = jobs_[j];
    js.comm_start = now_;
    js.current = MetricsRecord{js.job.id, js.iteration, now_, now_, 0.0, {}};
    bool new_elephants = false;
    for (const auto& ring : build_rings(js.job)) {
      if (ring.members.size() < 2) continue;
      for (auto& c : ring_allreduce_commodities(ring, js.iteration)) {
        auto local = local_route(topo_, c);
        if (local && local->kind == RouteKind::IntraHost) continue;  // no network time
        FlowState f;
        f.job = j;
        f.remaining = static_cast<double>(c.volume);
        f.start = now_;
        f.elephant = static_cast<double>(c.volume) >= controller_.elephant_threshold;
        if (!f.elephant || controller_.ecmp_fallback) {
          f.route = local ? *local : topo_.spine_route(c.src, c.dst, ecmp_spine(c.id, topo_, options_.seed));
          f.routed = true;
        }
        if (f.elephant) {
          f.decision_due = now_ + controller_.reaction_latency;
          new_elephants = true;
        }
        f.commodity = std::move(c);
        active_.push_back(flows_.size());
        flows_.push_back(std::move(f));
        ++js.outstanding;
      }
    }
    if (new_elephants) schedule_decision(now_ + controller_.reaction_latency);
    if (js.outstanding == 0) {
      finish_iteration(j);
    } else {
      reallocate();
    }
  }

  void finish_iteration(std::size_t j) {
    auto& js = jobs_[j];
    js.current.comm_end = now_;
    js.current.allreduce_time = now_ - js.comm_start;
    result_.metrics.push_back(std::move(js.current));
    js.current = {};
    ++js.iteration;
    if (js.iteration < js.job.num_iterations) start_compute(j);
  }

  void complete_flows() {
    std::vector<std::size_t> still_active;
    std::vector<std::size_t> finished_jobs;
    bool rerouting_needed = false;
    still_active.reserve(active_.size());
    for (auto i : active_) {
      auto& f = flows_[i];
      const bool done = f.rate > 0.0 && (f.remaining * 8.0 <= f.rate * kFinishSlack);
      if (!done) {
        still_active.push_back(i);
        continue;
      }
      f.remaining = 0.0;
      FlowRecord rec;
      rec.commodity_id = f.commodity.id;
      rec.src = f.commodity.src;
      rec.dst = f.commodity.dst;
      rec.volume = f.commodity.volume;
      rec.start = f.start;
      rec.end = now_;
      rec.fct = now_ - f.start;
      rec.throughput = static_cast<double>(f.commodity.volume) * 8.0 / rec.fct;
      rec.delivered = f.delivered;
      rec.udp_port = encode_route_as_udp_port(f.route, options_.udp_port_base);
      auto& js = jobs_[f.job];
      js.current.flow_records.push_back(std::move(rec));
      if (--js.outstanding == 0) finished_jobs.push_back(f.job);
      rerouting_needed = true;
    }
    active_ = std::move(still_active);
    for (auto j : finished_jobs) finish_iteration(j);
    if (rerouting_needed && std::any_of(active_.begin(), active_.end(), [&](std::size_t i) {
          return flows_[i].elephant && flows_[i].admitted;
        })) {
      schedule_decision(now_ + controller_.reaction_latency);
    }
    reallocate();
  }

  void controller_decision() {
    std::vector<std::size_t> managed;
    for (auto i : active_) {
      auto& f = flows_[i];
      if (!f.elephant) continue;
      if (!f.admitted && f.decision_due <= now_) f.admitted = true;
      if (f.admitted) managed.push_back(i);
    }
    // arrival order
    std::sort(managed.begin(), managed.end());
    if (!managed.empty()) {
      std::vector<CommoditySpec> commodities;
      std::vector<double> weights;
      commodities.reserve(managed.size());
      for (auto i : managed) {
        commodities.push_back(flows_[i].commodity);
        if (controller_.volume_weighted) weights.push_back(flows_[i].remaining);
      }
      SchemeOptions opts;
      opts.seed = options_.seed;
      opts.anneal = controller_.anneal;
      opts.exact = controller_.exact;
      opts.parallel_greedy = controller_.parallel_greedy;
      if (controller_.scheme == Scheme::Greedy) opts.weights = weights;

      const auto t0 = std::chrono::steady_clock::now();
      auto choice = assign_paths(controller_.scheme, commodities, topo_, opts);
      const auto t1 = std::chrono::steady_clock::now();

      result_.decisions.push_back(DecisionLog{now_, std::chrono::duration<double>(t1 - t0).count(), managed.size(),
                                              max_link_load(choice, topo_, LoadScope::SpineLinksOnly)});
      for (std::size_t k = 0; k < managed.size(); ++k) {
        auto& f = flows_[managed[k]];
        f.route = std::move(choice.routes[k]);
        f.routed = true;
      }
    }
    reallocate();
  }

  void spine_failure(std::size_t k) {
    const auto& plan = *options_.failures;
    topo_ = fail_spines(topo_, plan.counts[k], derive_seed(plan.seed, k));
    bool stranded = false;
    for (auto i : active_) {
      auto& f = flows_[i];
      if (!f.routed || f.route.kind != RouteKind::Spine || topo_.spine_live(f.route.spine)) continue;
      if (f.elephant && f.admitted) {
        f.routed = false;
        f.rate = 0.0;
        stranded = true;
      } else {
        // mice and not-yet-admitted fallback flows re-hash onto live spines
        f.route = topo_.spine_route(f.commodity.src, f.commodity.dst, ecmp_spine(f.commodity.id, topo_, options_.seed));
      }
    }
    if (stranded) {
      schedule_decision(now_ + (controller_.precomputed_failures ? 0.0 : controller_.reaction_latency));
    }
    reallocate();
  }

  void reallocate() {
    std::vector<FlowPath> paths;
    std::vector<std::size_t> owners;
    for (auto i : active_) {
      auto& f = flows_[i];
      f.rate = 0.0;
      if (!f.routed) continue;
      paths.push_back(FlowPath{f.commodity.id, &f.route});
      owners.push_back(i);
    }
    const auto alloc = waterfill(paths, topo_);
    for (std::size_t k = 0; k < owners.size(); ++k) flows_[owners[k]].rate = alloc.rates[k];

    if (options_.observer) {
      std::vector<ActiveFlowView> view;
      view.reserve(owners.size());
      for (auto i : owners) view.push_back({&flows_[i].commodity.id, &flows_[i].route, flows_[i].rate});
      options_.observer(SimSnapshot{now_, topo_, view});
    }
  }

  ClosTopology topo_;
  ControllerModel controller_;
  const SimOptions& options_;
  std::vector<JobState> jobs_;
  std::vector<FlowState> flows_;
  std::vector<std::size_t> active_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::set<double> pending_decisions_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  SimResult result_;
};

}  // namespace

SimResult run_scenario(const ClosTopology& topo, std::vector<Job> jobs, const ControllerModel& controller,
                       const SimOptions& options) {
  if (controller.reaction_latency < 0.0) throw std::invalid_argument("reaction latency must be >= 0");
  if (controller.elephant_threshold < 0.0) throw std::invalid_argument("elephant threshold must be >= 0");
  Simulator sim(topo, std::move(jobs), controller, options);
  return sim.run();
}

std::vector<CommoditySpec> random_inter_tor_commodities(const ClosTopology& topo, std::size_t count,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  const auto tors = static_cast<std::uint64_t>(topo.num_tors());
  const auto hosts = static_cast<std::uint64_t>(topo.hosts_per_tor());
  const auto nics = static_cast<std::uint64_t>(topo.nics_per_host());
  std::vector<CommoditySpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto src_tor = uniform_below(rng, tors);
    auto dst_tor = uniform_below(rng, tors - 1);
    if (dst_tor >= src_tor) ++dst_tor;
    Endpoint src{static_cast<int>(src_tor), static_cast<int>(uniform_below(rng, hosts)),
                 static_cast<int>(uniform_below(rng, nics))};
    Endpoint dst{static_cast<int>(dst_tor), static_cast<int>(uniform_below(rng, hosts)),
                 static_cast<int>(uniform_below(rng, nics))};
    out.push_back({"c" + std::to_string(i), "bench", src, dst, 1});
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> measure_scheme_runtime(Scheme scheme, std::span<const std::size_t> counts,
                                                                   const ClosTopology& topo, std::uint64_t seed,
                                                                   const SchemeOptions& options, int repetitions) {
  if (repetitions < 1) throw std::invalid_argument("need at least one repetition");
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const auto commodities = random_inter_tor_commodities(topo, counts[k], derive_seed(seed, counts[k]));
    std::vector<double> samples;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto choice = assign_paths(scheme, commodities, topo, options);
      const auto t1 = std::chrono::steady_clock::now();
      if (choice.routes.size() != commodities.size()) throw std::logic_error("incomplete assignment");
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    const auto n = samples.size();
    const double median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    out.emplace_back(counts[k], median);
  }
  return out;
}

}  // namespace closroute
