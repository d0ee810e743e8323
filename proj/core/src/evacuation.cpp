#include "topm/evacuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace topm {

namespace {
using nlohmann::json;

long long edge_key(int from, int to) {
  return static_cast<long long>(from) * 1000000 + to;
}

EvacuationNetwork::NodeKind parse_kind(const std::string& s) {
  if (s == "source") return EvacuationNetwork::NodeKind::Source;
  if (s == "intermediate") return EvacuationNetwork::NodeKind::Intermediate;
  if (s == "destination") return EvacuationNetwork::NodeKind::Destination;
  throw ValidationError("unknown node kind: " + s);
}

}  // namespace

LognormalParams lognormal_params(double mean, double var) {
  if (!(mean > 0.0) || !(var > 0.0))
    throw DomainError("lognormal moments must be positive");
  LognormalParams p;
  p.mu_log = std::log(mean * mean / std::sqrt(var + mean * mean));
  p.var_log = std::log(var / (mean * mean) + 1.0);
  return p;
}

void EvacuationNetwork::validate() {
  std::unordered_map<int, NodeKind> kind_of;
  for (const auto& n : nodes) {
    if (!kind_of.emplace(n.id, n.kind).second)
      throw ValidationError("duplicate node id " + std::to_string(n.id));
  }
  bool has_destination = false;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::Destination) has_destination = true;
  if (!has_destination) throw ValidationError("network has no destination");

  std::unordered_map<long long, int> edge_index;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!kind_of.count(edges[e].from) || !kind_of.count(edges[e].to))
      throw ValidationError("edge references unknown node");
    if (!(edges[e].mean_capacity > 0) || !(edges[e].mean_time > 0) ||
        !(edges[e].var_capacity > 0) || !(edges[e].var_time > 0))
      throw ValidationError("edge attributes must be positive");
    edge_index[edge_key(edges[e].from, edges[e].to)] = static_cast<int>(e);
  }

  std::unordered_map<int, int> source_order;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    auto it = kind_of.find(sources[s].node);
    if (it == kind_of.end() || it->second != NodeKind::Source)
      throw ValidationError("population attached to a non-source node");
    if (sources[s].population < 0)
      throw ValidationError("population must be nonnegative");
    source_order[sources[s].node] = static_cast<int>(s);
  }

  paths_by_source.assign(sources.size(), {});
  for (std::size_t p = 0; p < paths.size(); ++p) {
    auto& path = paths[p];
    if (path.nodes.size() < 2)
      throw ValidationError("path must contain at least one edge");
    if (path.nodes.front() != path.source)
      throw ValidationError("path must start at its source node");
    if (kind_of.at(path.nodes.back()) != NodeKind::Destination)
      throw ValidationError("path must end at a destination node");
    path.edges.clear();
    for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
      auto it = edge_index.find(edge_key(path.nodes[i], path.nodes[i + 1]));
      if (it == edge_index.end())
        throw ValidationError("path uses unknown edge " +
                              std::to_string(path.nodes[i]) + "->" +
                              std::to_string(path.nodes[i + 1]));
      path.edges.push_back(it->second);
    }
    auto so = source_order.find(path.source);
    if (so == source_order.end())
      throw ValidationError("path source has no population entry");
    paths_by_source[so->second].push_back(static_cast<int>(p));
  }
}

EvacuationNetwork load_network(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad network JSON: ") + e.what());
  }
  EvacuationNetwork net;
  try {
    for (const auto& n : j.at("nodes"))
      net.nodes.push_back(
          {n.at("id").get<int>(), parse_kind(n.at("kind").get<std::string>())});
    for (const auto& e : j.at("edges"))
      net.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(),
                           e.at("mean_capacity").get<double>(),
                           e.at("var_capacity").get<double>(),
                           e.at("mean_time").get<double>(),
                           e.at("var_time").get<double>()});
    for (const auto& s : j.at("sources"))
      net.sources.push_back(
          {s.at("node").get<int>(), s.at("population").get<int>()});
    for (const auto& p : j.at("paths")) {
      EvacuationNetwork::CandidatePath path;
      path.source = p.at("source").get<int>();
      for (const auto& n : p.at("nodes")) path.nodes.push_back(n.get<int>());
      net.paths.push_back(std::move(path));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad network JSON: ") + e.what());
  }
  net.validate();
  return net;
}

std::string builtin_network_json() {
  // 22 nodes, 33 edges, four populated sources, three destinations, and
  // three candidate paths per source. Capacity variance 1, travel-time
  // variance 0.01 on every edge.
  static const char* kJson = R"JSON({
  "nodes": [
    {"id": 1, "kind": "source"}, {"id": 2, "kind": "source"},
    {"id": 3, "kind": "source"}, {"id": 4, "kind": "source"},
    {"id": 5, "kind": "intermediate"}, {"id": 6, "kind": "intermediate"},
    {"id": 7, "kind": "intermediate"}, {"id": 8, "kind": "intermediate"},
    {"id": 9, "kind": "intermediate"}, {"id": 10, "kind": "intermediate"},
    {"id": 11, "kind": "intermediate"}, {"id": 12, "kind": "intermediate"},
    {"id": 13, "kind": "intermediate"}, {"id": 14, "kind": "intermediate"},
    {"id": 15, "kind": "intermediate"}, {"id": 16, "kind": "intermediate"},
    {"id": 17, "kind": "intermediate"}, {"id": 18, "kind": "intermediate"},
    {"id": 19, "kind": "intermediate"}, {"id": 20, "kind": "destination"},
    {"id": 21, "kind": "destination"}, {"id": 22, "kind": "destination"}
  ],
  "edges": [
    {"from": 1, "to": 7, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 7, "to": 12, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 12, "to": 20, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 1, "to": 6, "mean_capacity": 10, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 6, "to": 7, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 1, "to": 5, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 5, "to": 9, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 9, "to": 16, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 16, "to": 22, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 2, "to": 8, "mean_capacity": 20, "var_capacity": 1, "mean_time": 4, "var_time": 0.01},
    {"from": 8, "to": 12, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 2, "to": 10, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 10, "to": 9, "mean_capacity": 10, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 10, "to": 11, "mean_capacity": 20, "var_capacity": 1, "mean_time": 4, "var_time": 0.01},
    {"from": 11, "to": 12, "mean_capacity": 20, "var_capacity": 1, "mean_time": 4, "var_time": 0.01},
    {"from": 3, "to": 14, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 14, "to": 18, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 18, "to": 19, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 19, "to": 21, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 3, "to": 13, "mean_capacity": 10, "var_capacity": 1, "mean_time": 4, "var_time": 0.01},
    {"from": 13, "to": 12, "mean_capacity": 20, "var_capacity": 1, "mean_time": 4, "var_time": 0.01},
    {"from": 14, "to": 15, "mean_capacity": 20, "var_capacity": 1, "mean_time": 4, "var_time": 0.01},
    {"from": 15, "to": 19, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 4, "to": 14, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 4, "to": 17, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 17, "to": 16, "mean_capacity": 10, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 17, "to": 18, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 5, "to": 6, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 8, "to": 7, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01},
    {"from": 11, "to": 15, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 13, "to": 18, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 6, "to": 11, "mean_capacity": 20, "var_capacity": 1, "mean_time": 3, "var_time": 0.01},
    {"from": 15, "to": 16, "mean_capacity": 20, "var_capacity": 1, "mean_time": 2, "var_time": 0.01}
  ],
  "sources": [
    {"node": 1, "population": 250},
    {"node": 2, "population": 350},
    {"node": 3, "population": 305},
    {"node": 4, "population": 180}
  ],
  "paths": [
    {"source": 1, "nodes": [1, 7, 12, 20]},
    {"source": 1, "nodes": [1, 6, 7, 12, 20]},
    {"source": 1, "nodes": [1, 5, 9, 16, 22]},
    {"source": 2, "nodes": [2, 8, 12, 20]},
    {"source": 2, "nodes": [2, 10, 9, 16, 22]},
    {"source": 2, "nodes": [2, 10, 11, 12, 20]},
    {"source": 3, "nodes": [3, 14, 18, 19, 21]},
    {"source": 3, "nodes": [3, 13, 12, 20]},
    {"source": 3, "nodes": [3, 14, 15, 19, 21]},
    {"source": 4, "nodes": [4, 14, 18, 19, 21]},
    {"source": 4, "nodes": [4, 17, 16, 22]},
    {"source": 4, "nodes": [4, 17, 18, 19, 21]}
  ]
})JSON";
  return kJson;
}

const EvacuationNetwork& builtin_network() {
  static const EvacuationNetwork net = load_network(builtin_network_json());
  return net;
}

std::vector<Plan> enumerate_plans(const EvacuationNetwork& net) {
  const std::size_t ns = net.sources.size();
  std::vector<std::vector<std::pair<int, int>>> pair_lists(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto& cands = net.paths_by_source[s];
    if (cands.size() < 2)
      throw ValidationError("plan enumeration needs >= 2 candidate paths");
    for (std::size_t a = 0; a < cands.size(); ++a)
      for (std::size_t b = a + 1; b < cands.size(); ++b)
        pair_lists[s].push_back({static_cast<int>(a), static_cast<int>(b)});
  }
  std::vector<Plan> plans;
  std::vector<std::size_t> pick(ns, 0);
  while (true) {
    Plan plan;
    plan.choice.resize(ns);
    for (std::size_t s = 0; s < ns; ++s)
      plan.choice[s] = {pair_lists[s][pick[s]].first,
                        pair_lists[s][pick[s]].second};
    plans.push_back(std::move(plan));
    // odometer increment, last source fastest
    std::size_t s = ns;
    while (s > 0) {
      --s;
      if (++pick[s] < pair_lists[s].size()) break;
      pick[s] = 0;
      if (s == 0) return plans;
    }
  }
}

SampledAttributes sample_attributes(const EvacuationNetwork& net,
                                    rng::Sequence& rng) {
  SampledAttributes attrs;
  attrs.capacity.resize(net.edges.size());
  attrs.time.resize(net.edges.size());
  for (std::size_t e = 0; e < net.edges.size(); ++e) {
    const auto& edge = net.edges[e];
    const LognormalParams cap =
        lognormal_params(edge.mean_capacity, edge.var_capacity);
    const LognormalParams tt = lognormal_params(edge.mean_time, edge.var_time);
    attrs.capacity[e] = rng.lognormal(cap.mu_log, std::sqrt(cap.var_log));
    attrs.time[e] = rng.lognormal(tt.mu_log, std::sqrt(tt.var_log));
  }
  return attrs;
}

PathMetrics path_metrics(const EvacuationNetwork& net, int path_index,
                         const SampledAttributes& attrs) {
  PathMetrics m;
  m.flow = std::numeric_limits<double>::infinity();
  for (int e : net.paths[path_index].edges) {
    m.travel_time += attrs.time[e];
    m.flow = std::min(m.flow, attrs.capacity[e]);
  }
  return m;
}

int source_evac_time(double population,
                     const std::vector<PathMetrics>& paths) {
  double flow_sum = 0.0, offset = 0.0;
  for (const auto& p : paths) {
    flow_sum += p.flow;
    offset += (p.travel_time - 1.0) * p.flow;
  }
  if (!(flow_sum > 0.0)) throw ZeroFlow("no flow out of source");
  return static_cast<int>(std::ceil((population + offset) / flow_sum));
}

namespace {

struct Cohort {
  double size;
  int source;    // source order
  int path;      // position within the plan's choices for that source
  int wave;
  int edge_pos;  // next edge to enter, index into the path's edge list
};

struct PathSchedule {
  int path_index = -1;                // global candidate path index
  std::vector<int> durations;        // ceil of sampled edge travel times
  double flow = 0;
  std::vector<double> wave_sizes;
};

}  // namespace

double simulate_clearance(const EvacuationNetwork& net, const Plan& plan,
                          rng::Sequence& rng) {
  if (plan.choice.size() != net.sources.size())
    throw ValidationError("plan must choose paths for every source");
  const SampledAttributes attrs = sample_attributes(net, rng);

  const std::size_t ns = net.sources.size();
  std::vector<std::vector<PathSchedule>> schedule(ns);
  std::vector<int> priority_time(ns, 0);

  for (std::size_t s = 0; s < ns; ++s) {
    const double population = net.sources[s].population;
    std::vector<PathMetrics> metrics;
    for (int c : plan.choice[s]) {
      const int pi = net.paths_by_source[s].at(c);
      metrics.push_back(path_metrics(net, pi, attrs));
      PathSchedule ps;
      ps.path_index = pi;
      ps.flow = metrics.back().flow;
      for (int e : net.paths[pi].edges)
        ps.durations.push_back(
            std::max(1, static_cast<int>(std::ceil(attrs.time[e]))));
      schedule[s].push_back(std::move(ps));
    }
    priority_time[s] = source_evac_time(population, metrics);
    if (population <= 0.0) continue;

    // Split the population so all chosen paths finish together: find tau
    // with sum_r max(0, tau - (T_r - 1)) * F_r = population, then release
    // full-flow waves per path until its share is exhausted.
    std::vector<std::pair<double, double>> ramp;  // (start, flow)
    for (const auto& m : metrics) ramp.push_back({m.travel_time - 1.0, m.flow});
    std::sort(ramp.begin(), ramp.end());
    double tau = 0.0, slope = 0.0, offset = 0.0;
    for (std::size_t i = 0; i < ramp.size(); ++i) {
      slope += ramp[i].second;
      offset += ramp[i].first * ramp[i].second;
      tau = (population + offset) / slope;
      if (i + 1 == ramp.size() || tau <= ramp[i + 1].first) break;
    }
    for (std::size_t r = 0; r < metrics.size(); ++r) {
      const double share =
          std::max(0.0, tau - (metrics[r].travel_time - 1.0)) *
          metrics[r].flow;
      if (share <= 1e-12) continue;
      auto& ps = schedule[s][r];
      const int waves =
          static_cast<int>(std::ceil(share / metrics[r].flow - 1e-9));
      for (int w = 0; w < waves; ++w)
        ps.wave_sizes.push_back(
            w + 1 == waves ? share - (waves - 1) * metrics[r].flow
                           : metrics[r].flow);
    }
  }

  // Discrete-time admission: each edge accepts at most its sampled
  // capacity per time unit; contenders are served in priority order.
  std::map<int, std::vector<Cohort>> ready;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t r = 0; r < schedule[s].size(); ++r)
      for (std::size_t w = 0; w < schedule[s][r].wave_sizes.size(); ++w)
        ready[static_cast<int>(w)].push_back(
            {schedule[s][r].wave_sizes[w], static_cast<int>(s),
             static_cast<int>(r), static_cast<int>(w), 0});

  std::vector<std::vector<double>> used(net.edges.size());
  auto used_at = [&](int edge, int t) -> double& {
    auto& v = used[edge];
    if (static_cast<int>(v.size()) <= t) v.resize(t + 1, 0.0);
    return v[t];
  };
  auto earlier = [&](const Cohort& a, const Cohort& b) {
    if (priority_time[a.source] != priority_time[b.source])
      return priority_time[a.source] > priority_time[b.source];
    if (a.source != b.source) return a.source < b.source;
    if (a.path != b.path) return a.path < b.path;
    if (a.wave != b.wave) return a.wave < b.wave;
    return a.edge_pos > b.edge_pos;
  };

  double clearance = 0.0;
  const int horizon = 1000000;
  while (!ready.empty()) {
    const int t = ready.begin()->first;
    if (t > horizon) throw Error("evacuation simulation exceeded horizon");
    std::vector<Cohort> batch = std::move(ready.begin()->second);
    ready.erase(ready.begin());
    std::sort(batch.begin(), batch.end(), earlier);
    for (const Cohort& c : batch) {
      const auto& ps = schedule[c.source][c.path];
      const auto& path_edges = net.paths[ps.path_index].edges;
      const int edge = path_edges[c.edge_pos];
      double& consumed = used_at(edge, t);
      const double residual = attrs.capacity[edge] - consumed;
      double moved = 0.0;
      if (residual > 1e-9) {
        moved = std::min(c.size, residual);
        consumed += moved;
        const int arrive = t + ps.durations[c.edge_pos];
        if (c.edge_pos + 1 == static_cast<int>(path_edges.size())) {
          clearance = std::max(clearance, static_cast<double>(arrive));
        } else {
          ready[arrive].push_back(
              {moved, c.source, c.path, c.wave, c.edge_pos + 1});
        }
      }
      const double remainder = c.size - moved;
      if (remainder > 1e-9)
        ready[t + 1].push_back(
            {remainder, c.source, c.path, c.wave, c.edge_pos});
    }
  }
  return clearance;
}

std::vector<ClearanceEstimate> estimate_clearance(
    const EvacuationNetwork& net, const std::vector<Plan>& plans,
    std::uint32_t draws, std::uint64_t seed, int threads) {
  if (draws == 0) throw DomainError("need at least one draw");
  std::vector<ClearanceEstimate> out(plans.size());
  if (threads <= 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  const int nthreads =
      std::max(1, std::min<int>(threads, static_cast<int>(plans.size())));
  std::vector<std::thread> pool;
  auto work = [&](int offset) {
    for (std::size_t p = offset; p < plans.size(); p += nthreads) {
      double sum = 0.0, sumsq = 0.0;
      for (std::uint32_t d = 0; d < draws; ++d) {
        rng::Sequence seq(rng::derive_key(seed, rng::kTagObservation, p, d));
        const double c = simulate_clearance(net, plans[p], seq);
        sum += c;
        sumsq += c * c;
      }
      const double mean = sum / draws;
      const double var =
          draws > 1 ? std::max(0.0, (sumsq - draws * mean * mean) /
                                        (draws - 1.0))
                    : 0.0;
      out[p] = {static_cast<int>(p), mean, std::sqrt(var / draws)};
    }
  };
  for (int th = 0; th < nthreads; ++th) pool.emplace_back(work, th);
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace topm
