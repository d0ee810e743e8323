#pragma once

// Evacuation-network benchmark: a directed graph with lognormal edge
// capacities and travel times, candidate paths per source, and a
// discrete-time congestion simulation whose output is the clearance time
// of one evacuation plan.

#include <cstdint>
#include <string>
#include <vector>

#include "topm/errors.hpp"
#include "topm/policies.hpp"
#include "topm/rng.hpp"

namespace topm {

// Parameters of a lognormal with the requested mean and variance.
struct LognormalParams {
  double mu_log = 0.0;
  double var_log = 0.0;
};
LognormalParams lognormal_params(double mean, double var);

struct EvacuationNetwork {
  enum class NodeKind { Source, Intermediate, Destination };

  struct Node {
    int id = 0;
    NodeKind kind = NodeKind::Intermediate;
  };

  struct Edge {
    int from = 0, to = 0;
    double mean_capacity = 0, var_capacity = 0;
    double mean_time = 0, var_time = 0;
  };

  struct SourceInfo {
    int node = 0;
    int population = 0;
  };

  struct CandidatePath {
    int source = 0;           // source node id
    std::vector<int> nodes;   // node id sequence, source ... destination
    std::vector<int> edges;   // resolved edge indices (filled by validate)
  };

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<SourceInfo> sources;
  std::vector<CandidatePath> paths;

  // Candidate path indices per source, in source order.
  std::vector<std::vector<int>> paths_by_source;

  // Resolves path edges and checks structural consistency; throws
  // ValidationError on unknown nodes/edges, paths that do not run from
  // their source to a destination, or degenerate paths.
  void validate();
};

EvacuationNetwork load_network(const std::string& json_text);

// The 22-node / 33-edge benchmark instance with four source nodes and the
// three candidate paths per source.
const EvacuationNetwork& builtin_network();
std::string builtin_network_json();

// An evacuation plan: for each source (in source order), the chosen
// candidate paths (indices into paths_by_source[s]).
struct Plan {
  std::vector<std::vector<int>> choice;
};

// All plans that pick 2 of the candidate paths per source, ordered
// lexicographically by per-source pair index.
std::vector<Plan> enumerate_plans(const EvacuationNetwork& net);

// One draw of every edge attribute.
struct SampledAttributes {
  std::vector<double> capacity;  // per edge
  std::vector<double> time;      // per edge
};
SampledAttributes sample_attributes(const EvacuationNetwork& net,
                                    rng::Sequence& rng);

struct PathMetrics {
  double travel_time = 0;  // sum of edge travel times
  double flow = 0;         // minimum edge capacity
};
PathMetrics path_metrics(const EvacuationNetwork& net, int path_index,
                         const SampledAttributes& attrs);

// Time at which a source finishes evacuating when each of its paths
// delivers its flow per time unit after the path travel time: the ceiling
// formula over combined flows. Used as the congestion priority key.
int source_evac_time(double population,
                     const std::vector<PathMetrics>& paths);

// One clearance draw: samples attributes, splits each source's population
// across its chosen paths so all finish together, then runs a
// discrete-time release where each edge admits at most its sampled
// capacity per time unit. Contending sources release in order of
// decreasing source evacuation time (ties by source order). Returns the
// time the final group reaches a destination.
double simulate_clearance(const EvacuationNetwork& net, const Plan& plan,
                          rng::Sequence& rng);

struct ClearanceEstimate {
  int plan = 0;
  double mean = 0;
  double se = 0;
};

// Mean clearance time of each plan over the given number of draws, using
// one counter stream per (plan, draw). Results are deterministic for a
// fixed seed regardless of threads.
std::vector<ClearanceEstimate> estimate_clearance(
    const EvacuationNetwork& net, const std::vector<Plan>& plans,
    std::uint32_t draws, std::uint64_t seed, int threads = 1);

// Observation stream for running selection policies on the evacuation
// problem; observations are negated clearance times so that "largest mean"
// selects the fastest plans.
class EvacSource final : public ObservationSource {
 public:
  EvacSource(const EvacuationNetwork& net, const std::vector<Plan>& plans,
             std::uint64_t seed, std::uint64_t macro)
      : net_(&net), plans_(&plans), seed_(seed), macro_(macro) {}

  int alternatives() const override {
    return static_cast<int>(plans_->size());
  }
  double observe(int alt, std::uint32_t idx) const override {
    rng::Sequence seq(
        rng::derive_key(seed_, rng::kTagObservation, macro_, alt, idx));
    return -simulate_clearance(*net_, (*plans_)[alt], seq);
  }

 private:
  const EvacuationNetwork* net_;
  const std::vector<Plan>* plans_;
  std::uint64_t seed_, macro_;
};

}  // namespace topm
