#pragma once

// Sequential allocation rules: the one-step-lookahead rule and five
// budget-allocation baselines, plus the engine that runs one sequential
// replication to a fixed budget.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topm/rng.hpp"
#include "topm/stats.hpp"

namespace topm {

enum class Policy {
  Ea,
  Ocbam,
  OcbamCorg,
  OcbamPlus,
  Ocbass,
  Ocbasss,
  Aoam,
};

// The six procedures compared in experiments (Corg is a variant, not a
// default participant).
inline constexpr Policy kStandardPolicies[] = {
    Policy::Ea,     Policy::Ocbam,   Policy::OcbamPlus,
    Policy::Ocbass, Policy::Ocbasss, Policy::Aoam,
};

const char* to_string(Policy p);
std::optional<Policy> parse_policy(std::string_view name);

enum class OcbamC { Corg, Cadp };

struct PolicyState {
  std::vector<AlternativeStat> stats;
  int m = 1;
  rng::Sequence rng{0};

  std::uint64_t step() const {
    std::uint64_t t = 0;
    for (const auto& s : stats) t += s.count();
    return t;
  }
};

struct AllocationDecision {
  int chosen = -1;
  std::vector<double> scores;  // per-alternative decision values
};

// Lookahead value of giving the candidate one more replication: the
// inscribed-ball radius squared recomputed with the candidate's posterior
// variance shrunk one step.
double aoam_lookahead(const PolicyState& state, int candidate);

AllocationDecision aoam_select(const PolicyState& state);

// Least-sampled alternative, ties to the smallest index.
AllocationDecision ea_select(const PolicyState& state);

// Separating level between the ranked m-th and (m+1)-th sample means.
double ocbam_c(const PolicyState& state, OcbamC variant);

AllocationDecision ocbam_select(const PolicyState& state,
                                OcbamC variant = OcbamC::Cadp);

AllocationDecision ocbam_plus_select(const PolicyState& state);

AllocationDecision ocbass_select(const PolicyState& state);

// Picks uniformly between the two members of the globally minimizing
// pairwise statistic; consumes one draw from the state's stream.
AllocationDecision ocbasss_select(PolicyState& state);

AllocationDecision select(Policy policy, PolicyState& state);

// Source of observations for a sequential run. observe(alt, idx) must be a
// pure function of its arguments so that runs are reproducible and
// replications can share observation streams.
class ObservationSource {
 public:
  virtual ~ObservationSource() = default;
  virtual int alternatives() const = 0;
  virtual double observe(int alt, std::uint32_t idx) const = 0;
};

struct RunTrace {
  std::vector<std::int32_t> allocations;  // choices after initialization
  std::vector<std::uint32_t> final_counts;
  std::vector<int> selected;  // top-m posterior means at the final budget
};

// One sequential replication: n0 rounds of initialization for every
// alternative, then one allocation per step until the budget is exhausted.
// Incrementally maintains posteriors and the ranking so per-step work stays
// proportional to the pair count.
class SequentialRun {
 public:
  // known_var: per-alternative sampling variances when known; empty to plug
  // in sample variances.
  SequentialRun(const ObservationSource& source, Policy policy, int m, int n0,
                std::uint64_t policy_seed,
                std::span<const double> known_var = {});

  void initialize();
  int step();  // one allocation + observation; returns the chosen index
  void run_until(std::uint64_t total_budget);

  std::uint64_t total() const { return total_; }
  int alternatives() const { return k_; }
  std::span<const std::uint32_t> counts() const { return counts_; }
  std::span<const double> posterior_means() const { return post_mean_; }
  std::span<const double> posterior_vars() const { return post_var_; }
  std::vector<int> selected_top_m() const;
  const std::vector<std::int32_t>& allocations() const { return alloc_; }

 private:
  void refresh(int alt);
  void reposition(int alt);
  int choose();

  const ObservationSource& source_;
  Policy policy_;
  int k_, m_, n0_;
  rng::Sequence rng_;
  std::vector<double> known_var_;

  std::vector<AlternativeStat> stats_;
  std::vector<std::uint32_t> counts_;
  std::vector<double> post_mean_, post_var_, look_var_, samp_mean_, sigma_;
  std::vector<int> ranked_, pos_of_;
  std::vector<std::int32_t> alloc_;
  std::uint64_t total_ = 0;
  bool initialized_ = false;

  // scratch reused across steps
  std::vector<double> pair_val_, row_min_, col_min_, scores_;
};

RunTrace run_policy(const ObservationSource& source, Policy policy, int m,
                    int n0, std::uint64_t budget, std::uint64_t seed,
                    std::span<const double> known_var = {});

}  // namespace topm
