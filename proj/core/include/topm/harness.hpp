#pragma once

// Macro-replication experiment engine: runs every policy on common
// observation streams across many independent replications and aggregates
// selection-quality curves over a budget grid. Parallel across macros with
// a fixed reduction order, so results do not depend on the thread count.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "topm/evacuation.hpp"
#include "topm/policies.hpp"
#include "topm/problems.hpp"

namespace topm {

// Fixed-truth problem over an evacuation network: alternatives are plans,
// observations are negated clearance draws.
struct EvacProblem {
  EvacuationNetwork net;
  std::vector<Plan> plans;
  std::vector<double> true_means;  // negated expected clearance per plan
  int m = 5;
  int n0 = 10;
  std::uint64_t budget = 1500;
};

using Problem = std::variant<SyntheticSpec, EvacProblem>;

struct ExperimentConfig {
  Problem problem;
  std::vector<Policy> policies{std::begin(kStandardPolicies),
                               std::end(kStandardPolicies)};
  int macros = 100;
  std::uint64_t base_seed = 0;
  int threads = 1;      // <= 0 selects the hardware concurrency
  int checkpoints = 100;
  std::vector<std::uint64_t> grid;  // explicit checkpoints; overrides count

  // Budget grid actually used: the explicit grid when given, otherwise
  // `checkpoints` evenly spaced points over (k*n0, budget]. Throws
  // ValidationError on malformed settings.
  std::vector<std::uint64_t> resolved_grid() const;
};

struct CurvePoint {
  std::uint64_t budget = 0;
  double ipcs = 0, ipcs_se = 0;
  double eoc = 0, eoc_se = 0;
};

struct PolicyCurve {
  Policy policy{};
  std::vector<CurvePoint> points;
  // Mean empirical sampling ratios at each checkpoint, [checkpoint][alt].
  std::vector<std::vector<double>> mean_ratios;
};

struct ExperimentResult {
  std::vector<std::uint64_t> grid;
  std::vector<PolicyCurve> curves;
  int k = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Opportunity cost of a selected set: the best achievable sum of m true
// means minus the selected sum; zero exactly when the selection is correct.
double eoc(std::span<const double> true_means, std::span<const int> selected,
           int m);

// Empirical sampling ratios t_i/t at each checkpoint, reconstructed from a
// recorded trace.
std::vector<std::vector<double>> ratio_trajectory(
    const RunTrace& trace, int k, int n0,
    std::span<const std::uint64_t> checkpoints);

// Deterministic text emission (LF line endings, fixed column order).
std::string curves_csv(const ExperimentResult& result);
std::string ratios_csv(const ExperimentResult& result);
std::string metadata_json(const ExperimentConfig& config,
                          double wall_seconds);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace topm
