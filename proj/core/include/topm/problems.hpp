#pragma once

// Built-in synthetic problem families: how true means are generated, the
// per-alternative sampling variances, and the published run settings
// (initialization rounds and total budget) for each experiment id.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topm/errors.hpp"
#include "topm/policies.hpp"
#include "topm/rng.hpp"

namespace topm {

struct SyntheticSpec {
  enum class MeanGen {
    FixedLinear,   // mu_i = i (1-based)
    GaussianDraw,  // mu_i ~ N(0, mean_sd(i)^2) per macro replication
  };

  int k = 2;
  int m = 1;
  int n0 = 10;
  std::uint64_t budget = 1000;
  MeanGen mean_gen = MeanGen::FixedLinear;
  std::vector<double> mean_sd;   // per alternative, GaussianDraw only
  std::vector<double> noise_sd;  // per-alternative sampling std deviation
  bool known_variance = false;   // feed the true variances to the policies

  void validate() const;

  // True means for one macro replication, derived from the seed so every
  // policy in the same macro sees the same problem instance.
  std::vector<double> draw_means(std::uint64_t seed,
                                 std::uint64_t macro) const;
};

enum class ExperimentId { E1, E2, E3, E4, A01, A02, A03 };

std::optional<ExperimentId> parse_experiment(const std::string& name);
const char* to_string(ExperimentId id);

SyntheticSpec make_experiment(ExperimentId id);

// Observation stream for one macro replication of a synthetic problem:
// observe(alt, idx) is the idx-th draw of that alternative, shared across
// policies through the counter-based stream.
class SyntheticSource final : public ObservationSource {
 public:
  SyntheticSource(std::vector<double> means, std::vector<double> noise_sd,
                  std::uint64_t seed, std::uint64_t macro);

  int alternatives() const override {
    return static_cast<int>(means_.size());
  }
  double observe(int alt, std::uint32_t idx) const override {
    return means_[alt] + noise_sd_[alt] * rng::normal_at(keys_[alt], idx);
  }
  const std::vector<double>& means() const { return means_; }

 private:
  std::vector<double> means_, noise_sd_;
  std::vector<std::uint64_t> keys_;
};

}  // namespace topm
