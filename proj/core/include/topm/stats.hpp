#pragma once

// Per-alternative sampling statistics, conjugate-normal posteriors, and the
// inscribed-ball value function computed from them.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "topm/errors.hpp"
#include "topm/rng.hpp"

namespace topm {

// Degenerate sample variances (all observations identical) are clamped to
// this floor so pairwise distances stay finite.
inline constexpr double kVarFloor = 1e-12;

struct PriorSpec {
  enum class Kind { Uninformative, NormalConjugate };

  Kind kind = Kind::Uninformative;
  double mu0 = 0.0;
  double var0 = 0.0;

  static PriorSpec uninformative() { return {}; }

  static PriorSpec normal(double mu0, double var0) {
    if (!(var0 > 0.0)) throw DomainError("prior variance must be positive");
    return {Kind::NormalConjugate, mu0, var0};
  }
};

// Streaming moments of one alternative (Welford accumulation) plus its
// variance model: a known sampling variance when available, otherwise the
// sample variance is plugged in.
class AlternativeStat {
 public:
  PriorSpec prior{};
  std::optional<double> known_var{};

  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  std::uint64_t count() const noexcept { return n_; }

  double sample_mean() const {
    if (n_ == 0) throw DegenerateState("sample mean needs >= 1 observation");
    return mean_;
  }

  double sample_variance() const {
    if (n_ < 2)
      throw DegenerateState("sample variance needs >= 2 observations");
    const double v = m2_ / static_cast<double>(n_ - 1);
    return v > 0.0 ? v : 0.0;
  }

  double sum() const noexcept { return mean_ * static_cast<double>(n_); }

  double sum_sq() const noexcept {
    return m2_ + static_cast<double>(n_) * mean_ * mean_;
  }

  // Sampling variance used in posterior updates: the known variance if one
  // was declared, else the clamped sample variance.
  double plug_in_variance() const {
    if (known_var) return *known_var;
    const double v = sample_variance();
    return v > kVarFloor ? v : kVarFloor;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct PosteriorParams {
  double mean = 0.0;
  double var = 0.0;
};

// Posterior of the unknown mean given the collected observations and a
// plugged-in sampling variance. Uninformative prior requires >= 1
// observation.
PosteriorParams posterior(const AlternativeStat& stat, double plug_in_var);

inline PosteriorParams posterior(const AlternativeStat& stat) {
  return posterior(stat, stat.plug_in_variance());
}

// Posterior variance after one hypothetical extra observation; the
// posterior mean is unchanged under certainty equivalence.
double lookahead_variance(const AlternativeStat& stat, double plug_in_var);

struct PcsEstimate {
  double value = 0.0;
  double se = 0.0;
};

// Monte Carlo estimate of the probability that every alternative currently
// ranked in the top m beats every other alternative, under independent
// posterior draws. The top-m set is fixed by the posterior means.
PcsEstimate posterior_pcs_mc(std::span<const PosteriorParams> posteriors,
                             int m, std::uint64_t n_draws,
                             rng::Sequence& rng);

// Distance from the origin to one separating hyperplane: posterior mean gap
// scaled by the posterior standard deviation of the difference.
double vfa_distance(const PosteriorParams& top, const PosteriorParams& bottom);

// Squared radius of the largest ball inscribed in the correct-selection
// region: the minimum vfa_distance^2 over all top/bottom pairs after
// ranking by posterior mean (ties keep input order).
double vfa_current(std::span<const PosteriorParams> posteriors, int m);

// Indices sorted by posterior mean, descending; ties by original index.
std::vector<int> rank_by_mean(std::span<const PosteriorParams> posteriors);

}  // namespace topm
