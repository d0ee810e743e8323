#pragma once

// Pairwise misordering rate functions, the decay rate of the probability of
// false selection, and the solver for the sampling ratios that maximize it.

#include <cstdint>
#include <span>
#include <vector>

#include "topm/errors.hpp"

namespace topm {

// Sampling distribution of one alternative for rate evaluation.
struct RateSpec {
  enum class Family { Normal, Exponential, Bernoulli };

  Family family = Family::Normal;
  double a = 0.0;  // Normal: mu, Exponential: rate, Bernoulli: q
  double b = 1.0;  // Normal: variance; unused otherwise

  static RateSpec normal(double mu, double var) {
    if (!(var > 0.0)) throw DomainError("normal variance must be positive");
    return {Family::Normal, mu, var};
  }
  static RateSpec exponential(double rate) {
    if (!(rate > 0.0)) throw DomainError("exponential rate must be positive");
    return {Family::Exponential, rate, 0.0};
  }
  static RateSpec bernoulli(double q) {
    if (!(q > 0.0 && q < 1.0))
      throw DomainError("bernoulli success probability must be in (0,1)");
    return {Family::Bernoulli, q, 0.0};
  }

  double mean() const;
  double variance() const;

  // Convex conjugate of the cumulant generating function and its first two
  // derivatives in x.
  double conjugate(double x) const;
  double conjugate_d1(double x) const;
  double conjugate_d2(double x) const;
};

// Closed-form pairwise rate for two normal alternatives; zero on the ratio
// boundary.
double rate_normal(const RateSpec& top, const RateSpec& bottom, double r_top,
                   double r_bottom);

// Minimizer of r_top * conj_top(x) + r_bottom * conj_bottom(x) for two
// normal alternatives: the precision-weighted mean of the two means.
double infimum_point_normal(const RateSpec& top, const RateSpec& bottom,
                            double r_top, double r_bottom);

// Pairwise rate for any supported family, via 1-D minimization of the
// weighted conjugates over x between the two means. Deliberately does not
// shortcut to the closed form for normal inputs so it can serve as an
// independent route against rate_normal.
double rate_generic(const RateSpec& top, const RateSpec& bottom, double r_top,
                    double r_bottom);

struct PfsRate {
  double rate = 0.0;
  int top_index = -1;     // original index of the top-side member
  int bottom_index = -1;  // original index of the bottom-side member
};

// Decay rate of the probability of false selection: the minimum pairwise
// rate over all top/bottom pairs after ranking by true mean. Uses the
// closed form when both members are normal.
PfsRate pfs_rate(std::span<const RateSpec> specs, int m,
                 std::span<const double> ratios);

// Exhaustive search over the simplex lattice with the given step; the
// brute-force reference for the solver. k <= 5.
std::vector<double> solve_ratios_grid(std::span<const RateSpec> specs, int m,
                                      double grid_step);

struct RatioResiduals {
  double optrate = 0.0;  // max mismatch between per-alternative minimum rates
  double balance = 0.0;  // |sum_top r^2/var - sum_rest r^2/var|
};

// Optimality diagnostics at a candidate ratio vector. The balance term is
// the exact stationarity condition under normal sampling; for other
// families it is evaluated with the family variance and is a diagnostic
// only.
RatioResiduals ratio_condition_residuals(std::span<const RateSpec> specs,
                                         int m,
                                         std::span<const double> ratios);

struct OptimalRatioResult {
  std::vector<double> r_star;  // aligned with the input order, sums to 1
  double z_star = 0.0;
  double optrate_residual = 0.0;
  double balance_residual = 0.0;
  std::vector<std::vector<double>> pair_rates;  // [top][bottom], ranked order
};

// Maximizes the minimum pairwise rate over the probability simplex.
// Smoothed concave ascent locates the optimum; an active-set Newton polish
// drives the stationarity residuals to tolerance. Throws NoConvergence when
// the evaluation budget is exhausted first.
OptimalRatioResult solve_ratios(std::span<const RateSpec> specs, int m,
                                double tol = 1e-9,
                                std::uint64_t max_evals = 1'000'000);

// Same solver restricted to normal specs.
OptimalRatioResult solve_ratios_normal(std::span<const RateSpec> specs, int m,
                                       double tol = 1e-9,
                                       std::uint64_t max_evals = 1'000'000);

}  // namespace topm
