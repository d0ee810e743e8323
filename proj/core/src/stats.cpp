#include "topm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace topm {

PosteriorParams posterior(const AlternativeStat& stat, double plug_in_var) {
  if (!(plug_in_var > 0.0))
    throw DomainError("plug-in variance must be positive");
  const auto t = static_cast<double>(stat.count());
  if (stat.prior.kind == PriorSpec::Kind::Uninformative) {
    if (stat.count() == 0)
      throw DegenerateState(
          "uninformative posterior needs >= 1 observation");
    return {stat.sample_mean(), plug_in_var / t};
  }
  const double prec = 1.0 / stat.prior.var0 + t / plug_in_var;
  const double var = 1.0 / prec;
  const double weighted = stat.prior.mu0 / stat.prior.var0 +
                          (stat.count() > 0
                               ? t * stat.sample_mean() / plug_in_var
                               : 0.0);
  return {var * weighted, var};
}

double lookahead_variance(const AlternativeStat& stat, double plug_in_var) {
  if (!(plug_in_var > 0.0))
    throw DomainError("plug-in variance must be positive");
  const auto t1 = static_cast<double>(stat.count() + 1);
  if (stat.prior.kind == PriorSpec::Kind::Uninformative)
    return plug_in_var / t1;
  return 1.0 / (1.0 / stat.prior.var0 + t1 / plug_in_var);
}

std::vector<int> rank_by_mean(std::span<const PosteriorParams> posteriors) {
  std::vector<int> idx(posteriors.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (posteriors[a].mean != posteriors[b].mean)
      return posteriors[a].mean > posteriors[b].mean;
    return a < b;
  });
  return idx;
}

PcsEstimate posterior_pcs_mc(std::span<const PosteriorParams> posteriors,
                             int m, std::uint64_t n_draws,
                             rng::Sequence& rng) {
  const int k = static_cast<int>(posteriors.size());
  if (m < 1 || m >= k) throw InvalidM(m, k);
  const std::vector<int> ranked = rank_by_mean(posteriors);

  std::vector<double> sd(posteriors.size());
  for (std::size_t i = 0; i < posteriors.size(); ++i)
    sd[i] = std::sqrt(posteriors[i].var);

  std::uint64_t hits = 0;
  for (std::uint64_t rep = 0; rep < n_draws; ++rep) {
    double top_min = std::numeric_limits<double>::infinity();
    double rest_max = -std::numeric_limits<double>::infinity();
    for (int pos = 0; pos < k; ++pos) {
      const int i = ranked[pos];
      const double draw = posteriors[i].mean + sd[i] * rng.normal();
      if (pos < m)
        top_min = std::min(top_min, draw);
      else
        rest_max = std::max(rest_max, draw);
    }
    if (top_min > rest_max) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n_draws);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n_draws));
  return {p, se};
}

double vfa_distance(const PosteriorParams& top,
                    const PosteriorParams& bottom) {
  return (top.mean - bottom.mean) / std::sqrt(top.var + bottom.var);
}

double vfa_current(std::span<const PosteriorParams> posteriors, int m) {
  const int k = static_cast<int>(posteriors.size());
  if (m < 1 || m >= k) throw InvalidM(m, k);
  const std::vector<int> ranked = rank_by_mean(posteriors);
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < m; ++a) {
    for (int b = m; b < k; ++b) {
      const double d =
          vfa_distance(posteriors[ranked[a]], posteriors[ranked[b]]);
      best = std::min(best, d * d);
    }
  }
  return best;
}

}  // namespace topm
