#include "topm/rates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace topm {

namespace {

constexpr double kMeanGap = 1e-12;

struct Ranked {
  std::vector<int> order;     // ranked position -> original index
  std::vector<double> means;  // ranked order
};

Ranked rank_specs(std::span<const RateSpec> specs, int m) {
  const int k = static_cast<int>(specs.size());
  if (m < 1 || m >= k) throw InvalidM(m, k);
  Ranked r;
  r.order.resize(k);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    const double ma = specs[a].mean(), mb = specs[b].mean();
    if (ma != mb) return ma > mb;
    return a < b;
  });
  r.means.resize(k);
  for (int i = 0; i < k; ++i) r.means[i] = specs[r.order[i]].mean();
  return r;
}

void check_distinct_means(const Ranked& ranked) {
  for (std::size_t i = 1; i < ranked.means.size(); ++i)
    if (ranked.means[i - 1] - ranked.means[i] <= kMeanGap)
      throw DomainError("alternative means must be distinct");
}

// Value, gradient and Hessian of one pairwise rate at interior ratios,
// expressed through the minimizing point x* (envelope differentiation).
struct PairEval {
  double val, ga, gb, haa, hab, hbb;
};

double minimizing_point(const RateSpec& sa, const RateSpec& sb, double ra,
                        double rb) {
  if (sa.family == RateSpec::Family::Normal &&
      sb.family == RateSpec::Family::Normal) {
    const double wa = ra / sa.b, wb = rb / sb.b;
    return (wa * sa.a + wb * sb.a) / (wa + wb);
  }
  double lo = std::min(sa.mean(), sb.mean());
  double hi = std::max(sa.mean(), sb.mean());
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double d = ra * sa.conjugate_d1(mid) + rb * sb.conjugate_d1(mid);
    if (d < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

PairEval pair_eval(const RateSpec& sa, const RateSpec& sb, double ra,
                   double rb) {
  const double x = minimizing_point(sa, sb, ra, rb);
  const double fa = sa.conjugate(x), fb = sb.conjugate(x);
  const double da = sa.conjugate_d1(x), db = sb.conjugate_d1(x);
  const double denom = ra * sa.conjugate_d2(x) + rb * sb.conjugate_d2(x);
  PairEval e;
  e.val = ra * fa + rb * fb;
  e.ga = fa;
  e.gb = fb;
  e.haa = -da * da / denom;
  e.hab = -da * db / denom;
  e.hbb = -db * db / denom;
  return e;
}

double pair_rate(const RateSpec& sa, const RateSpec& sb, double ra,
                 double rb) {
  if (ra <= 0.0 || rb <= 0.0) return 0.0;
  if (sa.family == RateSpec::Family::Normal &&
      sb.family == RateSpec::Family::Normal)
    return rate_normal(sa, sb, ra, rb);
  return rate_generic(sa, sb, ra, rb);
}

std::uint64_t composition_count(int n, int k) {
  // C(n + k - 1, k - 1), saturating.
  unsigned __int128 c = 1;
  for (int i = 1; i < k; ++i) {
    c = c * static_cast<unsigned>(n + i) / static_cast<unsigned>(i);
    if (c > std::numeric_limits<std::uint64_t>::max() / 2)
      return std::numeric_limits<std::uint64_t>::max() / 2;
  }
  return static_cast<std::uint64_t>(c);
}

// Dense Gaussian elimination with partial pivoting; returns false on a
// numerically singular system.
bool solve_dense(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(a[col * n + col]);
    for (int row = col + 1; row < n; ++row) {
      const double v = std::fabs(a[row * n + col]);
      if (v > best) {
        best = v;
        piv = row;
      }
    }
    if (best < 1e-300) return false;
    if (piv != col) {
      for (int j = col; j < n; ++j) std::swap(a[piv * n + j], a[col * n + j]);
      std::swap(b[piv], b[col]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (int row = col + 1; row < n; ++row) {
      const double f = a[row * n + col] * inv;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a[row * n + j] -= f * a[col * n + j];
      b[row] -= f * b[col];
    }
  }
  for (int row = n - 1; row >= 0; --row) {
    double s = b[row];
    for (int j = row + 1; j < n; ++j) s -= a[row * n + j] * b[j];
    b[row] = s / a[row * n + row];
  }
  return true;
}

struct Pair {
  int a;  // ranked top position
  int b;  // ranked bottom position
};

class MinRateProblem {
 public:
  MinRateProblem(std::span<const RateSpec> specs, int m,
                 std::uint64_t max_evals)
      : specs_(specs.begin(), specs.end()),
        m_(m),
        k_(static_cast<int>(specs.size())),
        max_evals_(max_evals),
        ranked_(rank_specs(specs, m)) {
    check_distinct_means(ranked_);
    for (int a = 0; a < m_; ++a)
      for (int b = m_; b < k_; ++b) pairs_.push_back({a, b});
  }

  const Ranked& ranked() const { return ranked_; }
  int k() const { return k_; }
  int num_pairs() const { return static_cast<int>(pairs_.size()); }
  const Pair& pair(int p) const { return pairs_[p]; }

  PairEval eval(int p, const std::vector<double>& r) {
    if (++evals_ > max_evals_)
      throw NoConvergence("ratio solver exceeded its evaluation budget");
    const Pair& pr = pairs_[p];
    return pair_eval(spec_at(pr.a), spec_at(pr.b), r[pr.a], r[pr.b]);
  }

  double value(int p, const std::vector<double>& r) { return eval(p, r).val; }

  const RateSpec& spec_at(int ranked_pos) const {
    return specs_[ranked_.order[ranked_pos]];
  }

 private:
  std::vector<RateSpec> specs_;
  int m_, k_;
  std::uint64_t max_evals_;
  std::uint64_t evals_ = 0;
  Ranked ranked_;
  std::vector<Pair> pairs_;
};

// Smoothed minimum of the pair rates: soft-min value and gradient.
struct SoftEval {
  double value;
  std::vector<double> grad;
  std::vector<double> weights;
  double hard_min;
};

SoftEval soft_min(MinRateProblem& prob, const std::vector<double>& r,
                  double beta) {
  const int P = prob.num_pairs();
  std::vector<PairEval> evals(P);
  double zmin = std::numeric_limits<double>::infinity();
  for (int p = 0; p < P; ++p) {
    evals[p] = prob.eval(p, r);
    zmin = std::min(zmin, evals[p].val);
  }
  double wsum = 0.0;
  std::vector<double> w(P);
  for (int p = 0; p < P; ++p) {
    w[p] = std::exp(-beta * (evals[p].val - zmin));
    wsum += w[p];
  }
  SoftEval out;
  out.hard_min = zmin;
  out.value = zmin - std::log(wsum) / beta;
  out.grad.assign(prob.k(), 0.0);
  out.weights.resize(P);
  for (int p = 0; p < P; ++p) {
    const double wp = w[p] / wsum;
    out.weights[p] = wp;
    out.grad[prob.pair(p).a] += wp * evals[p].ga;
    out.grad[prob.pair(p).b] += wp * evals[p].gb;
  }
  return out;
}

// Phase 1: exponentiated-gradient ascent on the soft-min with decreasing
// smoothing. Multiplicative updates keep the iterate in the interior of
// the simplex.
std::vector<double> smoothed_ascent(MinRateProblem& prob) {
  const int k = prob.k();
  std::vector<double> r(k, 1.0 / k);
  const double scale = std::max(soft_min(prob, r, 1.0).hard_min, 1e-12);
  for (double beta = 8.0 / scale; beta <= 2.0e7 / scale; beta *= 8.0) {
    SoftEval cur = soft_min(prob, r, beta);
    double step = 0.5;
    for (int it = 0; it < 600; ++it) {
      double gmax = 0.0;
      for (double g : cur.grad) gmax = std::max(gmax, std::fabs(g));
      if (gmax == 0.0) break;
      std::vector<double> cand(k);
      bool improved = false;
      for (int bt = 0; bt < 30; ++bt) {
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
          cand[i] = r[i] * std::exp(step * cur.grad[i] / gmax);
          sum += cand[i];
        }
        for (auto& x : cand) x /= sum;
        SoftEval next = soft_min(prob, cand, beta);
        if (next.value > cur.value) {
          r = cand;
          cur = next;
          step = std::min(step * 1.6, 4.0);
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
  }
  return r;
}

struct NewtonOutcome {
  bool ok = false;
  double z = 0.0;
};

// Phase 2: Newton on the stationarity system of the max-min program for a
// fixed set of binding pairs. Unknowns: ratios, pair multipliers, the
// common rate z, and the simplex multiplier.
NewtonOutcome newton_polish(MinRateProblem& prob, std::vector<double>& r,
                            std::vector<int>& active,
                            std::vector<double>& lambda) {
  const int k = prob.k();
  const int A = static_cast<int>(active.size());
  const int n = k + A + 2;
  std::vector<double> jac(n * n), rhs(n);
  std::vector<PairEval> evals(A);

  double z = std::numeric_limits<double>::infinity();
  for (int a = 0; a < A; ++a) {
    evals[a] = prob.eval(active[a], r);
    z = std::min(z, evals[a].val);
  }
  double gamma = 0.0;
  {
    std::vector<double> station(k, 0.0);
    for (int a = 0; a < A; ++a) {
      station[prob.pair(active[a]).a] += lambda[a] * evals[a].ga;
      station[prob.pair(active[a]).b] += lambda[a] * evals[a].gb;
    }
    for (int i = 0; i < k; ++i) gamma += station[i] / k;
  }

  const double fscale = std::max(z, 1e-9);
  double fnorm_prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 120; ++iter) {
    for (int a = 0; a < A; ++a) evals[a] = prob.eval(active[a], r);

    std::fill(jac.begin(), jac.end(), 0.0);
    std::fill(rhs.begin(), rhs.end(), 0.0);
    for (int a = 0; a < A; ++a) {
      const Pair& pr = prob.pair(active[a]);
      const PairEval& e = evals[a];
      rhs[pr.a] += lambda[a] * e.ga;
      rhs[pr.b] += lambda[a] * e.gb;
      jac[pr.a * n + pr.a] += lambda[a] * e.haa;
      jac[pr.a * n + pr.b] += lambda[a] * e.hab;
      jac[pr.b * n + pr.a] += lambda[a] * e.hab;
      jac[pr.b * n + pr.b] += lambda[a] * e.hbb;
      jac[pr.a * n + (k + a)] = e.ga;
      jac[pr.b * n + (k + a)] = e.gb;
      // binding rows
      jac[(k + a) * n + pr.a] = e.ga;
      jac[(k + a) * n + pr.b] = e.gb;
      jac[(k + a) * n + (k + A)] = -1.0;
      rhs[k + a] = e.val - z;
      jac[(k + A) * n + (k + a)] = 1.0;
    }
    double lsum = 0.0, rsum = 0.0;
    for (int a = 0; a < A; ++a) lsum += lambda[a];
    for (int i = 0; i < k; ++i) {
      rhs[i] -= gamma;
      jac[i * n + (k + A + 1)] = -1.0;
      jac[(k + A + 1) * n + i] = 1.0;
      rsum += r[i];
    }
    rhs[k + A] = lsum - 1.0;
    rhs[k + A + 1] = rsum - 1.0;

    double fnorm = 0.0;
    for (double v : rhs) fnorm = std::max(fnorm, std::fabs(v));
    if (fnorm <= 1e-13 * std::max(1.0, fscale)) return {true, z};
    if (iter > 0 && fnorm > 1e12) return {false, z};

    std::vector<double> step = rhs;
    for (auto& v : step) v = -v;
    std::vector<double> jcopy = jac;
    if (!solve_dense(jcopy, step, n)) {
      // regularize a nearly singular system once, then give up
      jcopy = jac;
      for (int i = 0; i < n; ++i) jcopy[i * n + i] += 1e-11;
      if (!solve_dense(jcopy, step, n)) return {false, z};
    }

    double alpha = 1.0;
    for (int i = 0; i < k; ++i)
      if (step[i] < 0.0)
        alpha = std::min(alpha, -0.95 * r[i] / step[i]);
    for (int bt = 0; bt < 50; ++bt) {
      bool feasible = true;
      for (int i = 0; i < k && feasible; ++i)
        if (r[i] + alpha * step[i] <= 0.0) feasible = false;
      if (feasible) break;
      alpha *= 0.5;
    }
    for (int i = 0; i < k; ++i) r[i] += alpha * step[i];
    for (int a = 0; a < A; ++a) lambda[a] += alpha * step[k + a];
    z += alpha * step[k + A];
    gamma += alpha * step[k + A + 1];

    if (fnorm >= fnorm_prev && fnorm < 1e-11 * std::max(1.0, fscale))
      return {true, z};  // stalled at numerical floor
    fnorm_prev = fnorm;
  }
  return {false, z};
}

}  // namespace

double RateSpec::mean() const {
  switch (family) {
    case Family::Normal:
      return a;
    case Family::Exponential:
      return 1.0 / a;
    case Family::Bernoulli:
      return a;
  }
  return 0.0;
}

double RateSpec::variance() const {
  switch (family) {
    case Family::Normal:
      return b;
    case Family::Exponential:
      return 1.0 / (a * a);
    case Family::Bernoulli:
      return a * (1.0 - a);
  }
  return 0.0;
}

double RateSpec::conjugate(double x) const {
  switch (family) {
    case Family::Normal:
      return (x - a) * (x - a) / (2.0 * b);
    case Family::Exponential:
      if (x <= 0.0) return std::numeric_limits<double>::infinity();
      return a * x - 1.0 - std::log(a * x);
    case Family::Bernoulli:
      if (x <= 0.0 || x >= 1.0)
        return std::numeric_limits<double>::infinity();
      return x * std::log(x / a) + (1.0 - x) * std::log((1.0 - x) / (1.0 - a));
  }
  return 0.0;
}

double RateSpec::conjugate_d1(double x) const {
  switch (family) {
    case Family::Normal:
      return (x - a) / b;
    case Family::Exponential:
      return a - 1.0 / x;
    case Family::Bernoulli:
      return std::log(x * (1.0 - a) / (a * (1.0 - x)));
  }
  return 0.0;
}

double RateSpec::conjugate_d2(double x) const {
  switch (family) {
    case Family::Normal:
      return 1.0 / b;
    case Family::Exponential:
      return 1.0 / (x * x);
    case Family::Bernoulli:
      return 1.0 / (x * (1.0 - x));
  }
  return 0.0;
}

double rate_normal(const RateSpec& top, const RateSpec& bottom, double r_top,
                   double r_bottom) {
  if (top.family != RateSpec::Family::Normal ||
      bottom.family != RateSpec::Family::Normal)
    throw DomainError("rate_normal requires normal specs");
  if (std::min(r_top, r_bottom) <= 0.0) return 0.0;
  const double gap = top.a - bottom.a;
  return gap * gap / (2.0 * (top.b / r_top + bottom.b / r_bottom));
}

double infimum_point_normal(const RateSpec& top, const RateSpec& bottom,
                            double r_top, double r_bottom) {
  if (top.family != RateSpec::Family::Normal ||
      bottom.family != RateSpec::Family::Normal)
    throw DomainError("infimum_point_normal requires normal specs");
  if (!(r_top > 0.0) || !(r_bottom > 0.0))
    throw ZeroRatio("infimum point needs strictly positive ratios");
  const double wa = r_top / top.b, wb = r_bottom / bottom.b;
  return (wa * top.a + wb * bottom.a) / (wa + wb);
}

double rate_generic(const RateSpec& top, const RateSpec& bottom, double r_top,
                    double r_bottom) {
  if (r_top < 0.0 || r_bottom < 0.0)
    throw DomainError("ratios must be nonnegative");
  if (std::fabs(top.mean() - bottom.mean()) <= kMeanGap)
    throw DomainError("pairwise rate undefined for coincident means");
  if (std::min(r_top, r_bottom) == 0.0) return 0.0;

  // Minimize the ratio-weighted conjugates over x between the two means;
  // the weighted derivative is increasing, so bisect on its sign.
  double lo = std::min(top.mean(), bottom.mean());
  double hi = std::max(top.mean(), bottom.mean());
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double d =
        r_top * top.conjugate_d1(mid) + r_bottom * bottom.conjugate_d1(mid);
    if (d < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double x = 0.5 * (lo + hi);
  return r_top * top.conjugate(x) + r_bottom * bottom.conjugate(x);
}

PfsRate pfs_rate(std::span<const RateSpec> specs, int m,
                 std::span<const double> ratios) {
  const int k = static_cast<int>(specs.size());
  if (static_cast<int>(ratios.size()) != k)
    throw SizeMismatch("ratio vector length must match spec count");
  const Ranked ranked = rank_specs(specs, m);
  PfsRate best;
  best.rate = std::numeric_limits<double>::infinity();
  for (int a = 0; a < m; ++a) {
    for (int b = m; b < k; ++b) {
      const int ia = ranked.order[a], ib = ranked.order[b];
      const double g = pair_rate(specs[ia], specs[ib], ratios[ia], ratios[ib]);
      if (g < best.rate) {
        best.rate = g;
        best.top_index = ia;
        best.bottom_index = ib;
      }
    }
  }
  return best;
}

std::vector<double> solve_ratios_grid(std::span<const RateSpec> specs, int m,
                                      double grid_step) {
  const int k = static_cast<int>(specs.size());
  if (m < 1 || m >= k) throw InvalidM(m, k);
  if (k > 5) throw GridTooLarge("grid search supports k <= 5");
  if (!(grid_step > 0.0) || grid_step > 1.0)
    throw DomainError("grid step must be in (0, 1]");
  const int n = static_cast<int>(std::lround(1.0 / grid_step));
  if (composition_count(n, k) > 40'000'000ULL)
    throw GridTooLarge("simplex lattice too large for this step");
  const Ranked ranked = rank_specs(specs, m);
  check_distinct_means(ranked);

  std::vector<double> point(k, 0.0), best_point(k, 1.0 / k);
  double best = -1.0;
  std::vector<int> counts(k, 0);
  // Depth-first enumeration of nonnegative integer compositions of n.
  auto evaluate = [&]() {
    for (int i = 0; i < k; ++i)
      point[ranked.order[i]] = counts[i] * grid_step;
    double worst = std::numeric_limits<double>::infinity();
    for (int a = 0; a < m && worst > best; ++a) {
      for (int b = m; b < k; ++b) {
        const int ia = ranked.order[a], ib = ranked.order[b];
        worst = std::min(worst, pair_rate(specs[ia], specs[ib], point[ia],
                                          point[ib]));
        if (worst <= best) break;
      }
    }
    if (worst > best) {
      best = worst;
      best_point = point;
    }
  };
  auto recurse = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == k - 1) {
      counts[pos] = remaining;
      evaluate();
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  recurse(recurse, 0, n);
  return best_point;
}

RatioResiduals ratio_condition_residuals(std::span<const RateSpec> specs,
                                         int m,
                                         std::span<const double> ratios) {
  const int k = static_cast<int>(specs.size());
  if (static_cast<int>(ratios.size()) != k)
    throw SizeMismatch("ratio vector length must match spec count");
  const Ranked ranked = rank_specs(specs, m);

  std::vector<double> row_min(m, std::numeric_limits<double>::infinity());
  std::vector<double> col_min(k - m, std::numeric_limits<double>::infinity());
  for (int a = 0; a < m; ++a) {
    for (int b = m; b < k; ++b) {
      const int ia = ranked.order[a], ib = ranked.order[b];
      const double g = pair_rate(specs[ia], specs[ib], ratios[ia], ratios[ib]);
      row_min[a] = std::min(row_min[a], g);
      col_min[b - m] = std::min(col_min[b - m], g);
    }
  }
  RatioResiduals res;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < k - m; ++b)
      res.optrate = std::max(res.optrate, std::fabs(row_min[a] - col_min[b]));

  double top = 0.0, rest = 0.0;
  for (int a = 0; a < m; ++a) {
    const int ia = ranked.order[a];
    top += ratios[ia] * ratios[ia] / specs[ia].variance();
  }
  for (int b = m; b < k; ++b) {
    const int ib = ranked.order[b];
    rest += ratios[ib] * ratios[ib] / specs[ib].variance();
  }
  res.balance = std::fabs(top - rest);
  return res;
}

OptimalRatioResult solve_ratios(std::span<const RateSpec> specs, int m,
                                double tol, std::uint64_t max_evals) {
  MinRateProblem prob(specs, m, max_evals);
  const int k = prob.k();
  const int P = prob.num_pairs();

  std::vector<double> r = smoothed_ascent(prob);

  // Candidate binding set: every row and column argmin with a small
  // relative window, so each alternative is covered by at least one pair.
  auto build_active = [&](const std::vector<double>& point,
                          double window) {
    std::vector<double> vals(P);
    for (int p = 0; p < P; ++p) vals[p] = prob.value(p, point);
    std::vector<char> in(P, 0);
    for (int p = 0; p < P; ++p) {
      const Pair& pr = prob.pair(p);
      double row_best = std::numeric_limits<double>::infinity();
      double col_best = std::numeric_limits<double>::infinity();
      for (int q = 0; q < P; ++q) {
        if (prob.pair(q).a == pr.a) row_best = std::min(row_best, vals[q]);
        if (prob.pair(q).b == pr.b) col_best = std::min(col_best, vals[q]);
      }
      if (vals[p] <= row_best + window || vals[p] <= col_best + window)
        in[p] = 1;
    }
    std::vector<int> act;
    for (int p = 0; p < P; ++p)
      if (in[p]) act.push_back(p);
    return act;
  };

  double scale = 0.0;
  for (int p = 0; p < P; ++p)
    scale = std::max(scale, prob.value(p, r));
  scale = std::max(scale, 1e-12);

  NewtonOutcome outcome;
  std::vector<double> best_r = r;
  std::vector<int> active = build_active(r, 1e-4 * scale);
  std::vector<double> lambda(active.size(), 1.0 / active.size());

  for (int attempt = 0; attempt < 2 * P + 4; ++attempt) {
    std::vector<double> r_try = best_r;
    std::vector<double> lam_try = lambda;
    outcome = newton_polish(prob, r_try, active, lam_try);
    if (!outcome.ok) break;

    // Drop the most negative multiplier, then pull in any pair that fell
    // below the common rate; accept when neither applies.
    int worst_neg = -1;
    double most_neg = -1e-8;
    for (std::size_t a = 0; a < lam_try.size(); ++a) {
      if (lam_try[a] < most_neg) {
        most_neg = lam_try[a];
        worst_neg = static_cast<int>(a);
      }
    }
    if (worst_neg >= 0 && active.size() > 1) {
      best_r = r_try;
      active.erase(active.begin() + worst_neg);
      lam_try.erase(lam_try.begin() + worst_neg);
      double lsum = 0.0;
      for (auto& l : lam_try) lsum += (l = std::max(l, 0.0));
      lambda = lam_try;
      if (lsum <= 0.0)
        lambda.assign(active.size(), 1.0 / active.size());
      else
        for (auto& l : lambda) l /= lsum;
      continue;
    }
    int missing = -1;
    for (int p = 0; p < P && missing < 0; ++p) {
      if (std::find(active.begin(), active.end(), p) != active.end())
        continue;
      if (prob.value(p, r_try) < outcome.z - 1e-10 * std::max(1.0, scale))
        missing = p;
    }
    if (missing >= 0) {
      best_r = r_try;
      active.push_back(missing);
      lambda = lam_try;
      lambda.push_back(1e-3);
      double lsum = std::accumulate(lambda.begin(), lambda.end(), 0.0);
      for (auto& l : lambda) l /= lsum;
      continue;
    }
    best_r = r_try;
    lambda = lam_try;
    break;
  }
  if (!outcome.ok)
    throw NoConvergence("ratio solver failed to reach stationarity");

  OptimalRatioResult out;
  out.r_star = best_r;  // still ranked order; un-rank below
  std::vector<double> original(k);
  for (int pos = 0; pos < k; ++pos)
    original[prob.ranked().order[pos]] = best_r[pos];
  out.r_star = original;

  PfsRate final_rate = pfs_rate(specs, m, out.r_star);
  out.z_star = final_rate.rate;
  RatioResiduals res = ratio_condition_residuals(specs, m, out.r_star);
  out.optrate_residual = res.optrate;
  out.balance_residual = res.balance;
  out.pair_rates.assign(m, std::vector<double>(k - m, 0.0));
  for (int a = 0; a < m; ++a)
    for (int b = m; b < k; ++b) {
      const int ia = prob.ranked().order[a], ib = prob.ranked().order[b];
      out.pair_rates[a][b - m] =
          pair_rate(specs[ia], specs[ib], out.r_star[ia], out.r_star[ib]);
    }

  if (out.optrate_residual > std::max(tol, 1e-10 * std::max(1.0, scale)))
    throw NoConvergence("stationarity residual above tolerance");
  return out;
}

OptimalRatioResult solve_ratios_normal(std::span<const RateSpec> specs, int m,
                                       double tol, std::uint64_t max_evals) {
  for (const auto& s : specs)
    if (s.family != RateSpec::Family::Normal)
      throw DomainError("solve_ratios_normal requires normal specs");
  return solve_ratios(specs, m, tol, max_evals);
}

}  // namespace topm
