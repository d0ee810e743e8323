#include "topm/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace topm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDiffFloor = 1e-12;  // guard for mean-minus-level divisors

// Read-only snapshot of the quantities every rule consumes.
struct View {
  std::span<const double> post_mean, post_var, look_var, samp_mean, sigma;
  std::span<const std::uint32_t> counts;
  std::span<const int> ranked;
  std::uint64_t total = 0;
  int m = 0;
  int k() const { return static_cast<int>(post_mean.size()); }
};

struct Min2 {
  double best = kInf, second = kInf;
  int best_at = -1;
  void add(double v, int at) {
    if (v < best) {
      second = best;
      best = v;
      best_at = at;
    } else if (v < second) {
      second = v;
    }
  }
  double excluding(int at) const { return at == best_at ? second : best; }
};

struct Scratch {
  std::vector<double> ratios;
  std::vector<double> row_min, col_min;
  Min2 row2, col2;
};

int argmax_smallest_index(std::span<const double> scores) {
  int at = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[at]) at = i;
  return at;
}

// Fills the unshrunk pairwise squared distances and their row/column
// minima for the current ranking.
void prepare_pairs(const View& v, Scratch& s) {
  const int m = v.m, k = v.k(), nb = k - m;
  s.pair_val.resize(static_cast<std::size_t>(m) * nb);
  s.row_min.assign(m, kInf);
  s.col_min.assign(nb, kInf);
  for (int a = 0; a < m; ++a) {
    const int ia = v.ranked[a];
    for (int b = 0; b < nb; ++b) {
      const int ib = v.ranked[m + b];
      const double gap = v.post_mean[ia] - v.post_mean[ib];
      const double val = gap * gap / (v.post_var[ia] + v.post_var[ib]);
      s.pair_val[static_cast<std::size_t>(a) * nb + b] = val;
      if (val < s.row_min[a]) s.row_min[a] = val;
      if (val < s.col_min[b]) s.col_min[b] = val;
    }
  }
  s.row2 = {};
  s.col2 = {};
  for (int a = 0; a < m; ++a) s.row2.add(s.row_min[a], a);
  for (int b = 0; b < nb; ++b) s.col2.add(s.col_min[b], b);
}

// Lookahead value for the alternative at one ranked position, given
// prepared pair minima.
double lookahead_at(const View& v, const Scratch& s, int pos) {
  const int m = v.m, k = v.k(), nb = k - m;
  if (pos < m) {
    const int cand = v.ranked[pos];
    double own = kInf;
    for (int b = 0; b < nb; ++b) {
      const int ib = v.ranked[m + b];
      const double gap = v.post_mean[cand] - v.post_mean[ib];
      own = std::min(own, gap * gap / (v.look_var[cand] + v.post_var[ib]));
    }
    return std::min(own, s.row2.excluding(pos));
  }
  const int cand = v.ranked[pos];
  double own = kInf;
  for (int a = 0; a < m; ++a) {
    const int ia = v.ranked[a];
    const double gap = v.post_mean[ia] - v.post_mean[cand];
    own = std::min(own, gap * gap / (v.post_var[ia] + v.look_var[cand]));
  }
  return std::min(own, s.col2.excluding(pos - m));
}

int aoam_choose(const View& v, Scratch& s, std::vector<double>& scores) {
  prepare_pairs(v, s);
  const int k = v.k();
  scores.resize(k);
  for (int pos = 0; pos < k; ++pos)
    scores[v.ranked[pos]] = lookahead_at(v, s, pos);
  return argmax_smallest_index(scores);
}

int ea_choose(const View& v, std::vector<double>& scores) {
  const int k = v.k();
  scores.resize(k);
  int at = 0;
  for (int i = 0; i < k; ++i) {
    scores[i] = static_cast<double>(v.counts[i]);
    if (v.counts[i] < v.counts[at]) at = i;
  }
  return at;
}

double separating_level(const View& v, OcbamC variant) {
  const int i1 = v.ranked[v.m - 1], i2 = v.ranked[v.m];
  double s1 = v.sigma[i1], s2 = v.sigma[i2];
  if (variant == OcbamC::Corg) {
    s1 /= std::sqrt(static_cast<double>(v.counts[i1]));
    s2 /= std::sqrt(static_cast<double>(v.counts[i2]));
  }
  return (s2 * v.samp_mean[i1] + s1 * v.samp_mean[i2]) / (s1 + s2);
}

int most_starving(const View& v, std::span<const double> ratios,
                  std::vector<double>& scores) {
  const int k = v.k();
  scores.resize(k);
  const double next = static_cast<double>(v.total + 1);
  for (int i = 0; i < k; ++i)
    scores[i] = next * ratios[i] - static_cast<double>(v.counts[i]);
  return argmax_smallest_index(scores);
}

int ocbam_choose(const View& v, OcbamC variant, Scratch& s,
                 std::vector<double>& scores) {
  const int k = v.k();
  const double c = separating_level(v, variant);
  s.ratios.resize(k);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double gap = std::max(std::fabs(v.samp_mean[i] - c), kDiffFloor);
    const double w = v.sigma[i] / gap;
    s.ratios[i] = w * w;
    sum += s.ratios[i];
  }
  for (auto& w : s.ratios) w /= sum;
  return most_starving(v, s.ratios, scores);
}

int ocbam_plus_choose(const View& v, Scratch& s, std::vector<double>& scores) {
  const int m = v.m, k = v.k();
  // Gap comparison exactly as printed for decreasing ranked means; a
  // missing neighbor sends the branch to the side that exists.
  const double gap_top =
      m >= 2 ? v.samp_mean[v.ranked[m - 1]] - v.samp_mean[v.ranked[m - 2]]
             : kInf;
  const double gap_bot =
      k - m >= 2 ? v.samp_mean[v.ranked[m + 1]] - v.samp_mean[v.ranked[m]]
                 : kInf;
  const int anchor = v.ranked[gap_top >= gap_bot ? m - 1 : m];

  s.ratios.resize(k);
  double cross = 0.0;
  for (int i = 0; i < k; ++i) {
    if (i == anchor) continue;
    const double gap =
        std::max(std::fabs(v.samp_mean[i] - v.samp_mean[anchor]), kDiffFloor);
    const double w = v.sigma[i] / gap;
    s.ratios[i] = w * w;
    cross += s.ratios[i] * s.ratios[i] / (v.sigma[i] * v.sigma[i]);
  }
  s.ratios[anchor] = v.sigma[anchor] * std::sqrt(cross);
  const double sum = std::accumulate(s.ratios.begin(), s.ratios.end(), 0.0);
  for (auto& w : s.ratios) w /= sum;
  return most_starving(v, s.ratios, scores);
}

// Pairwise comparison statistics shared by the two subset-selection rules.
// Returns the ranked positions of the globally minimizing pair and fills
// per-alternative minima as scores.
std::pair<int, int> min_pair_stat(const View& v, std::vector<double>& scores) {
  const int m = v.m, k = v.k(), nb = k - m;
  const double total = static_cast<double>(v.total);
  scores.assign(k, kInf);
  double best = kInf;
  int best_a = 0, best_b = 0;
  for (int a = 0; a < m; ++a) {
    const int ia = v.ranked[a];
    const double va = v.sigma[ia] * v.sigma[ia] * total / v.counts[ia];
    for (int b = 0; b < nb; ++b) {
      const int ib = v.ranked[m + b];
      const double vb = v.sigma[ib] * v.sigma[ib] * total / v.counts[ib];
      const double gap = v.samp_mean[ia] - v.samp_mean[ib];
      const double stat = gap * gap / (va + vb);
      if (stat < best) {
        best = stat;
        best_a = a;
        best_b = b;
      }
      scores[ia] = std::min(scores[ia], stat);
      scores[ib] = std::min(scores[ib], stat);
    }
  }
  return {best_a, m + best_b};
}

int ocbass_choose(const View& v, std::vector<double>& scores) {
  const int m = v.m, k = v.k();
  const auto [pa, pb] = min_pair_stat(v, scores);
  double top_sum = 0.0, bot_sum = 0.0;
  for (int pos = 0; pos < k; ++pos) {
    const int i = v.ranked[pos];
    const double t = static_cast<double>(v.counts[i]);
    const double term = t * t / (v.sigma[i] * v.sigma[i]);
    (pos < m ? top_sum : bot_sum) += term;
  }
  return top_sum < bot_sum ? v.ranked[pa] : v.ranked[pb];
}

int ocbasss_choose(const View& v, rng::Sequence& rng,
                   std::vector<double>& scores) {
  const auto [pa, pb] = min_pair_stat(v, scores);
  return rng.below(2) == 0 ? v.ranked[pa] : v.ranked[pb];
}

// Buffers for evaluating rules on a standalone PolicyState.
struct Buffers {
  std::vector<double> post_mean, post_var, look_var, samp_mean, sigma;
  std::vector<std::uint32_t> counts;
  std::vector<int> ranked;
};

View make_view(const PolicyState& state, Buffers& b) {
  const int k = static_cast<int>(state.stats.size());
  if (state.m < 1 || state.m >= k) throw InvalidM(state.m, k);
  b.post_mean.resize(k);
  b.post_var.resize(k);
  b.look_var.resize(k);
  b.samp_mean.resize(k);
  b.sigma.resize(k);
  b.counts.resize(k);
  for (int i = 0; i < k; ++i) {
    const auto& st = state.stats[i];
    if (st.count() == 0)
      throw DegenerateState("policy requires >= 1 observation per alternative");
    const double plug = st.plug_in_variance();
    const PosteriorParams post = posterior(st, plug);
    b.post_mean[i] = post.mean;
    b.post_var[i] = post.var;
    b.look_var[i] = lookahead_variance(st, plug);
    b.samp_mean[i] = st.sample_mean();
    b.sigma[i] = std::sqrt(plug);
    b.counts[i] = static_cast<std::uint32_t>(st.count());
  }
  b.ranked.resize(k);
  std::iota(b.ranked.begin(), b.ranked.end(), 0);
  std::sort(b.ranked.begin(), b.ranked.end(), [&](int x, int y) {
    if (b.post_mean[x] != b.post_mean[y])
      return b.post_mean[x] > b.post_mean[y];
    return x < y;
  });
  View v;
  v.post_mean = b.post_mean;
  v.post_var = b.post_var;
  v.look_var = b.look_var;
  v.samp_mean = b.samp_mean;
  v.sigma = b.sigma;
  v.counts = b.counts;
  v.ranked = b.ranked;
  v.total = state.step();
  v.m = state.m;
  return v;
}

}  // namespace

const char* to_string(Policy p) {
  switch (p) {
    case Policy::Ea:
      return "ea";
    case Policy::Ocbam:
      return "ocbam";
    case Policy::OcbamCorg:
      return "ocbam-corg";
    case Policy::OcbamPlus:
      return "ocbam+";
    case Policy::Ocbass:
      return "ocbass";
    case Policy::Ocbasss:
      return "ocbasss";
    case Policy::Aoam:
      return "aoam";
  }
  return "?";
}

std::optional<Policy> parse_policy(std::string_view name) {
  if (name == "ea") return Policy::Ea;
  if (name == "ocbam") return Policy::Ocbam;
  if (name == "ocbam-corg") return Policy::OcbamCorg;
  if (name == "ocbam+" || name == "ocbam-plus") return Policy::OcbamPlus;
  if (name == "ocbass") return Policy::Ocbass;
  if (name == "ocbasss") return Policy::Ocbasss;
  if (name == "aoam") return Policy::Aoam;
  return std::nullopt;
}

double aoam_lookahead(const PolicyState& state, int candidate) {
  Buffers b;
  Scratch s;
  const View v = make_view(state, b);
  if (candidate < 0 || candidate >= v.k())
    throw DomainError("candidate index out of range");
  prepare_pairs(v, s);
  int pos = 0;
  while (v.ranked[pos] != candidate) ++pos;
  return lookahead_at(v, s, pos);
}

AllocationDecision aoam_select(const PolicyState& state) {
  Buffers b;
  Scratch s;
  AllocationDecision d;
  const View v = make_view(state, b);
  d.chosen = aoam_choose(v, s, d.scores);
  return d;
}

AllocationDecision ea_select(const PolicyState& state) {
  Buffers b;
  AllocationDecision d;
  const View v = make_view(state, b);
  d.chosen = ea_choose(v, d.scores);
  return d;
}

double ocbam_c(const PolicyState& state, OcbamC variant) {
  Buffers b;
  const View v = make_view(state, b);
  return separating_level(v, variant);
}

AllocationDecision ocbam_select(const PolicyState& state, OcbamC variant) {
  Buffers b;
  Scratch s;
  AllocationDecision d;
  const View v = make_view(state, b);
  d.chosen = ocbam_choose(v, variant, s, d.scores);
  return d;
}

AllocationDecision ocbam_plus_select(const PolicyState& state) {
  Buffers b;
  Scratch s;
  AllocationDecision d;
  const View v = make_view(state, b);
  d.chosen = ocbam_plus_choose(v, s, d.scores);
  return d;
}

AllocationDecision ocbass_select(const PolicyState& state) {
  Buffers b;
  AllocationDecision d;
  const View v = make_view(state, b);
  d.chosen = ocbass_choose(v, d.scores);
  return d;
}

AllocationDecision ocbasss_select(PolicyState& state) {
  Buffers b;
  AllocationDecision d;
  const View v = make_view(state, b);
  d.chosen = ocbasss_choose(v, state.rng, d.scores);
  return d;
}

AllocationDecision select(Policy policy, PolicyState& state) {
  switch (policy) {
    case Policy::Ea:
      return ea_select(state);
    case Policy::Ocbam:
      return ocbam_select(state, OcbamC::Cadp);
    case Policy::OcbamCorg:
      return ocbam_select(state, OcbamC::Corg);
    case Policy::OcbamPlus:
      return ocbam_plus_select(state);
    case Policy::Ocbass:
      return ocbass_select(state);
    case Policy::Ocbasss:
      return ocbasss_select(state);
    case Policy::Aoam:
      return aoam_select(state);
  }
  throw DomainError("unknown policy");
}

SequentialRun::SequentialRun(const ObservationSource& source, Policy policy,
                             int m, int n0, std::uint64_t policy_seed,
                             std::span<const double> known_var)
    : source_(source),
      policy_(policy),
      k_(source.alternatives()),
      m_(m),
      n0_(n0),
      rng_(policy_seed) {
  if (m_ < 1 || m_ >= k_) throw InvalidM(m_, k_);
  if (n0_ < 2) throw DomainError("initialization needs n0 >= 2");
  if (!known_var.empty()) {
    if (static_cast<int>(known_var.size()) != k_)
      throw SizeMismatch("known variance vector length must be k");
    known_var_.assign(known_var.begin(), known_var.end());
  }
  stats_.resize(k_);
  for (int i = 0; i < k_; ++i)
    if (!known_var_.empty()) stats_[i].known_var = known_var_[i];
  counts_.assign(k_, 0);
  post_mean_.resize(k_);
  post_var_.resize(k_);
  look_var_.resize(k_);
  samp_mean_.resize(k_);
  sigma_.resize(k_);
  ranked_.resize(k_);
  pos_of_.resize(k_);
  scores_.resize(k_);
}

void SequentialRun::initialize() {
  for (int round = 0; round < n0_; ++round) {
    for (int i = 0; i < k_; ++i) {
      stats_[i].add(source_.observe(i, counts_[i]));
      ++counts_[i];
      ++total_;
    }
  }
  for (int i = 0; i < k_; ++i) refresh(i);
  std::iota(ranked_.begin(), ranked_.end(), 0);
  std::sort(ranked_.begin(), ranked_.end(), [&](int x, int y) {
    if (post_mean_[x] != post_mean_[y]) return post_mean_[x] > post_mean_[y];
    return x < y;
  });
  for (int pos = 0; pos < k_; ++pos) pos_of_[ranked_[pos]] = pos;
  initialized_ = true;
}

void SequentialRun::refresh(int alt) {
  const auto& st = stats_[alt];
  const double plug = st.plug_in_variance();
  samp_mean_[alt] = st.sample_mean();
  sigma_[alt] = std::sqrt(plug);
  post_mean_[alt] = samp_mean_[alt];
  post_var_[alt] = plug / static_cast<double>(st.count());
  look_var_[alt] = plug / static_cast<double>(st.count() + 1);
}

void SequentialRun::reposition(int alt) {
  auto before = [&](int x, int y) {
    if (post_mean_[x] != post_mean_[y]) return post_mean_[x] > post_mean_[y];
    return x < y;
  };
  int pos = pos_of_[alt];
  while (pos > 0 && before(alt, ranked_[pos - 1])) {
    ranked_[pos] = ranked_[pos - 1];
    pos_of_[ranked_[pos]] = pos;
    --pos;
  }
  while (pos + 1 < k_ && before(ranked_[pos + 1], alt)) {
    ranked_[pos] = ranked_[pos + 1];
    pos_of_[ranked_[pos]] = pos;
    ++pos;
  }
  ranked_[pos] = alt;
  pos_of_[alt] = pos;
}

int SequentialRun::choose() {
  View v;
  v.post_mean = post_mean_;
  v.post_var = post_var_;
  v.look_var = look_var_;
  v.samp_mean = samp_mean_;
  v.sigma = sigma_;
  v.counts = counts_;
  v.ranked = ranked_;
  v.total = total_;
  v.m = m_;
  static thread_local Scratch scratch;
  switch (policy_) {
    case Policy::Ea:
      return ea_choose(v, scores_);
    case Policy::Ocbam:
      return ocbam_choose(v, OcbamC::Cadp, scratch, scores_);
    case Policy::OcbamCorg:
      return ocbam_choose(v, OcbamC::Corg, scratch, scores_);
    case Policy::OcbamPlus:
      return ocbam_plus_choose(v, scratch, scores_);
    case Policy::Ocbass:
      return ocbass_choose(v, scores_);
    case Policy::Ocbasss:
      return ocbasss_choose(v, rng_, scores_);
    case Policy::Aoam:
      return aoam_choose(v, scratch, scores_);
  }
  throw DomainError("unknown policy");
}

int SequentialRun::step() {
  if (!initialized_)
    throw DegenerateState("step() called before initialize()");
  const int chosen = choose();
  alloc_.push_back(chosen);
  stats_[chosen].add(source_.observe(chosen, counts_[chosen]));
  ++counts_[chosen];
  ++total_;
  refresh(chosen);
  reposition(chosen);
  return chosen;
}

void SequentialRun::run_until(std::uint64_t total_budget) {
  while (total_ < total_budget) step();
}

std::vector<int> SequentialRun::selected_top_m() const {
  return {ranked_.begin(), ranked_.begin() + m_};
}

RunTrace run_policy(const ObservationSource& source, Policy policy, int m,
                    int n0, std::uint64_t budget, std::uint64_t seed,
                    std::span<const double> known_var) {
  const auto k = static_cast<std::uint64_t>(source.alternatives());
  const std::uint64_t minimum = k * static_cast<std::uint64_t>(n0);
  if (budget < minimum) throw BudgetTooSmall(budget, minimum);
  SequentialRun run(source, policy, m, n0,
                    rng::derive_key(seed, rng::kTagPolicy), known_var);
  run.initialize();
  run.run_until(budget);
  RunTrace trace;
  trace.allocations = run.allocations();
  trace.final_counts.assign(run.counts().begin(), run.counts().end());
  trace.selected = run.selected_top_m();
  return trace;
}

}  // namespace topm
