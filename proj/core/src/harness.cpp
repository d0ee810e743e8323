#include "topm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "topm/version.hpp"

namespace topm {

namespace {

struct Resolved {
  int k = 0, m = 0, n0 = 0;
  std::uint64_t budget = 0;
  bool fixed_means = false;
  std::vector<double> known_var;  // empty unless variances are known
};

Resolved resolve(const Problem& problem) {
  Resolved r;
  if (const auto* spec = std::get_if<SyntheticSpec>(&problem)) {
    spec->validate();
    r.k = spec->k;
    r.m = spec->m;
    r.n0 = spec->n0;
    r.budget = spec->budget;
    r.fixed_means = spec->mean_gen == SyntheticSpec::MeanGen::FixedLinear;
    if (spec->known_variance) {
      r.known_var.resize(spec->k);
      for (int i = 0; i < spec->k; ++i)
        r.known_var[i] = spec->noise_sd[i] * spec->noise_sd[i];
    }
  } else {
    const auto& evac = std::get<EvacProblem>(problem);
    r.k = static_cast<int>(evac.plans.size());
    r.m = evac.m;
    r.n0 = evac.n0;
    r.budget = evac.budget;
    r.fixed_means = true;
    if (static_cast<int>(evac.true_means.size()) != r.k)
      throw ValidationError("evacuation problem needs one true mean per plan");
    if (r.m < 1 || r.m >= r.k) throw InvalidM(r.m, r.k);
    if (r.n0 < 2) throw ValidationError("n0 must be >= 2");
    if (r.budget < static_cast<std::uint64_t>(r.k) * r.n0)
      throw BudgetTooSmall(r.budget,
                           static_cast<std::uint64_t>(r.k) * r.n0);
  }
  return r;
}

struct PolicyOut {
  std::vector<std::uint8_t> correct;
  std::vector<double> eoc;
  std::vector<std::uint32_t> counts;  // [checkpoint][alt]
};

struct MacroOut {
  std::vector<PolicyOut> per_policy;
};

double format_guard(double v) { return v == 0.0 ? 0.0 : v; }  // avoid -0

void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", format_guard(v));
  out += buf;
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::resolved_grid() const {
  const Resolved r = resolve(problem);
  const std::uint64_t start =
      static_cast<std::uint64_t>(r.k) * static_cast<std::uint64_t>(r.n0);
  if (!grid.empty()) {
    std::vector<std::uint64_t> g = grid;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    if (g.front() <= start || g.back() > r.budget)
      throw ValidationError("checkpoints must lie in (k*n0, budget]");
    return g;
  }
  if (checkpoints < 1) throw ValidationError("need at least one checkpoint");
  const std::uint64_t span = r.budget - start;
  const std::uint64_t n =
      std::min<std::uint64_t>(checkpoints, span);
  std::vector<std::uint64_t> g;
  g.reserve(n);
  for (std::uint64_t i = 1; i <= n; ++i)
    g.push_back(start + (span * i) / n);
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

double eoc(std::span<const double> true_means, std::span<const int> selected,
           int m) {
  const int k = static_cast<int>(true_means.size());
  if (static_cast<int>(selected.size()) != m)
    throw SizeMismatch("selected set must contain exactly m alternatives");
  if (m < 1 || m >= k) throw InvalidM(m, k);
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (true_means[a] != true_means[b]) return true_means[a] > true_means[b];
    return a < b;
  });
  std::vector<int> best(order.begin(), order.begin() + m);
  std::sort(best.begin(), best.end());
  std::vector<int> chosen(selected.begin(), selected.end());
  std::sort(chosen.begin(), chosen.end());
  double best_sum = 0, chosen_sum = 0;
  for (int i : best) best_sum += true_means[i];
  for (int i : chosen) {
    if (i < 0 || i >= k) throw DomainError("selected index out of range");
    chosen_sum += true_means[i];
  }
  return best_sum - chosen_sum;
}

std::vector<std::vector<double>> ratio_trajectory(
    const RunTrace& trace, int k, int n0,
    std::span<const std::uint64_t> checkpoints) {
  std::vector<std::uint32_t> counts(k, n0);
  std::uint64_t total = static_cast<std::uint64_t>(k) * n0;
  std::vector<std::vector<double>> out;
  std::size_t next = 0;
  auto emit = [&]() {
    std::vector<double> r(k);
    for (int i = 0; i < k; ++i)
      r[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    out.push_back(std::move(r));
  };
  for (std::uint64_t c : checkpoints) {
    if (c < total || c > total + trace.allocations.size())
      throw ValidationError("checkpoint outside the recorded trace");
  }
  for (std::size_t step = 0; step <= trace.allocations.size(); ++step) {
    while (next < checkpoints.size() && checkpoints[next] == total) {
      emit();
      ++next;
    }
    if (step < trace.allocations.size()) {
      ++counts[trace.allocations[step]];
      ++total;
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const Resolved r = resolve(config.problem);
  if (config.macros < 1) throw ValidationError("macros must be >= 1");
  const std::vector<std::uint64_t> grid = config.resolved_grid();
  const int C = static_cast<int>(grid.size());
  const int P = static_cast<int>(config.policies.size());
  if (P == 0) throw ValidationError("need at least one policy");

  const SyntheticSpec* synth = std::get_if<SyntheticSpec>(&config.problem);
  const EvacProblem* evac = std::get_if<EvacProblem>(&config.problem);

  int nthreads = config.threads;
  if (nthreads <= 0)
    nthreads = std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min(nthreads, config.macros);

  auto run_macro = [&](int macro) {
    MacroOut out;
    out.per_policy.resize(P);
    std::vector<double> means =
        synth ? synth->draw_means(config.base_seed, macro)
              : evac->true_means;
    std::vector<int> order(r.k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (means[a] != means[b]) return means[a] > means[b];
      return a < b;
    });
    std::vector<std::uint8_t> is_top(r.k, 0);
    std::vector<int> top(order.begin(), order.begin() + r.m);
    std::sort(top.begin(), top.end());
    double top_sum = 0;
    for (int i : top) {
      is_top[i] = 1;
      top_sum += means[i];
    }

    // One observation stream per macro, shared by every policy.
    std::optional<SyntheticSource> synth_src;
    std::optional<EvacSource> evac_src;
    const ObservationSource* src = nullptr;
    if (synth) {
      synth_src.emplace(means, synth->noise_sd, config.base_seed, macro);
      src = &*synth_src;
    } else {
      evac_src.emplace(evac->net, evac->plans, config.base_seed, macro);
      src = &*evac_src;
    }

    for (int p = 0; p < P; ++p) {
      PolicyOut& po = out.per_policy[p];
      po.correct.assign(C, 0);
      po.eoc.assign(C, 0.0);
      po.counts.assign(static_cast<std::size_t>(C) * r.k, 0);

      // keyed by the policy itself so a policy's stream does not depend
      // on its position in the list
      SequentialRun run(*src, config.policies[p], r.m, r.n0,
                        rng::derive_key(config.base_seed, rng::kTagPolicy,
                                        macro,
                                        static_cast<int>(config.policies[p])),
                        r.known_var);
      run.initialize();
      for (int c = 0; c < C; ++c) {
        run.run_until(grid[c]);
        std::vector<int> selected = run.selected_top_m();
        std::sort(selected.begin(), selected.end());
        bool ok = true;
        double sel_sum = 0;
        for (int i : selected) {
          ok = ok && is_top[i];
          sel_sum += means[i];
        }
        po.correct[c] = ok ? 1 : 0;
        po.eoc[c] = ok ? 0.0 : top_sum - sel_sum;
        const auto counts = run.counts();
        std::copy(counts.begin(), counts.end(),
                  po.counts.begin() + static_cast<std::size_t>(c) * r.k);
      }
    }
    return out;
  };

  // Accumulators, filled in macro order.
  std::vector<std::vector<double>> ipcs_sum(P, std::vector<double>(C, 0));
  std::vector<std::vector<double>> eoc_sum(P, std::vector<double>(C, 0));
  std::vector<std::vector<double>> eoc_sq(P, std::vector<double>(C, 0));
  std::vector<std::vector<double>> ratio_sum(
      P, std::vector<double>(static_cast<std::size_t>(C) * r.k, 0));

  const int batch = nthreads * 2;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int base = 0; base < config.macros; base += batch) {
    const int hi = std::min(config.macros, base + batch);
    std::vector<MacroOut> slots(hi - base);
    std::vector<std::thread> pool;
    for (int tid = 0; tid < nthreads; ++tid) {
      pool.emplace_back([&, tid]() {
        try {
          for (int idx = base + tid; idx < hi; idx += nthreads)
            slots[idx - base] = run_macro(idx);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    for (int idx = base; idx < hi; ++idx) {
      const MacroOut& mo = slots[idx - base];
      for (int p = 0; p < P; ++p) {
        for (int c = 0; c < C; ++c) {
          ipcs_sum[p][c] += mo.per_policy[p].correct[c];
          eoc_sum[p][c] += mo.per_policy[p].eoc[c];
          eoc_sq[p][c] +=
              mo.per_policy[p].eoc[c] * mo.per_policy[p].eoc[c];
          const double t = static_cast<double>(grid[c]);
          for (int i = 0; i < r.k; ++i)
            ratio_sum[p][static_cast<std::size_t>(c) * r.k + i] +=
                mo.per_policy[p]
                    .counts[static_cast<std::size_t>(c) * r.k + i] /
                t;
        }
      }
    }
  }

  ExperimentResult result;
  result.grid = grid;
  result.k = r.k;
  const double n = config.macros;
  for (int p = 0; p < P; ++p) {
    PolicyCurve curve;
    curve.policy = config.policies[p];
    curve.points.resize(C);
    curve.mean_ratios.assign(C, std::vector<double>(r.k, 0));
    for (int c = 0; c < C; ++c) {
      CurvePoint& pt = curve.points[c];
      pt.budget = grid[c];
      pt.ipcs = ipcs_sum[p][c] / n;
      pt.ipcs_se = std::sqrt(pt.ipcs * (1.0 - pt.ipcs) / n);
      pt.eoc = eoc_sum[p][c] / n;
      const double var =
          n > 1 ? std::max(0.0, (eoc_sq[p][c] - n * pt.eoc * pt.eoc) /
                                    (n - 1.0))
                : 0.0;
      pt.eoc_se = std::sqrt(var / n);
      for (int i = 0; i < r.k; ++i)
        curve.mean_ratios[c][i] =
            ratio_sum[p][static_cast<std::size_t>(c) * r.k + i] / n;
    }
    result.curves.push_back(std::move(curve));
  }
  return result;
}

std::string curves_csv(const ExperimentResult& result) {
  std::string out = "policy,budget,ipcs,ipcs_se,eoc,eoc_se\n";
  for (const auto& curve : result.curves) {
    for (const auto& pt : curve.points) {
      out += to_string(curve.policy);
      out += ',';
      out += std::to_string(pt.budget);
      out += ',';
      append_num(out, pt.ipcs);
      out += ',';
      append_num(out, pt.ipcs_se);
      out += ',';
      append_num(out, pt.eoc);
      out += ',';
      append_num(out, pt.eoc_se);
      out += '\n';
    }
  }
  return out;
}

std::string ratios_csv(const ExperimentResult& result) {
  std::string out = "policy,budget,alt,ratio\n";
  for (const auto& curve : result.curves) {
    for (std::size_t c = 0; c < curve.points.size(); ++c) {
      for (std::size_t i = 0; i < curve.mean_ratios[c].size(); ++i) {
        out += to_string(curve.policy);
        out += ',';
        out += std::to_string(curve.points[c].budget);
        out += ',';
        out += std::to_string(i);
        out += ',';
        append_num(out, curve.mean_ratios[c][i]);
        out += '\n';
      }
    }
  }
  return out;
}

std::string metadata_json(const ExperimentConfig& config,
                          double wall_seconds) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["seed"] = config.base_seed;
  j["macros"] = config.macros;
  j["threads"] = config.threads;
  j["wall_time_s"] = wall_seconds;
  nlohmann::json pols = nlohmann::json::array();
  for (Policy p : config.policies) pols.push_back(to_string(p));
  j["policies"] = pols;
  if (const auto* spec = std::get_if<SyntheticSpec>(&config.problem)) {
    j["problem"]["kind"] = "synthetic";
    j["problem"]["k"] = spec->k;
    j["problem"]["m"] = spec->m;
    j["problem"]["n0"] = spec->n0;
    j["problem"]["budget"] = spec->budget;
    j["problem"]["mean_gen"] =
        spec->mean_gen == SyntheticSpec::MeanGen::FixedLinear
            ? "fixed-linear"
            : "gaussian-draw";
    j["problem"]["noise_sd"] = spec->noise_sd;
    if (!spec->mean_sd.empty()) j["problem"]["mean_sd"] = spec->mean_sd;
    j["problem"]["known_variance"] = spec->known_variance;
  } else {
    const auto& evac = std::get<EvacProblem>(config.problem);
    j["problem"]["kind"] = "evacuation";
    j["problem"]["plans"] = evac.plans.size();
    j["problem"]["m"] = evac.m;
    j["problem"]["n0"] = evac.n0;
    j["problem"]["budget"] = evac.budget;
  }
  j["checkpoints"] = config.resolved_grid();
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace topm
