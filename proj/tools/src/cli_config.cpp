#include "cli_config.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace topm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* begin = value.data();
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("config key '" + key + "' has a bad value: " + value);
  return out;
}

const std::set<std::string> kKnownKeys = {
    "problem.experiment", "problem.m",        "problem.n0",
    "run.macros",         "run.budget",       "run.seed",
    "run.threads",        "run.checkpoints",  "run.policies",
    "run.truth_draws",    "output.dir",
};

}  // namespace

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

std::map<std::string, std::string> parse_config_text(
    const std::string& text) {
  std::map<std::string, std::string> kv;
  std::string section;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line = text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) +
                        ": empty key or value");
    if (!section.empty()) key = section + "." + key;
    if (!kv.emplace(key, value).second)
      throw ConfigError("duplicate config key '" + key + "'");
  }
  return kv;
}

void RunOptions::merge_config(
    const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (!kKnownKeys.count(key))
      throw ConfigError("unknown config key '" + key + "'");
    if (key == "problem.experiment") {
      if (experiment.empty()) experiment = value;
    } else if (key == "problem.m") {
      if (!m) m = parse_number<int>(key, value);
    } else if (key == "problem.n0") {
      if (!n0) n0 = parse_number<int>(key, value);
    } else if (key == "run.macros") {
      if (!macros) macros = parse_number<int>(key, value);
    } else if (key == "run.budget") {
      if (!budget) budget = parse_number<std::uint64_t>(key, value);
    } else if (key == "run.seed") {
      if (!seed) seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "run.threads") {
      if (!threads) threads = parse_number<int>(key, value);
    } else if (key == "run.checkpoints") {
      if (!checkpoints) checkpoints = parse_number<int>(key, value);
    } else if (key == "run.truth_draws") {
      if (!truth_draws) truth_draws = parse_number<std::uint32_t>(key, value);
    } else if (key == "run.policies") {
      if (policies.empty()) policies = split_list(value);
    } else if (key == "output.dir") {
      if (!out_dir) out_dir = value;
    }
  }
}

ResolvedRun resolve_run(const RunOptions& opts) {
  if (opts.experiment.empty())
    throw ConfigError("no experiment named; use --experiment or a config");

  ResolvedRun out;
  out.experiment = opts.experiment;
  out.out_dir = opts.out_dir.value_or("out");
  ExperimentConfig& cfg = out.config;

  if (opts.experiment == "evac") {
    EvacProblem evac;
    evac.net = builtin_network();
    evac.plans = enumerate_plans(evac.net);
    evac.m = opts.m.value_or(5);
    evac.n0 = opts.n0.value_or(10);
    evac.budget = opts.budget.value_or(1500);
    const std::uint32_t draws = opts.truth_draws.value_or(2000);
    const auto truth = estimate_clearance(
        evac.net, evac.plans, draws,
        rng::derive_key(opts.seed.value_or(0), rng::kTagTruth),
        opts.threads.value_or(0));
    evac.true_means.resize(evac.plans.size());
    for (const auto& t : truth) evac.true_means[t.plan] = -t.mean;
    cfg.problem = std::move(evac);
  } else {
    const auto id = parse_experiment(opts.experiment);
    if (!id)
      throw ConfigError("unknown experiment '" + opts.experiment + "'");
    SyntheticSpec spec = make_experiment(*id);
    if (opts.m) spec.m = *opts.m;
    if (opts.n0) spec.n0 = *opts.n0;
    if (opts.budget) spec.budget = *opts.budget;
    spec.validate();
    cfg.problem = std::move(spec);
  }

  if (!opts.policies.empty()) {
    cfg.policies.clear();
    for (const auto& name : opts.policies) {
      const auto p = parse_policy(name);
      if (!p) throw ConfigError("unknown policy '" + name + "'");
      cfg.policies.push_back(*p);
    }
  }
  cfg.macros = opts.macros.value_or(1000);
  cfg.base_seed = opts.seed.value_or(0);
  cfg.threads = opts.threads.value_or(0);
  cfg.checkpoints = opts.checkpoints.value_or(100);
  try {
    (void)cfg.resolved_grid();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return out;
}

}  // namespace topm::cli
