#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli_config.hpp"
#include "topm/harness.hpp"
#include "topm/rates.hpp"
#include "topm/version.hpp"

namespace {

using namespace topm;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cli::ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& csv,
                                  const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : cli::split_list(csv)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw cli::ConfigError("bad value '" + item + "' in " + flag);
    }
  }
  if (out.empty()) throw cli::ConfigError(flag + " must not be empty");
  return out;
}

int cmd_run(const cli::RunOptions& opts_in, const std::string& config_path) {
  cli::RunOptions opts = opts_in;
  if (!config_path.empty())
    opts.merge_config(cli::parse_config_text(read_file(config_path)));
  cli::ResolvedRun resolved = cli::resolve_run(opts);

  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment(resolved.config);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::filesystem::create_directories(resolved.out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(resolved.out_dir) / name).string();
  };
  write_text_file(path("curves.csv"), curves_csv(result));
  write_text_file(path("ratios.csv"), ratios_csv(result));
  write_text_file(path("meta.json"), metadata_json(resolved.config, wall));

  for (const auto& curve : result.curves) {
    const auto& last = curve.points.back();
    std::cout << resolved.experiment << " " << to_string(curve.policy)
              << " T=" << last.budget << " ipcs=" << format_num(last.ipcs)
              << " eoc=" << format_num(last.eoc) << "\n";
  }
  std::cout << "wrote " << path("curves.csv") << "\n";
  return 0;
}

int cmd_solve_ratios(const std::string& family, const std::string& means,
                     const std::string& vars, const std::string& rates,
                     const std::string& q, int m, double tol) {
  std::vector<RateSpec> specs;
  if (family == "normal") {
    if (means.empty() || vars.empty())
      throw cli::ConfigError("normal family needs --means and --vars");
    const auto mu = parse_doubles(means, "--means");
    const auto var = parse_doubles(vars, "--vars");
    if (mu.size() != var.size())
      throw cli::ConfigError("--means and --vars must have equal length");
    for (std::size_t i = 0; i < mu.size(); ++i)
      specs.push_back(RateSpec::normal(mu[i], var[i]));
  } else if (family == "exponential") {
    if (rates.empty())
      throw cli::ConfigError("exponential family needs --rates");
    for (double r : parse_doubles(rates, "--rates"))
      specs.push_back(RateSpec::exponential(r));
  } else if (family == "bernoulli") {
    if (q.empty()) throw cli::ConfigError("bernoulli family needs --q");
    for (double p : parse_doubles(q, "--q"))
      specs.push_back(RateSpec::bernoulli(p));
  } else {
    throw cli::ConfigError("unknown family '" + family + "'");
  }

  const OptimalRatioResult res = solve_ratios(specs, m, tol);
  nlohmann::json j;
  j["r_star"] = res.r_star;
  j["z_star"] = res.z_star;
  j["optrate_residual"] = res.optrate_residual;
  j["balance_residual"] = res.balance_residual;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_evac(const std::string& fixture, std::uint32_t draws,
             std::uint64_t seed, int threads, const std::string& out_path,
             const std::string& dump_path) {
  if (!dump_path.empty()) {
    write_text_file(dump_path, builtin_network_json());
    std::cout << "wrote " << dump_path << "\n";
    return 0;
  }
  EvacuationNetwork net =
      fixture.empty() ? builtin_network() : load_network(read_file(fixture));
  const std::vector<Plan> plans = enumerate_plans(net);
  auto estimates = estimate_clearance(net, plans, draws, seed, threads);
  std::sort(estimates.begin(), estimates.end(),
            [](const ClearanceEstimate& a, const ClearanceEstimate& b) {
              if (a.mean != b.mean) return a.mean < b.mean;
              return a.plan < b.plan;
            });

  std::string csv = "rank,plan,clearance_mean,clearance_se\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    csv += std::to_string(i + 1) + "," + std::to_string(estimates[i].plan) +
           "," + format_num(estimates[i].mean) + "," +
           format_num(estimates[i].se) + "\n";
  }
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_text_file(out_path, csv);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential simulation-budget allocation for top-m selection"};
  app.set_version_flag("--version", topm::kVersion);
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run a macro-replication experiment");
  cli::RunOptions opts;
  std::string config_path;
  std::string policies_csv;

  // binds an optional numeric field; a bad value becomes a usage error
  auto bind = [](auto& field) {
    return [&field](const CLI::results_t& r) {
      typename std::decay_t<decltype(field)>::value_type v{};
      const auto* end = r[0].data() + r[0].size();
      auto [ptr, ec] = std::from_chars(r[0].data(), end, v);
      if (ec != std::errc{} || ptr != end) return false;
      field = v;
      return true;
    };
  };
  run->add_option("--config", config_path, "TOML-style config file");
  run->add_option("--experiment", opts.experiment,
                  "e1|e2|e3|e4|a01|a02|a03|evac");
  run->add_option("--policies", policies_csv,
                  "comma list: ea,ocbam,ocbam-corg,ocbam+,ocbass,ocbasss,aoam");
  run->add_option("--macros", bind(opts.macros), "macro replications");
  run->add_option("--budget", bind(opts.budget), "total budget T");
  run->add_option("--n0", bind(opts.n0), "initial replications");
  run->add_option("--m", bind(opts.m), "subset size");
  run->add_option("--seed", bind(opts.seed), "base seed");
  run->add_option("--threads", bind(opts.threads), "0 = all cores");
  run->add_option("--checkpoints", bind(opts.checkpoints),
                  "budget grid size");
  run->add_option("--truth-draws", bind(opts.truth_draws),
                  "reference draws per plan (evac)");
  run->add_option("--out", [&](const CLI::results_t& r) {
    opts.out_dir = r[0];
    return true;
  }, "output directory");

  // solve-ratios
  auto* solve = app.add_subcommand(
      "solve-ratios", "Asymptotically optimal sampling ratios");
  std::string family = "normal", means, vars, rates, qs;
  int solve_m = 1;
  double tol = 1e-9;
  solve->add_option("--family", family, "normal|exponential|bernoulli");
  solve->add_option("--means", means, "comma list of means (normal)");
  solve->add_option("--vars", vars, "comma list of variances (normal)");
  solve->add_option("--rates", rates, "comma list of rates (exponential)");
  solve->add_option("--q", qs, "comma list of success probs (bernoulli)");
  solve->add_option("--m", solve_m, "subset size")->required();
  solve->add_option("--tol", tol, "stationarity tolerance");

  // evac
  auto* evac = app.add_subcommand(
      "evac", "Expected clearance time of every evacuation plan");
  std::string fixture, evac_out, dump_path;
  std::uint32_t draws = 1000;
  std::uint64_t evac_seed = 0;
  int evac_threads = 0;
  evac->add_option("--fixture", fixture, "network JSON (default: built-in)");
  evac->add_option("--draws", draws, "clearance draws per plan");
  evac->add_option("--seed", evac_seed, "base seed");
  evac->add_option("--threads", evac_threads, "0 = all cores");
  evac->add_option("--out", evac_out, "CSV output file (default: stdout)");
  evac->add_option("--dump-fixture", dump_path,
                   "write the built-in network JSON and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      if (!policies_csv.empty()) opts.policies = cli::split_list(policies_csv);
      return cmd_run(opts, config_path);
    }
    if (solve->parsed())
      return cmd_solve_ratios(family, means, vars, rates, qs, solve_m, tol);
    if (evac->parsed())
      return cmd_evac(fixture, draws, evac_seed, evac_threads, evac_out,
                      dump_path);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const topm::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const topm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
