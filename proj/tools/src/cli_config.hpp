#pragma once

// Key/value run configuration: a small TOML-style file with [section]
// headers, merged with command-line overrides. Unknown keys are rejected.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topm/errors.hpp"
#include "topm/harness.hpp"

namespace topm::cli {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Parses "[section]\nkey = value" text into "section.key" -> "value".
// '#' starts a comment; blank lines are ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);

struct RunOptions {
  std::string experiment;  // e1..e4, a01..a03, evac
  std::vector<std::string> policies;
  std::optional<int> m, n0, macros, checkpoints, threads;
  std::optional<std::uint64_t> budget, seed;
  std::optional<std::uint32_t> truth_draws;
  std::optional<std::string> out_dir;

  // Folds config-file values under the option fields that are still unset
  // by flags. Throws ConfigError on unknown keys or unparsable values.
  void merge_config(const std::map<std::string, std::string>& kv);
};

struct ResolvedRun {
  ExperimentConfig config;
  std::string out_dir;
  std::string experiment;
};

// Builds the full experiment configuration for one run invocation.
ResolvedRun resolve_run(const RunOptions& opts);

std::vector<std::string> split_list(const std::string& csv);

}  // namespace topm::cli
