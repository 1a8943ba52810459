#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridfc/agent.hpp"

namespace gridfc {

/// Raised for anything wrong with user-provided configuration: unknown keys,
/// unparseable values, out-of-range settings, missing or mismatched inputs.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { grqn, tabular };

/// Everything one experiment needs, assembled from defaults, an optional
/// key=value config file, and command-line overrides (in that order).
struct ExperimentConfig {
  std::string case_path;
  double load_scale = 0.55;
  double overload_factor = 1.3;
  Algorithm algorithm = Algorithm::grqn;
  AgentConfig agent;
  double tabular_lr = 0.1;       ///< step size of the tabular baseline
  double risky_fraction = 0.05;  ///< risky threshold as a share of total load
  int runs = 1;                  ///< independent seeds (seed, seed+1, ...)
  int threads = 1;               ///< workers for runs and oracle subtrees
  double time_budget_s = 0.0;    ///< per-run wall clock; 0 disables
  double oracle_node_budget = 1.0e6;
  std::string oracle_path;       ///< existing oracle CSV for regret columns
  std::string output_dir;
  bool wall_timing = false;      ///< real elapsed_ms instead of stable zeros

  /// Throws ConfigError when any setting is unusable.
  void validate() const;
};

/// Applies one key=value setting; the single path used by both config-file
/// parsing and command-line overrides. Throws ConfigError on unknown keys or
/// malformed values.
void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value);

/// Parses flat key=value text ('#' starts a comment, blank lines ignored)
/// on top of default settings.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text);

/// parse_config over a file's contents; missing file is a ConfigError.
[[nodiscard]] ExperimentConfig load_config_file(const std::string& path);

/// Every setting in a fixed key order with round-trip value formatting.
/// parse_config(canonical_config(c)) reproduces c exactly.
[[nodiscard]] std::string canonical_config(const ExperimentConfig& config);

/// FNV-1a over the canonical text minus the output_dir line, so the same
/// experiment written to two directories carries the same identity stamp.
[[nodiscard]] std::uint64_t config_hash(const ExperimentConfig& config);

/// Loads the case named by the config and prepares it for study: absent
/// ratings are replaced by overload_factor times the intact base-case flow
/// (on the unscaled case), then loads are scaled by load_scale.
[[nodiscard]] GridCase load_study_case(const ExperimentConfig& config);

/// Exhaustively enumerates the configured case and writes oracle.csv,
/// oracle_summary.txt, and config.resolved into output_dir.
void cmd_oracle(const ExperimentConfig& config, std::ostream& out);

/// Runs `runs` independent searches (network or tabular per `algorithm`),
/// writing run_NNN.csv per run, run_NNN.params for network runs,
/// aggregate.csv, and config.resolved into output_dir.
void cmd_search(const ExperimentConfig& config, std::ostream& out);

/// Reads two or more cmd_search output directories, checks they studied the
/// same problem (case, loading, horizon, episode count), and prints their
/// aggregate metrics side by side.
void cmd_compare(const std::vector<std::string>& output_dirs,
                 std::ostream& out);

}  // namespace gridfc
