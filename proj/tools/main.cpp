// Command-line front end: four subcommands over the experiment harness.
//
//   gridfc oracle   --config FILE [--set key=value ...]
//   gridfc search   --config FILE [--set key=value ...]
//   gridfc baseline --config FILE [--set key=value ...]   (tabular agent)
//   gridfc compare  DIR DIR [DIR ...]
//
// Settings resolve in order: built-in defaults, then the --config file,
// then each --set override.  Exit status: 0 on success, 1 for configuration
// or usage problems, 2 for unexpected internal errors.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridfc/experiment.hpp"

namespace {

/// Applies one `--set key=value` argument to the configuration.
void apply_set(gridfc::ExperimentConfig& config, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos) {
    throw gridfc::ConfigError("override '" + spec +
                              "' must look like key=value");
  }
  gridfc::apply_override(config, spec.substr(0, eq), spec.substr(eq + 1));
}

/// Loads the optional config file, then layers the --set overrides on top.
gridfc::ExperimentConfig resolve(const std::string& config_path,
                                 const std::vector<std::string>& sets) {
  gridfc::ExperimentConfig config;
  if (!config_path.empty()) {
    config = gridfc::load_config_file(config_path);
  }
  for (const std::string& spec : sets) {
    apply_set(config, spec);
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risky fault-chain search over cascading grid outages"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> compare_dirs;

  const auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "key=value configuration file (defaults apply if omitted)")
        ->option_text("FILE");
    cmd->add_option("--set", sets,
                    "override one setting, e.g. --set kappa=3 (repeatable)")
        ->option_text("KEY=VALUE");
  };

  CLI::App* oracle = app.add_subcommand(
      "oracle", "enumerate every fault chain and rank total load losses");
  add_config_flags(oracle);
  CLI::App* search = app.add_subcommand(
      "search", "train the configured agent and log the chains it finds");
  add_config_flags(search);
  CLI::App* baseline = app.add_subcommand(
      "baseline", "run the tabular baseline agent on the same problem");
  add_config_flags(baseline);
  CLI::App* compare = app.add_subcommand(
      "compare", "tabulate aggregate metrics from finished search runs");
  compare->add_option("dirs", compare_dirs, "two or more run directories")
      ->option_text("DIR...");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse diagnostic
    return code == 0 ? 0 : 1;
  }

  try {
    if (*oracle) {
      gridfc::cmd_oracle(resolve(config_path, sets), std::cout);
    } else if (*search) {
      gridfc::cmd_search(resolve(config_path, sets), std::cout);
    } else if (*baseline) {
      gridfc::ExperimentConfig config = resolve(config_path, sets);
      config.algorithm = gridfc::Algorithm::tabular;
      gridfc::cmd_search(config, std::cout);
    } else if (*compare) {
      gridfc::cmd_compare(compare_dirs, std::cout);
    }
  } catch (const gridfc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
