#include "gridfc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>
#include <thread>
#include <utility>

#include "gridfc/checkpoint.hpp"
#include "gridfc/numformat.hpp"
#include "gridfc/oracle.hpp"
#include "gridfc/powerflow.hpp"
#include "gridfc/tabular.hpp"

namespace gridfc {

namespace {

constexpr std::string_view kVersionTag = "gridfc 0.1.0";

std::string trim(std::string_view text) {
  const std::size_t begin = text.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const std::size_t end = text.find_last_not_of(" \t\r");
  return std::string(text.substr(begin, end - begin + 1));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::uint64_t parse_u64(const std::string& token) {
  std::uint64_t value = 0;
  const auto result =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc{} || result.ptr != token.data() + token.size()) {
    throw std::invalid_argument("not an unsigned integer: " + token);
  }
  return value;
}

bool parse_flag(const std::string& token) {
  if (token == "0") return false;
  if (token == "1") return true;
  throw std::invalid_argument("expected 0 or 1, got: " + token);
}

/// The one place that defines the key set and its canonical order.
const std::vector<std::string>& key_order() {
  static const std::vector<std::string> order{
      "case_path",      "load_scale",     "overload_factor",
      "algorithm",      "gamma",          "epsilon0",
      "batch_size",     "explore_iters",  "horizon",
      "total_episodes", "learning_rate",  "kappa",
      "hidden",         "out_features",   "taps",
      "seed",           "tabular_lr",     "risky_fraction",
      "runs",           "threads",        "time_budget_s",
      "oracle_node_budget", "oracle_path", "output_dir",
      "wall_timing"};
  return order;
}

std::string value_of(const ExperimentConfig& config, const std::string& key) {
  if (key == "case_path") return config.case_path;
  if (key == "load_scale") return format_double(config.load_scale);
  if (key == "overload_factor") return format_double(config.overload_factor);
  if (key == "algorithm") {
    return config.algorithm == Algorithm::grqn ? "grqn" : "tabular";
  }
  if (key == "gamma") return format_double(config.agent.gamma);
  if (key == "epsilon0") return format_double(config.agent.epsilon0);
  if (key == "batch_size") return std::to_string(config.agent.batch_size);
  if (key == "explore_iters") return std::to_string(config.agent.explore_iters);
  if (key == "horizon") return std::to_string(config.agent.horizon);
  if (key == "total_episodes") {
    return std::to_string(config.agent.total_episodes);
  }
  if (key == "learning_rate") return format_double(config.agent.learning_rate);
  if (key == "kappa") return std::to_string(config.agent.kappa);
  if (key == "hidden") return std::to_string(config.agent.hidden);
  if (key == "out_features") return std::to_string(config.agent.out_features);
  if (key == "taps") return std::to_string(config.agent.taps);
  if (key == "seed") return std::to_string(config.agent.seed);
  if (key == "tabular_lr") return format_double(config.tabular_lr);
  if (key == "risky_fraction") return format_double(config.risky_fraction);
  if (key == "runs") return std::to_string(config.runs);
  if (key == "threads") return std::to_string(config.threads);
  if (key == "time_budget_s") return format_double(config.time_budget_s);
  if (key == "oracle_node_budget") {
    return format_double(config.oracle_node_budget);
  }
  if (key == "oracle_path") return config.oracle_path;
  if (key == "output_dir") return config.output_dir;
  if (key == "wall_timing") return config.wall_timing ? "1" : "0";
  throw std::logic_error("unlisted key: " + key);
}

struct RunOutcome {
  double cum_tll_mw = 0.0;
  int risky_count = 0;
  double regret_mw = std::numeric_limits<double>::quiet_NaN();
  double precision = 0.0;
  int episodes = 0;
};

RunOutcome summarize(const SearchResult& result) {
  RunOutcome outcome;
  outcome.episodes = result.episodes_completed;
  for (const MetricsRow& row : result.metrics) {
    if (row.risky) ++outcome.risky_count;
  }
  if (!result.metrics.empty()) {
    const MetricsRow& last = result.metrics.back();
    outcome.cum_tll_mw = last.cum_tll_mw;
    outcome.regret_mw = last.regret_mw;
    outcome.precision = last.precision;
  }
  return outcome;
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
double stddev_of(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean_of(values);
  double sum_sq = 0.0;
  for (double v : values) sum_sq += (v - mu) * (v - mu);
  return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

std::string fixed6(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6f", value);
  return buffer;
}

std::string fixed3(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.3f", value);
  return buffer;
}

std::string stamp_line(std::uint64_t hash) {
  char buffer[96];
  std::snprintf(buffer, sizeof buffer, "%s config_hash=%016llx",
                std::string(kVersionTag).c_str(),
                static_cast<unsigned long long>(hash));
  return buffer;
}

void write_metrics_csv(const std::string& path, const MetricsSeries& rows,
                       std::uint64_t hash, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write: " + path);
  out << "# " << stamp_line(hash) << " seed=" << seed << "\n";
  out << "s,tll_mw,cum_tll_mw,risky,regret_mw,precision,elapsed_ms\n";
  for (const MetricsRow& row : rows) {
    out << row.s << ',' << fixed6(row.tll_mw) << ',' << fixed6(row.cum_tll_mw)
        << ',' << (row.risky ? 1 : 0) << ',' << fixed6(row.regret_mw) << ','
        << fixed6(row.precision) << ',' << fixed3(row.elapsed_ms) << '\n';
  }
  if (!out.flush()) throw ConfigError("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write: " + path);
  out << text;
  if (!out.flush()) throw ConfigError("write failed: " + path);
}

void ensure_output_dir(const ExperimentConfig& config) {
  if (config.output_dir.empty()) throw ConfigError("output_dir is required");
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) {
    throw ConfigError("cannot create " + config.output_dir + ": " +
                      ec.message());
  }
}

std::string run_file_name(int run, const char* suffix) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "run_%03d.%s", run, suffix);
  return buffer;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (case_path.empty()) throw ConfigError("case_path is required");
  if (!(load_scale > 0.0)) throw ConfigError("load_scale must be > 0");
  if (!(overload_factor > 0.0)) {
    throw ConfigError("overload_factor must be > 0");
  }
  if (!(tabular_lr > 0.0)) throw ConfigError("tabular_lr must be > 0");
  if (!(risky_fraction >= 0.0 && risky_fraction <= 1.0)) {
    throw ConfigError("risky_fraction must be within [0, 1]");
  }
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (time_budget_s < 0.0) throw ConfigError("time_budget_s must be >= 0");
  if (!(oracle_node_budget > 0.0)) {
    throw ConfigError("oracle_node_budget must be > 0");
  }
  try {
    agent.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value) {
  try {
    if (key == "case_path") {
      config.case_path = value;
    } else if (key == "load_scale") {
      config.load_scale = parse_double(value);
    } else if (key == "overload_factor") {
      config.overload_factor = parse_double(value);
    } else if (key == "algorithm") {
      if (value == "grqn") {
        config.algorithm = Algorithm::grqn;
      } else if (value == "tabular") {
        config.algorithm = Algorithm::tabular;
      } else {
        throw std::invalid_argument("algorithm must be grqn or tabular");
      }
    } else if (key == "gamma") {
      config.agent.gamma = parse_double(value);
    } else if (key == "epsilon0") {
      config.agent.epsilon0 = parse_double(value);
    } else if (key == "batch_size") {
      config.agent.batch_size = parse_int(value);
    } else if (key == "explore_iters") {
      config.agent.explore_iters = parse_int(value);
    } else if (key == "horizon") {
      config.agent.horizon = parse_int(value);
    } else if (key == "total_episodes") {
      config.agent.total_episodes = parse_int(value);
    } else if (key == "learning_rate") {
      config.agent.learning_rate = parse_double(value);
    } else if (key == "kappa") {
      config.agent.kappa = parse_int(value);
    } else if (key == "hidden") {
      config.agent.hidden = parse_int(value);
    } else if (key == "out_features") {
      config.agent.out_features = parse_int(value);
    } else if (key == "taps") {
      config.agent.taps = parse_int(value);
    } else if (key == "seed") {
      config.agent.seed = parse_u64(value);
    } else if (key == "tabular_lr") {
      config.tabular_lr = parse_double(value);
    } else if (key == "risky_fraction") {
      config.risky_fraction = parse_double(value);
    } else if (key == "runs") {
      config.runs = parse_int(value);
    } else if (key == "threads") {
      config.threads = parse_int(value);
    } else if (key == "time_budget_s") {
      config.time_budget_s = parse_double(value);
    } else if (key == "oracle_node_budget") {
      config.oracle_node_budget = parse_double(value);
    } else if (key == "oracle_path") {
      config.oracle_path = value;
    } else if (key == "output_dir") {
      config.output_dir = value;
    } else if (key == "wall_timing") {
      config.wall_timing = parse_flag(value);
    } else {
      throw ConfigError("unknown setting: " + key);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value, got '" + stripped + "'");
    }
    apply_override(config, trim(stripped.substr(0, eq)),
                   trim(stripped.substr(eq + 1)));
  }
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(read_text_file(path));
}

std::string canonical_config(const ExperimentConfig& config) {
  std::string text;
  for (const std::string& key : key_order()) {
    text += key;
    text += '=';
    text += value_of(config, key);
    text += '\n';
  }
  return text;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  constexpr std::uint64_t kOffset = 14695981039346656037ULL;
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  std::uint64_t hash = kOffset;
  std::istringstream lines(canonical_config(config));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("output_dir=", 0) == 0) continue;  // location-independent
    for (const char c : line) {
      hash ^= static_cast<unsigned char>(c);
      hash *= kPrime;
    }
    hash ^= static_cast<unsigned char>('\n');
    hash *= kPrime;
  }
  return hash;
}

GridCase load_study_case(const ExperimentConfig& config) {
  config.validate();
  GridCase grid;
  try {
    grid = parse_case(read_text_file(config.case_path));
  } catch (const ParseError& e) {
    throw ConfigError(config.case_path + ": " + e.what());
  } catch (const InfeasibleCaseError& e) {
    throw ConfigError(config.case_path + ": " + e.what());
  }
  grid = with_rating_fallback(grid, config.overload_factor);
  return apply_load_scale(grid, config.load_scale);
}

void cmd_oracle(const ExperimentConfig& config, std::ostream& out) {
  const GridCase grid = load_study_case(config);
  ensure_output_dir(config);
  const double threshold = config.risky_fraction * grid.total_load_mw();

  OracleTable table;
  try {
    table = enumerate_chains(grid, config.agent.horizon, threshold,
                             config.oracle_node_budget, config.threads);
  } catch (const BudgetExceededError& e) {
    throw ConfigError(std::string(e.what()) +
                      " (raise oracle_node_budget to proceed)");
  }

  const std::filesystem::path dir(config.output_dir);
  const std::uint64_t hash = config_hash(config);
  save_oracle(table, (dir / "oracle.csv").string(), {stamp_line(hash)});

  const int top_s = config.agent.total_episodes;
  std::string summary;
  summary += "chains=" + std::to_string(table.size()) + "\n";
  summary += "risky_count=" + std::to_string(table.risky_count()) + "\n";
  summary += "risky_threshold_mw=" + format_double(threshold) + "\n";
  summary += "top_s=" + std::to_string(top_s) + "\n";
  summary += "top_s_sum_mw=" + format_double(table.top_sum(top_s)) + "\n";
  write_text((dir / "oracle_summary.txt").string(), summary);
  write_text((dir / "config.resolved").string(), canonical_config(config));

  out << "oracle: " << table.size() << " chains, " << table.risky_count()
      << " risky at " << fixed6(threshold) << " MW, top-" << top_s
      << " sum " << fixed6(table.top_sum(top_s)) << " MW\n";
}

void cmd_search(const ExperimentConfig& config, std::ostream& out) {
  const GridCase grid = load_study_case(config);
  ensure_output_dir(config);
  const double threshold = config.risky_fraction * grid.total_load_mw();

  double oracle_sum = std::numeric_limits<double>::quiet_NaN();
  if (!config.oracle_path.empty()) {
    try {
      oracle_sum =
          load_oracle(config.oracle_path).top_sum(config.agent.total_episodes);
    } catch (const OracleIoError& e) {
      throw ConfigError(e.what());
    }
  }

  const std::filesystem::path dir(config.output_dir);
  const std::uint64_t hash = config_hash(config);

  std::vector<RunOutcome> outcomes(static_cast<std::size_t>(config.runs));
  std::vector<std::string> failures(static_cast<std::size_t>(config.runs));

  auto run_one = [&](int r) {
    AgentConfig agent = config.agent;
    agent.seed = config.agent.seed + static_cast<std::uint64_t>(r);
    SearchOptions options;
    options.oracle_top_s_sum_mw = oracle_sum;
    options.risky_threshold_mw = threshold;
    options.time_budget_s = config.time_budget_s;
    options.wall_timing = config.wall_timing;

    CascadeEnv env(grid, agent.horizon);
    const SearchResult result =
        config.algorithm == Algorithm::grqn
            ? run_search(env, agent, options)
            : run_baseline(env, agent, config.tabular_lr, options);

    write_metrics_csv((dir / run_file_name(r, "csv")).string(), result.metrics,
                      hash, agent.seed);
    if (result.parameters.has_value()) {
      save_parameters(*result.parameters,
                      (dir / run_file_name(r, "params")).string());
    }
    outcomes[static_cast<std::size_t>(r)] = summarize(result);
  };

  const int workers = std::min(config.threads, config.runs);
  if (workers <= 1) {
    for (int r = 0; r < config.runs; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    auto work = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= config.runs) break;
        try {
          run_one(r);
        } catch (const std::exception& e) {
          failures[static_cast<std::size_t>(r)] = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    for (const std::string& failure : failures) {
      if (!failure.empty()) throw std::runtime_error(failure);
    }
  }

  std::vector<double> cums, riskies, regrets, precisions, episode_counts;
  for (int r = 0; r < config.runs; ++r) {
    const RunOutcome& outcome = outcomes[static_cast<std::size_t>(r)];
    cums.push_back(outcome.cum_tll_mw);
    riskies.push_back(static_cast<double>(outcome.risky_count));
    regrets.push_back(outcome.regret_mw);
    precisions.push_back(outcome.precision);
    episode_counts.push_back(static_cast<double>(outcome.episodes));
    out << "run " << run_file_name(r, "csv") << ": episodes="
        << outcome.episodes << " cum_tll_mw=" << fixed6(outcome.cum_tll_mw)
        << " risky=" << outcome.risky_count
        << " regret_mw=" << fixed6(outcome.regret_mw) << "\n";
  }

  std::string aggregate;
  aggregate += "# " + stamp_line(hash) +
               " seed=" + std::to_string(config.agent.seed) + "\n";
  aggregate += "metric,mean,stddev\n";
  auto add_row = [&aggregate](const char* name,
                              const std::vector<double>& values) {
    aggregate += std::string(name) + "," + fixed6(mean_of(values)) + "," +
                 fixed6(stddev_of(values)) + "\n";
  };
  add_row("cum_tll_mw", cums);
  add_row("risky_count", riskies);
  add_row("regret_mw", regrets);
  add_row("precision", precisions);
  add_row("episodes", episode_counts);
  write_text((dir / "aggregate.csv").string(), aggregate);
  write_text((dir / "config.resolved").string(), canonical_config(config));
}

void cmd_compare(const std::vector<std::string>& output_dirs,
                 std::ostream& out) {
  if (output_dirs.size() < 2) {
    throw ConfigError("compare needs at least two output directories");
  }

  struct Column {
    std::string dir;
    ExperimentConfig config;
    std::vector<std::pair<std::string, std::string>> rows;  // metric -> cell
  };
  std::vector<Column> columns;

  for (const std::string& dir : output_dirs) {
    Column column;
    column.dir = dir;
    column.config = parse_config(
        read_text_file((std::filesystem::path(dir) / "config.resolved")
                           .string()));

    const std::string text =
        read_text_file((std::filesystem::path(dir) / "aggregate.csv").string());
    std::istringstream lines(text);
    std::string line;
    bool saw_header = false;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      if (!saw_header) {
        if (line != "metric,mean,stddev") {
          throw ConfigError(dir + "/aggregate.csv: unexpected header");
        }
        saw_header = true;
        continue;
      }
      const std::size_t first = line.find(',');
      const std::size_t second = line.find(',', first + 1);
      if (first == std::string::npos || second == std::string::npos) {
        throw ConfigError(dir + "/aggregate.csv: malformed row '" + line + "'");
      }
      double mean = 0.0;
      double sd = 0.0;
      try {
        mean = parse_double(line.substr(first + 1, second - first - 1));
        sd = parse_double(line.substr(second + 1));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(dir + "/aggregate.csv: " + e.what());
      }
      column.rows.emplace_back(line.substr(0, first),
                               fixed3(mean) + " (" + fixed3(sd) + ")");
    }
    if (!saw_header || column.rows.empty()) {
      throw ConfigError(dir + "/aggregate.csv: no metrics found");
    }
    columns.push_back(std::move(column));
  }

  const ExperimentConfig& reference = columns.front().config;
  for (const Column& column : columns) {
    const ExperimentConfig& config = column.config;
    if (config.case_path != reference.case_path ||
        config.load_scale != reference.load_scale ||
        config.agent.horizon != reference.agent.horizon ||
        config.agent.total_episodes != reference.agent.total_episodes) {
      throw ConfigError(column.dir +
                        ": studies a different problem than " +
                        columns.front().dir +
                        " (case, load_scale, horizon, and total_episodes "
                        "must all match)");
    }
  }

  const std::vector<std::string> metric_order{
      "cum_tll_mw", "risky_count", "regret_mw", "precision", "episodes"};
  auto cell_for = [](const Column& column,
                     const std::string& metric) -> std::string {
    for (const auto& [name, cell] : column.rows) {
      if (name == metric) return cell;
    }
    throw ConfigError(column.dir + ": aggregate.csv lacks metric '" + metric +
                      "'");
  };
  auto label_for = [](const Column& column) {
    std::string label =
        column.config.algorithm == Algorithm::grqn
            ? "grqn kappa=" + std::to_string(column.config.agent.kappa)
            : "tabular";
    return label + " [" + column.dir + "]";
  };

  std::vector<std::size_t> widths;
  widths.push_back(std::string("metric").size());
  for (const std::string& metric : metric_order) {
    widths[0] = std::max(widths[0], metric.size());
  }
  for (const Column& column : columns) {
    std::size_t width = label_for(column).size();
    for (const std::string& metric : metric_order) {
      width = std::max(width, cell_for(column, metric).size());
    }
    widths.push_back(width);
  }

  auto pad = [](const std::string& text, std::size_t width) {
    return text + std::string(width - text.size(), ' ');
  };
  out << pad("metric", widths[0]);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out << "  " << pad(label_for(columns[c]), widths[c + 1]);
  }
  out << "\n";
  for (const std::string& metric : metric_order) {
    out << pad(metric, widths[0]);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << "  " << pad(cell_for(columns[c], metric), widths[c + 1]);
    }
    out << "\n";
  }
}

}  // namespace gridfc
