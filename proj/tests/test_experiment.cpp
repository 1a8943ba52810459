#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "gridfc/case.hpp"
#include "gridfc/checkpoint.hpp"
#include "gridfc/experiment.hpp"
#include "gridfc/numformat.hpp"
#include "gridfc/oracle.hpp"
#include "support.hpp"

using namespace gridfc;
namespace fs = std::filesystem;

namespace {

/// Scratch directory wiped on construction and destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  [[nodiscard]] std::string str(const char* child = nullptr) const {
    return child ? (path / child).string() : path.string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.front() != '#') lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  for (;;) {
    const std::size_t end = line.find(',', begin);
    fields.push_back(line.substr(begin, end - begin));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return fields;
}

/// A fast, fully exhaustible experiment on the four-bus fixture.
ExperimentConfig quick_config(const TempDir& dir, Algorithm algorithm) {
  const std::string case_path = dir.str("four_bus.case");
  std::ofstream(case_path) << testsupport::four_bus_case();

  ExperimentConfig config;
  config.case_path = case_path;
  config.load_scale = 1.0;
  config.algorithm = algorithm;
  config.agent.horizon = 2;
  config.agent.total_episodes = 6;
  config.agent.explore_iters = 0;
  config.agent.batch_size = 2;
  config.agent.kappa = 1;
  config.agent.hidden = 2;
  config.agent.out_features = 2;
  config.agent.taps = 2;
  config.agent.seed = 5;
  config.risky_fraction = 0.25;  // 50 MW on the 200 MW fixture
  return config;
}

}  // namespace

TEST_CASE("key=value text feeds every setting through one path") {
  const std::string text =
      "# an experiment\n"
      "case_path = data/case39.case\n"
      "load_scale=0.55   # heavy study\n"
      "algorithm=tabular\n"
      "kappa=2\n"
      "seed=12345678901234567890\n"
      "wall_timing=1\n"
      "\n"
      "oracle_path=out/oracle.csv\n";
  const ExperimentConfig config = parse_config(text);
  CHECK(config.case_path == "data/case39.case");
  CHECK(config.load_scale == 0.55);
  CHECK(config.algorithm == Algorithm::tabular);
  CHECK(config.agent.kappa == 2);
  CHECK(config.agent.seed == 12345678901234567890ULL);
  CHECK(config.wall_timing);
  CHECK(config.oracle_path == "out/oracle.csv");
  CHECK(config.agent.gamma == 0.99);  // untouched defaults stay put

  SUBCASE("later lines win") {
    const ExperimentConfig last = parse_config("kappa=1\nkappa=3\n");
    CHECK(last.agent.kappa == 3);
  }
}

TEST_CASE("malformed configuration text is rejected with context") {
  CHECK_THROWS_AS((void)parse_config("no_such_key=1\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config("kappa=fast\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config("just a sentence\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config("algorithm=dqn\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config("wall_timing=true\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config("seed=-4\n"), ConfigError);

  ExperimentConfig config;
  CHECK_THROWS_AS(apply_override(config, "velocity", "9"), ConfigError);
  CHECK_NOTHROW(apply_override(config, "threads", "4"));
  CHECK(config.threads == 4);
}

TEST_CASE("canonical text reproduces the configuration exactly") {
  ExperimentConfig config;
  config.case_path = "data/case118.case";
  config.load_scale = 0.6;
  config.algorithm = Algorithm::tabular;
  config.agent.kappa = 2;
  config.agent.seed = 987654321ULL;
  config.agent.learning_rate = 0.00125;
  config.oracle_node_budget = 6.0e6;
  config.oracle_path = "oracle/oracle.csv";
  config.output_dir = "out/run1";
  config.wall_timing = true;

  const std::string text = canonical_config(config);
  const ExperimentConfig reparsed = parse_config(text);
  CHECK(canonical_config(reparsed) == text);
  CHECK(reparsed.agent.learning_rate == config.agent.learning_rate);
  CHECK(reparsed.oracle_node_budget == config.oracle_node_budget);
  CHECK(reparsed.agent.seed == config.agent.seed);

  // Every known key appears exactly once.
  CHECK(data_lines(text).size() == 25);
}

TEST_CASE("the configuration hash ignores where output lands") {
  ExperimentConfig a;
  a.case_path = "data/case39.case";
  a.output_dir = "out/first";
  ExperimentConfig b = a;
  b.output_dir = "out/second";
  CHECK(config_hash(a) == config_hash(b));

  SUBCASE("but tracks every experimental knob") {
    ExperimentConfig c = a;
    c.agent.kappa = 2;
    CHECK(config_hash(c) != config_hash(a));
    ExperimentConfig d = a;
    d.load_scale = 0.56;
    CHECK(config_hash(d) != config_hash(a));
    ExperimentConfig e = a;
    e.agent.seed += 1;
    CHECK(config_hash(e) != config_hash(a));
  }
}

TEST_CASE("experiment settings are range-checked") {
  TempDir dir("gridfc_exp_validate");
  ExperimentConfig config = quick_config(dir, Algorithm::grqn);
  CHECK_NOTHROW(config.validate());

  auto expect_config_error = [](ExperimentConfig bad) {
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  };
  ExperimentConfig bad = config;
  bad.case_path.clear();
  expect_config_error(bad);
  bad = config;
  bad.load_scale = 0.0;
  expect_config_error(bad);
  bad = config;
  bad.risky_fraction = 1.5;
  expect_config_error(bad);
  bad = config;
  bad.runs = 0;
  expect_config_error(bad);
  bad = config;
  bad.threads = 0;
  expect_config_error(bad);
  bad = config;
  bad.tabular_lr = 0.0;
  expect_config_error(bad);
  bad = config;
  bad.agent.gamma = 2.0;  // agent problems surface as ConfigError too
  expect_config_error(bad);
}

TEST_CASE("the study case gets fallback ratings before load scaling") {
  TempDir dir("gridfc_exp_case");
  ExperimentConfig config = quick_config(dir, Algorithm::grqn);
  config.load_scale = 0.5;
  const GridCase grid = load_study_case(config);
  CHECK(grid.total_load_mw() == doctest::Approx(100.0));  // 200 MW halved
  CHECK(grid.load_scale == 0.5);

  SUBCASE("a missing case file is a configuration problem") {
    config.case_path = dir.str("absent.case");
    CHECK_THROWS_AS((void)load_study_case(config), ConfigError);
  }
  SUBCASE("a corrupt case file is a configuration problem") {
    const std::string bad_path = dir.str("bad.case");
    std::ofstream(bad_path) << "mpc.baseMVA = 100;\nnot a case\n";
    config.case_path = bad_path;
    CHECK_THROWS_AS((void)load_study_case(config), ConfigError);
  }
}

TEST_CASE("config files load from disk") {
  TempDir dir("gridfc_exp_file");
  const std::string path = dir.str("exp.conf");
  std::ofstream(path) << "kappa=2\nload_scale=0.6\n";
  const ExperimentConfig config = load_config_file(path);
  CHECK(config.agent.kappa == 2);
  CHECK(config.load_scale == 0.6);
  CHECK_THROWS_AS((void)load_config_file(dir.str("missing.conf")),
                  ConfigError);
}

TEST_CASE("the oracle command writes the table, summary, and config") {
  TempDir dir("gridfc_exp_oracle");
  ExperimentConfig config = quick_config(dir, Algorithm::grqn);
  config.output_dir = dir.str("oracle_out");

  std::ostringstream log;
  cmd_oracle(config, log);
  CHECK(log.str().find("6 chains") != std::string::npos);

  const OracleTable loaded =
      load_oracle((fs::path(config.output_dir) / "oracle.csv").string());
  REQUIRE(loaded.size() == 6);

  const GridCase grid = load_study_case(config);
  const OracleTable direct = enumerate_chains(
      grid, 2, config.risky_fraction * grid.total_load_mw());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(loaded.entries()[i].actions == direct.entries()[i].actions);
    CHECK(loaded.entries()[i].tll_mw == direct.entries()[i].tll_mw);
    CHECK(loaded.entries()[i].risky == direct.entries()[i].risky);
  }

  const std::string summary = slurp(
      (fs::path(config.output_dir) / "oracle_summary.txt").string());
  CHECK(summary.find("chains=6") != std::string::npos);
  CHECK(summary.find("top_s=6") != std::string::npos);
  CHECK(fs::exists(fs::path(config.output_dir) / "config.resolved"));

  SUBCASE("a tiny node budget refuses to enumerate") {
    config.oracle_node_budget = 5.0;
    config.output_dir = dir.str("oracle_blocked");
    std::ostringstream sink;
    CHECK_THROWS_AS(cmd_oracle(config, sink), ConfigError);
  }
}

TEST_CASE("the search command writes per-run metrics and an aggregate") {
  TempDir dir("gridfc_exp_search");
  ExperimentConfig config = quick_config(dir, Algorithm::tabular);
  config.runs = 2;
  config.output_dir = dir.str("search_out");

  std::ostringstream log;
  cmd_search(config, log);
  CHECK(log.str().find("run_000.csv") != std::string::npos);
  CHECK(log.str().find("run_001.csv") != std::string::npos);

  const fs::path out(config.output_dir);
  REQUIRE(fs::exists(out / "run_000.csv"));
  REQUIRE(fs::exists(out / "run_001.csv"));
  REQUIRE(fs::exists(out / "aggregate.csv"));
  REQUIRE(fs::exists(out / "config.resolved"));
  CHECK_FALSE(fs::exists(out / "run_000.params"));  // tabular keeps no net

  const std::string csv = slurp((out / "run_000.csv").string());
  CHECK(csv.find("# gridfc 0.1.0 config_hash=") != std::string::npos);
  CHECK(csv.find("seed=5") != std::string::npos);
  const std::vector<std::string> rows = data_lines(csv);
  REQUIRE(rows.size() == 1 + 6);  // header + six exhaustive episodes
  CHECK(rows[0] == "s,tll_mw,cum_tll_mw,risky,regret_mw,precision,elapsed_ms");
  const std::vector<std::string> first = split_csv(rows[1]);
  REQUIRE(first.size() == 7);
  CHECK(first[0] == "1");
  CHECK(first[4] == "nan");      // no oracle reference was given
  CHECK(first[6] == "0.000");    // stable timing by default

  const std::string aggregate = slurp((out / "aggregate.csv").string());
  const std::vector<std::string> agg_rows = data_lines(aggregate);
  REQUIRE(agg_rows.size() == 1 + 5);
  CHECK(agg_rows[0] == "metric,mean,stddev");
  const std::vector<std::string> episodes = split_csv(agg_rows[5]);
  CHECK(episodes[0] == "episodes");
  CHECK(parse_double(episodes[1]) == doctest::Approx(6.0));
  CHECK(parse_double(episodes[2]) == doctest::Approx(0.0));
}

TEST_CASE("network runs leave a loadable parameter file") {
  TempDir dir("gridfc_exp_params");
  ExperimentConfig config = quick_config(dir, Algorithm::grqn);
  config.output_dir = dir.str("grqn_out");

  std::ostringstream log;
  cmd_search(config, log);
  const fs::path params = fs::path(config.output_dir) / "run_000.params";
  REQUIRE(fs::exists(params));
  const GrnnParameters loaded = load_parameters(params.string());
  CHECK(loaded.config.buses == 4);
  CHECK(loaded.config.actions == 3);
  CHECK(loaded.config.hidden == 2);
}

TEST_CASE("an oracle reference fills the regret column") {
  TempDir dir("gridfc_exp_regret");
  ExperimentConfig config = quick_config(dir, Algorithm::tabular);
  config.output_dir = dir.str("oracle_dir");
  std::ostringstream sink;
  cmd_oracle(config, sink);

  config.oracle_path =
      (fs::path(dir.str("oracle_dir")) / "oracle.csv").string();
  config.output_dir = dir.str("search_dir");
  cmd_search(config, sink);

  const OracleTable oracle = load_oracle(config.oracle_path);
  const double reference = oracle.top_sum(config.agent.total_episodes);

  const std::vector<std::string> rows =
      data_lines(slurp((fs::path(config.output_dir) / "run_000.csv").string()));
  REQUIRE(rows.size() == 1 + 6);
  const std::vector<std::string> last = split_csv(rows.back());
  const double cum = parse_double(last[2]);
  const double regret = parse_double(last[4]);
  CHECK(regret == doctest::Approx(reference - cum).epsilon(1e-6));
  // The search visited every chain, so it leaves no regret on the table.
  CHECK(regret == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));

  SUBCASE("a bad oracle path is a configuration problem") {
    config.oracle_path = dir.str("nope.csv");
    config.output_dir = dir.str("search_bad");
    CHECK_THROWS_AS(cmd_search(config, sink), ConfigError);
  }
}

TEST_CASE("reruns of one configuration are byte-identical") {
  TempDir dir("gridfc_exp_bytes");
  ExperimentConfig config = quick_config(dir, Algorithm::grqn);

  std::ostringstream sink;
  config.output_dir = dir.str("first");
  cmd_search(config, sink);
  config.output_dir = dir.str("second");
  cmd_search(config, sink);

  const std::string csv_a = slurp(dir.str("first/run_000.csv"));
  const std::string csv_b = slurp(dir.str("second/run_000.csv"));
  CHECK(csv_a == csv_b);
  CHECK(slurp(dir.str("first/aggregate.csv")) ==
        slurp(dir.str("second/aggregate.csv")));
  CHECK(slurp(dir.str("first/run_000.params")) ==
        slurp(dir.str("second/run_000.params")));
}

TEST_CASE("compare lines up results that studied the same problem") {
  TempDir dir("gridfc_exp_compare");
  std::ostringstream sink;

  ExperimentConfig tabular = quick_config(dir, Algorithm::tabular);
  tabular.output_dir = dir.str("dir_tabular");
  cmd_search(tabular, sink);

  ExperimentConfig network = quick_config(dir, Algorithm::grqn);
  network.output_dir = dir.str("dir_grqn");
  cmd_search(network, sink);

  std::ostringstream table;
  cmd_compare({tabular.output_dir, network.output_dir}, table);
  const std::string text = table.str();
  CHECK(text.find("tabular [") != std::string::npos);
  CHECK(text.find("grqn kappa=1 [") != std::string::npos);
  CHECK(text.find("cum_tll_mw") != std::string::npos);
  CHECK(text.find("risky_count") != std::string::npos);
  CHECK(text.find("episodes") != std::string::npos);

  SUBCASE("fewer than two directories is refused") {
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_compare({tabular.output_dir}, out), ConfigError);
  }
  SUBCASE("a missing directory is refused") {
    std::ostringstream out;
    CHECK_THROWS_AS(
        cmd_compare({tabular.output_dir, dir.str("never_ran")}, out),
        ConfigError);
  }
  SUBCASE("a different problem is refused") {
    ExperimentConfig longer = quick_config(dir, Algorithm::tabular);
    longer.agent.total_episodes = 4;
    longer.output_dir = dir.str("dir_longer");
    cmd_search(longer, sink);
    std::ostringstream out;
    CHECK_THROWS_AS(
        cmd_compare({tabular.output_dir, longer.output_dir}, out),
        ConfigError);
  }
}
