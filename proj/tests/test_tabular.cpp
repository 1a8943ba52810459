#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include "gridfc/agent.hpp"
#include "gridfc/case.hpp"
#include "gridfc/env.hpp"
#include "gridfc/tabular.hpp"
#include "support.hpp"

using namespace gridfc;
using testsupport::data_path;
using testsupport::read_file;

namespace {

GridCase scaled_case39() {
  GridCase grid = parse_case(read_file(data_path("case39.case")));
  return apply_load_scale(grid, 0.55);
}

}  // namespace

TEST_CASE("the value table defaults to zero and distinguishes prefixes") {
  QTable table;
  CHECK(table.value({}, 3) == 0.0);
  CHECK(table.size() == 0);

  table.assign({}, 3, 1.5);
  table.assign({3}, 0, -2.0);
  CHECK(table.value({}, 3) == 1.5);
  CHECK(table.value({3}, 0) == -2.0);
  CHECK(table.value({3}, 1) == 0.0);
  CHECK(table.size() == 2);

  table.assign({}, 3, 2.5);  // overwrite, not a new entry
  CHECK(table.value({}, 3) == 2.5);
  CHECK(table.size() == 2);
}

TEST_CASE("a terminal backup moves the value toward the reward") {
  QTable table;
  CHECK(td_update(table, {}, 0, 100.0, {}, true, 0.99, 0.3) ==
        doctest::Approx(30.0));
  CHECK(table.value({}, 0) == doctest::Approx(30.0));

  SUBCASE("a unit learning rate lands on the reward in one step") {
    QTable fresh;
    CHECK(td_update(fresh, {}, 1, 42.0, {}, true, 0.99, 1.0) ==
          doctest::Approx(42.0));
  }
  SUBCASE("a zero learning rate changes nothing") {
    CHECK(td_update(table, {}, 0, 1000.0, {}, true, 0.99, 0.0) ==
          doctest::Approx(30.0));
  }
}

TEST_CASE("an undiscounted backup is a running average of rewards") {
  QTable table;
  double q = 0.0;
  for (int i = 0; i < 3; ++i) {
    q = td_update(table, {}, 0, 10.0, {}, true, 0.0, 0.5);
  }
  CHECK(q == doctest::Approx(8.75));  // 5, 7.5, 8.75
}

TEST_CASE("a non-terminal backup bootstraps from the best successor") {
  QTable table;
  table.assign({0}, 1, 40.0);
  table.assign({0}, 2, 60.0);

  const double updated =
      td_update(table, {}, 0, 100.0, {1, 2}, false, 0.5, 1.0);
  CHECK(updated == doctest::Approx(100.0 + 0.5 * 60.0));

  SUBCASE("successors outside the available set are ignored") {
    const double partial =
        td_update(table, {}, 0, 100.0, {1}, false, 0.5, 1.0);
    CHECK(partial == doctest::Approx(100.0 + 0.5 * 40.0));
  }
  SUBCASE("no available successors behaves like a terminal state") {
    QTable fresh;
    CHECK(td_update(fresh, {}, 0, 100.0, {}, false, 0.5, 1.0) ==
          doctest::Approx(100.0));
  }
  SUBCASE("negative successor values are still maximized over") {
    QTable fresh;
    fresh.assign({0}, 1, -40.0);
    fresh.assign({0}, 2, -60.0);
    CHECK(td_update(fresh, {}, 0, 0.0, {1, 2}, false, 1.0, 1.0) ==
          doctest::Approx(-40.0));
  }
}

TEST_CASE("the baseline sweeps the whole space exactly once") {
  const GridCase grid = parse_case(testsupport::four_bus_case());
  CascadeEnv env(grid, 2);

  AgentConfig config;
  config.horizon = 2;
  config.total_episodes = 20;
  config.seed = 4;

  const SearchResult result = run_baseline(env, config, 0.1);
  CHECK(result.episodes_completed == 6);
  CHECK_FALSE(result.parameters.has_value());
  REQUIRE(result.chains.size() == 6);
  REQUIRE(result.metrics.size() == 6);

  std::set<std::vector<int>> seen;
  for (const FaultChain& chain : result.chains) seen.insert(chain.actions);
  const std::set<std::vector<int>> expected{{0, 1}, {0, 2}, {1, 0},
                                            {1, 2}, {2, 0}, {2, 1}};
  CHECK(seen == expected);

  double cum = 0.0;
  for (const MetricsRow& row : result.metrics) {
    cum += row.tll_mw;
    CHECK(row.cum_tll_mw == doctest::Approx(cum).epsilon(1e-12));
    CHECK(std::isnan(row.regret_mw));
    CHECK(row.elapsed_ms == 0.0);
  }
}

TEST_CASE("the baseline is reproducible under a fixed seed") {
  const GridCase grid = scaled_case39();

  AgentConfig config;
  config.horizon = 3;
  config.total_episodes = 10;
  config.seed = 77;

  CascadeEnv env_a(grid, 3);
  CascadeEnv env_b(grid, 3);
  const SearchResult a = run_baseline(env_a, config, 0.1);
  const SearchResult b = run_baseline(env_b, config, 0.1);

  REQUIRE(a.chains.size() == b.chains.size());
  for (std::size_t i = 0; i < a.chains.size(); ++i) {
    CHECK(a.chains[i].actions == b.chains[i].actions);
    CHECK(a.metrics[i].tll_mw == b.metrics[i].tll_mw);
  }
}

TEST_CASE("with exploration forced on, baseline and network search coincide") {
  const GridCase grid = scaled_case39();

  AgentConfig config;
  config.horizon = 3;
  config.total_episodes = 5;
  config.explore_iters = 0;  // keep the closure trees in lockstep
  config.epsilon0 = 1.0;
  config.kappa = 0;
  config.hidden = 2;
  config.out_features = 2;
  config.taps = 2;
  config.seed = 21;

  CascadeEnv env_a(grid, 3);
  CascadeEnv env_b(grid, 3);
  const SearchResult network = run_search(env_a, config);
  const SearchResult tabular = run_baseline(env_b, config, 0.1);

  REQUIRE(network.chains.size() == tabular.chains.size());
  for (std::size_t i = 0; i < network.chains.size(); ++i) {
    CHECK(network.chains[i].actions == tabular.chains[i].actions);
    CHECK(network.metrics[i].tll_mw == tabular.metrics[i].tll_mw);
  }
}

TEST_CASE("the baseline validates its inputs") {
  const GridCase grid = parse_case(testsupport::four_bus_case());
  CascadeEnv env(grid, 2);
  AgentConfig config;
  config.horizon = 3;  // env was built with horizon 2
  CHECK_THROWS_AS((void)run_baseline(env, config, 0.1), std::invalid_argument);

  config.horizon = 2;
  CHECK_THROWS_AS((void)run_baseline(env, config, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)run_baseline(env, config, -1.0), std::invalid_argument);
}
