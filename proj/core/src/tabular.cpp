#include "gridfc/tabular.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "gridfc/rng.hpp"

namespace gridfc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

double QTable::value(const std::vector<int>& prefix, int action) const {
  std::vector<int> key = prefix;
  key.push_back(action);
  const auto it = values_.find(key);
  return it == values_.end() ? 0.0 : it->second;
}

void QTable::assign(const std::vector<int>& prefix, int action, double value) {
  std::vector<int> key = prefix;
  key.push_back(action);
  values_[std::move(key)] = value;
}

double td_update(QTable& table, const std::vector<int>& prefix, int action,
                 double reward_mw, const std::vector<int>& next_available,
                 bool terminal, double gamma, double learning_rate) {
  double best_next = 0.0;
  if (!terminal) {
    std::vector<int> next_prefix = prefix;
    next_prefix.push_back(action);
    bool any = false;
    for (int a : next_available) {
      const double q = table.value(next_prefix, a);
      if (!any || q > best_next) {
        best_next = q;
        any = true;
      }
    }
    if (!any) best_next = 0.0;
  }
  const double current = table.value(prefix, action);
  const double updated =
      current + learning_rate * (reward_mw + gamma * best_next - current);
  table.assign(prefix, action, updated);
  return updated;
}

SearchResult run_baseline(CascadeEnv& env, const AgentConfig& config,
                          double learning_rate, const SearchOptions& options) {
  config.validate();
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (env.horizon() != config.horizon) {
    throw std::invalid_argument(
        "environment horizon must match the configured horizon");
  }
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(config.seed);
  const int components = env.grid().component_count();

  env.reset();
  const PowerFlowState base_pf = env.state().pf;

  QTable table;
  AvailabilityTree tree;
  VisitCounts counts;
  double epsilon = epsilon_value(base_pf, counts, config.epsilon0);

  SearchResult result;
  double cum_tll = 0.0;
  int risky_seen = 0;

  for (int s = 1; s <= config.total_episodes; ++s) {
    if (tree.root_exhausted()) break;
    if (options.time_budget_s > 0.0 &&
        seconds_since(start) >= options.time_budget_s) {
      break;
    }

    env.reset();
    tree.start_episode();
    std::vector<int> prefix;
    FaultChain chain;

    while (!env.ended()) {
      tree.set_action_count(env.available_actions().size());
      const std::vector<int> open = tree.open_actions(env.available_actions());
      if (open.empty()) {
        throw std::logic_error("availability tree re-entered an exhausted node");
      }

      Eigen::VectorXd q = Eigen::VectorXd::Zero(components);
      for (int a : open) q[a] = table.value(prefix, a);

      const int action =
          rand_uniform01(rng) <= epsilon
              ? explore_action(env.state().pf, open, counts, prefix)
              : exploit_action(q, open, counts, prefix);
      counts.increment(prefix, action);

      const StepResult step = env.step(action);
      td_update(table, prefix, action, step.reward_mw, env.available_actions(),
                step.ended, config.gamma, learning_rate);
      epsilon = epsilon_value(base_pf, counts, config.epsilon0);

      chain.actions.push_back(action);
      chain.stages.push_back(step.failed);
      chain.stage_losses_mw.push_back(step.reward_mw);
      tree.advance(action);
      prefix.push_back(action);
    }

    tree.complete_episode();

    const double tll = chain.tll_mw();
    cum_tll += tll;
    const bool risky = tll >= options.risky_threshold_mw;
    if (risky) ++risky_seen;

    MetricsRow row;
    row.s = s;
    row.tll_mw = tll;
    row.cum_tll_mw = cum_tll;
    row.risky = risky;
    if (!std::isnan(options.oracle_top_s_sum_mw)) {
      row.regret_mw = regret_at(options.oracle_top_s_sum_mw, cum_tll);
    }
    row.precision = precision_at(risky_seen, s);
    row.elapsed_ms = options.wall_timing ? 1000.0 * seconds_since(start) : 0.0;
    result.metrics.push_back(row);
    result.chains.push_back(std::move(chain));
    result.episodes_completed = s;
  }

  return result;
}

}  // namespace gridfc
