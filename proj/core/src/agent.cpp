#include "gridfc/agent.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "gridfc/rng.hpp"

namespace gridfc {

namespace {

Eigen::MatrixXd as_column(const Eigen::VectorXd& v) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), v.size(), 1);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must be in (0, 1]");
  }
  if (!(epsilon0 > 0.0 && epsilon0 <= 1.0)) {
    throw std::invalid_argument("epsilon0 must be in (0, 1]");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (explore_iters < 0) {
    throw std::invalid_argument("explore_iters must be >= 0");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (total_episodes < 1) {
    throw std::invalid_argument("total_episodes must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (kappa < 0) throw std::invalid_argument("kappa must be >= 0");
  if (hidden < 1 || out_features < 1 || taps < 1) {
    throw std::invalid_argument("network dimensions must be >= 1");
  }
}

void SequentialBuffer::push(Episode episode) {
  if (episode.empty()) {
    throw std::invalid_argument("cannot store an empty episode");
  }
  episodes_.push_back(std::move(episode));
  if (capacity_ > 0 && episodes_.size() > capacity_) episodes_.pop_front();
}

const Episode& SequentialBuffer::episode(std::size_t index) const {
  if (index >= episodes_.size()) {
    throw std::out_of_range("episode index past the end of the buffer");
  }
  return episodes_[index];
}

void VisitCounts::increment(const std::vector<int>& prefix, int action) {
  std::vector<int> key = prefix;
  key.push_back(action);
  ++counts_[std::move(key)];
  ++total_;
}

int VisitCounts::count(const std::vector<int>& prefix, int action) const {
  std::vector<int> key = prefix;
  key.push_back(action);
  const auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

AvailabilityTree::AvailabilityTree()
    : root_(std::make_unique<Node>()), cursor_(root_.get()) {}

void AvailabilityTree::start_episode() { cursor_ = root_.get(); }

void AvailabilityTree::set_action_count(std::size_t count) {
  if (!cursor_->action_count_known) {
    cursor_->action_count = count;
    cursor_->action_count_known = true;
  } else if (cursor_->action_count != count) {
    throw std::logic_error("legal-action count changed for the same prefix");
  }
}

bool AvailabilityTree::is_closed(int action) const {
  return cursor_->closed.count(action) != 0;
}

std::vector<int> AvailabilityTree::open_actions(
    const std::vector<int>& available) const {
  std::vector<int> open;
  open.reserve(available.size());
  for (int a : available) {
    if (cursor_->closed.count(a) == 0) open.push_back(a);
  }
  return open;
}

void AvailabilityTree::advance(int action) {
  auto& child = cursor_->children[action];
  if (!child) {
    child = std::make_unique<Node>();
    child->parent = cursor_;
    child->action_from_parent = action;
  }
  cursor_ = child.get();
}

void AvailabilityTree::complete_episode() {
  Node* node = cursor_;
  cursor_ = root_.get();
  while (node->parent != nullptr) {
    Node* parent = node->parent;
    const int edge = node->action_from_parent;
    parent->closed.insert(edge);
    parent->children.erase(edge);  // subtree fully consumed; free it
    if (!parent->action_count_known ||
        parent->closed.size() < parent->action_count) {
      return;
    }
    node = parent;
  }
}

bool AvailabilityTree::root_exhausted() const {
  return root_->action_count_known &&
         root_->closed.size() >= root_->action_count;
}

int explore_action(const PowerFlowState& pf, const std::vector<int>& available,
                   const VisitCounts& counts, const std::vector<int>& prefix) {
  if (available.empty()) {
    throw std::invalid_argument("exploration needs a nonempty action set");
  }
  int best = available.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a : available) {  // ascending order makes ties pick the lowest id
    const double score = std::abs(pf.branch_flows_mw[a]) /
                         std::sqrt(static_cast<double>(counts.count(prefix, a)) + 1.0);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

int exploit_action(const Eigen::VectorXd& q, const std::vector<int>& available,
                   const VisitCounts& counts, const std::vector<int>& prefix) {
  if (available.empty()) {
    throw std::invalid_argument("exploitation needs a nonempty action set");
  }
  int best = available.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a : available) {
    const double score =
        q[a] / std::sqrt(static_cast<double>(counts.count(prefix, a)) + 1.0);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

double epsilon_value(const PowerFlowState& base_pf, const VisitCounts& counts,
                     double epsilon0) {
  const std::vector<int> empty_prefix;
  double discounted = 0.0;
  double mass = 0.0;
  for (Eigen::Index c = 0; c < base_pf.branch_flows_mw.size(); ++c) {
    const double flow = std::abs(base_pf.branch_flows_mw[c]);
    discounted +=
        flow / std::sqrt(static_cast<double>(
                             counts.count(empty_prefix, static_cast<int>(c))) +
                         1.0);
    mass += flow;
  }
  if (mass <= 0.0) return 1.0;
  return std::max(discounted / mass, epsilon0);
}

std::vector<double> compute_target(
    const Episode& episode, const GrnnParameters& target_params, double gamma,
    const std::vector<std::uint8_t>& initial_in_service) {
  if (episode.empty()) {
    throw std::invalid_argument("cannot form targets for an empty episode");
  }
  const GrnnConfig& cfg = target_params.config;
  std::vector<double> targets(episode.size(), 0.0);
  std::vector<std::uint8_t> in_service = initial_in_service;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(cfg.buses, cfg.hidden);

  for (std::size_t j = 0; j < episode.size(); ++j) {
    const TransitionRecord& tr = episode[j];
    for (int c : tr.failed) in_service[static_cast<std::size_t>(c)] = 0;
    targets[j] = tr.reward_mw;
    if (tr.ended) continue;  // no look-ahead term, and no later stage needs z

    // One look ahead: the target network consumes the successor observation,
    // with this stage's observation as its predecessor topology.
    const StageOutput out =
        grnn_step(tr.next_obs.adjacency, tr.obs.adjacency,
                  as_column(tr.next_obs.features), z, target_params);
    z = out.z;
    const Eigen::VectorXd q = q_head(out.y, target_params);
    double best = 0.0;
    bool any = false;
    for (int c = 0; c < cfg.actions; ++c) {
      if (!in_service[static_cast<std::size_t>(c)]) continue;
      if (!any || q[c] > best) {
        best = q[c];
        any = true;
      }
    }
    if (any) targets[j] += gamma * best;
  }
  return targets;
}

void train_step(const SequentialBuffer& buffer, GrnnParameters& behavior,
                const GrnnParameters& target_params, const AgentConfig& config,
                const std::vector<std::uint8_t>& initial_in_service,
                AdamOptimizer& optimizer, std::mt19937_64& rng) {
  if (buffer.size() < static_cast<std::size_t>(config.batch_size)) {
    throw std::logic_error("training requires at least batch_size episodes");
  }
  const GrnnConfig& cfg = behavior.config;
  GrnnParameters grads = GrnnParameters::zeros(cfg);

  for (int b = 0; b < config.batch_size; ++b) {
    const Episode& episode = buffer.episode(rand_index(rng, buffer.size()));
    const std::vector<double> targets =
        compute_target(episode, target_params, config.gamma, initial_in_service);

    std::vector<StageTape> tape(episode.size());
    std::vector<Eigen::VectorXd> dq(episode.size());
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(cfg.buses, cfg.hidden);
    for (std::size_t j = 0; j < episode.size(); ++j) {
      const TransitionRecord& tr = episode[j];
      const Observation& before = episode[j > 0 ? j - 1 : 0].obs;
      const StageOutput out =
          grnn_step(tr.obs.adjacency, before.adjacency,
                    as_column(tr.obs.features), z, behavior, &tape[j]);
      z = out.z;
      const double predicted = q_head_at(out.y, behavior, tr.action);
      dq[j] = Eigen::VectorXd::Zero(cfg.actions);
      dq[j][tr.action] = -2.0 * (targets[j] - predicted) /
                         static_cast<double>(config.batch_size);
    }
    grnn_backward(tape, dq, behavior, grads);
  }

  Eigen::VectorXd theta = behavior.pack();
  optimizer.step(theta, grads.pack());
  behavior.unpack(theta);
}

int offline_fill(CascadeEnv& env, SequentialBuffer& buffer,
                 AvailabilityTree& tree, int explore_iters) {
  if (explore_iters < 0) {
    throw std::invalid_argument("explore_iters must be >= 0");
  }
  int completed = 0;
  for (int it = 0; it < explore_iters; ++it) {
    if (tree.root_exhausted()) break;
    Observation obs = env.reset();
    tree.start_episode();
    Episode episode;
    while (!env.ended()) {
      tree.set_action_count(env.available_actions().size());
      const std::vector<int> open = tree.open_actions(env.available_actions());
      if (open.empty()) {
        throw std::logic_error("availability tree re-entered an exhausted node");
      }
      const Eigen::VectorXd& flows = env.state().pf.branch_flows_mw;
      int action = open.front();
      double best_mag = -1.0;
      for (int a : open) {
        const double mag = std::abs(flows[a]);
        if (mag > best_mag) {
          best_mag = mag;
          action = a;
        }
      }
      const StepResult step = env.step(action);
      episode.push_back(TransitionRecord{obs, action, step.reward_mw,
                                         step.observation, step.ended,
                                         step.failed});
      tree.advance(action);
      obs = step.observation;
    }
    buffer.push(std::move(episode));
    tree.complete_episode();
    ++completed;
  }
  return completed;
}

SearchResult run_search(CascadeEnv& env, const AgentConfig& config,
                        const SearchOptions& options) {
  config.validate();
  if (env.horizon() != config.horizon) {
    throw std::invalid_argument(
        "environment horizon must match the configured horizon");
  }
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(config.seed);
  const GridCase& grid = env.grid();

  GrnnConfig net;
  net.buses = grid.bus_count();
  net.in_features = 1;
  net.hidden = config.hidden;
  net.out_features = config.out_features;
  net.taps = config.taps;
  net.actions = grid.component_count();
  GrnnParameters behavior = GrnnParameters::random_init(net, rng);
  GrnnParameters target = behavior;
  AdamOptimizer optimizer(config.learning_rate);

  SequentialBuffer buffer;
  AvailabilityTree tree;
  VisitCounts counts;
  offline_fill(env, buffer, tree, config.explore_iters);

  env.reset();
  const PowerFlowState base_pf = env.state().pf;
  const std::vector<std::uint8_t> initial_in_service = env.state().in_service;

  double epsilon = epsilon_value(base_pf, counts, config.epsilon0);
  Eigen::MatrixXd z_carry = Eigen::MatrixXd::Zero(net.buses, net.hidden);

  SearchResult result;
  double cum_tll = 0.0;
  int risky_seen = 0;

  for (int s = 1; s <= config.total_episodes; ++s) {
    if (tree.root_exhausted()) break;
    if (options.time_budget_s > 0.0 &&
        seconds_since(start) >= options.time_budget_s) {
      break;
    }

    Observation obs = env.reset();
    tree.start_episode();
    AdjacencyMatrix adj_prev = obs.adjacency;
    Eigen::MatrixXd z = z_carry;
    std::vector<int> prefix;
    Episode episode;

    while (!env.ended()) {
      tree.set_action_count(env.available_actions().size());
      const std::vector<int> open = tree.open_actions(env.available_actions());
      if (open.empty()) {
        throw std::logic_error("availability tree re-entered an exhausted node");
      }

      const StageOutput out =
          grnn_step(obs.adjacency, adj_prev, as_column(obs.features), z, behavior);
      const Eigen::VectorXd q = q_head(out.y, behavior);

      const int action =
          rand_uniform01(rng) <= epsilon
              ? explore_action(env.state().pf, open, counts, prefix)
              : exploit_action(q, open, counts, prefix);
      counts.increment(prefix, action);

      const StepResult step = env.step(action);
      episode.push_back(TransitionRecord{obs, action, step.reward_mw,
                                         step.observation, step.ended,
                                         step.failed});
      tree.advance(action);

      for (int k = 0; k < config.kappa; ++k) {
        if (buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
          train_step(buffer, behavior, target, config, initial_in_service,
                     optimizer, rng);
        }
        epsilon = epsilon_value(base_pf, counts, config.epsilon0);
      }

      z = out.z;
      adj_prev = obs.adjacency;
      obs = step.observation;
      prefix.push_back(action);
    }

    FaultChain chain;
    for (const TransitionRecord& tr : episode) {
      chain.actions.push_back(tr.action);
      chain.stages.push_back(tr.failed);
      chain.stage_losses_mw.push_back(tr.reward_mw);
    }
    buffer.push(std::move(episode));
    tree.complete_episode();
    z_carry = z;
    target = behavior;

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
    row.elapsed_ms =
        options.wall_timing ? 1000.0 * seconds_since(start) : 0.0;
    result.metrics.push_back(row);
    result.chains.push_back(std::move(chain));
    result.episodes_completed = s;
  }

  result.parameters = std::move(behavior);
  return result;
}

}  // namespace gridfc
