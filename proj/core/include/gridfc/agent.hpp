#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "gridfc/env.hpp"
#include "gridfc/grnn.hpp"
#include "gridfc/metrics.hpp"

namespace gridfc {

/// Hyperparameters of the online search. The tabular baseline reuses the
/// exploration-related fields and ignores the network ones.
struct AgentConfig {
  double gamma = 0.99;       ///< discount on future load loss
  double epsilon0 = 0.01;    ///< floor of the adaptive exploration schedule
  int batch_size = 32;       ///< episodes sampled per training step
  int explore_iters = 250;   ///< buffer-seeding episodes before the online loop
  int horizon = 3;           ///< stages per fault chain (P)
  int total_episodes = 1200; ///< chains to discover (S)
  double learning_rate = 0.005;
  int kappa = 3;             ///< training steps per action taken (0 disables)
  int hidden = 12;           ///< H: recurrent features per bus
  int out_features = 12;     ///< G: readout features per bus
  int taps = 3;              ///< K: graph-filter taps
  std::uint64_t seed = 1;

  void validate() const;
};

/// One environment step as stored in the replay buffer. `failed` keeps the
/// full per-stage outage set so later action availability can be
/// reconstructed when forming training targets.
struct TransitionRecord {
  Observation obs;
  int action = -1;
  double reward_mw = 0.0;
  Observation next_obs;
  bool ended = false;
  std::vector<int> failed;
};

using Episode = std::vector<TransitionRecord>;

/// Whole episodes in insertion order; sampling is by episode so recurrent
/// unrolls always see contiguous stage sequences.
class SequentialBuffer {
public:
  /// capacity 0 means unbounded; otherwise the oldest episode is dropped
  /// when a push would exceed it.
  explicit SequentialBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(Episode episode);
  [[nodiscard]] const Episode& episode(std::size_t index) const;
  [[nodiscard]] std::size_t size() const noexcept { return episodes_.size(); }
  [[nodiscard]] bool empty() const noexcept { return episodes_.empty(); }

private:
  std::size_t capacity_;
  std::deque<Episode> episodes_;
};

/// Visit counts keyed by the ordered removal prefix plus the candidate
/// action — the prefix pins down the deterministic simulator's state.
class VisitCounts {
public:
  void increment(const std::vector<int>& prefix, int action);
  [[nodiscard]] int count(const std::vector<int>& prefix, int action) const;
  /// Total number of increments ever applied.
  [[nodiscard]] std::size_t total() const noexcept { return total_; }

private:
  std::map<std::vector<int>, int> counts_;  ///< key: prefix with action appended
  std::size_t total_ = 0;
};

/// Prefix tree over completed chains. Completing an episode closes its final
/// action under its parent; a node whose every legal action is closed closes
/// its own incoming edge, recursively — so no action sequence can recur and
/// the search halts when the root exhausts.
class AvailabilityTree {
public:
  AvailabilityTree();

  /// Move the cursor back to the root for a fresh episode.
  void start_episode();
  /// Record the environment's legal-action count at the cursor (first visit
  /// pins it; later visits must agree).
  void set_action_count(std::size_t count);
  [[nodiscard]] bool is_closed(int action) const;
  /// Keep only the actions not yet closed at the cursor.
  [[nodiscard]] std::vector<int> open_actions(
      const std::vector<int>& available) const;
  /// Descend along `action`, creating the child on first use.
  void advance(int action);
  /// Close the path that just completed and propagate exhaustion upward.
  void complete_episode();
  [[nodiscard]] bool root_exhausted() const;

private:
  struct Node {
    Node* parent = nullptr;
    int action_from_parent = -1;
    std::size_t action_count = 0;
    bool action_count_known = false;
    std::set<int> closed;
    std::map<int, std::unique_ptr<Node>> children;
  };

  std::unique_ptr<Node> root_;
  Node* cursor_;
};

/// Power-flow-weighted exploration: the available component with the largest
/// |flow| discounted by sqrt(visits + 1); ties go to the lowest id.
[[nodiscard]] int explore_action(const PowerFlowState& pf,
                                 const std::vector<int>& available,
                                 const VisitCounts& counts,
                                 const std::vector<int>& prefix);

/// Count-normalized greedy exploitation over a per-component value vector;
/// ties go to the lowest id.
[[nodiscard]] int exploit_action(const Eigen::VectorXd& q,
                                 const std::vector<int>& available,
                                 const VisitCounts& counts,
                                 const std::vector<int>& prefix);

/// Adaptive exploration probability: the intact-case |flow| mass discounted
/// by first-stage visit counts, normalized by the undiscounted mass, floored
/// at epsilon0. All counts zero gives 1; a zero-flow base case gives 1.
[[nodiscard]] double epsilon_value(const PowerFlowState& base_pf,
                                   const VisitCounts& counts, double epsilon0);

/// Per-step TD targets for one episode: t_j = r_j + γ·(1−ended_j)·max over
/// next-step available actions of the target network's value, with the
/// target network unrolled from a zero hidden state across the episode's
/// successor observations. `initial_in_service` is the mask the episode
/// started from, used to reconstruct availability after each stage.
[[nodiscard]] std::vector<double> compute_target(
    const Episode& episode, const GrnnParameters& target_params, double gamma,
    const std::vector<std::uint8_t>& initial_in_service);

/// One Adam update on `behavior` from `batch_size` episodes sampled
/// uniformly with replacement. Throws std::logic_error when the buffer holds
/// fewer than batch_size episodes.
void train_step(const SequentialBuffer& buffer, GrnnParameters& behavior,
                const GrnnParameters& target_params, const AgentConfig& config,
                const std::vector<std::uint8_t>& initial_in_service,
                AdamOptimizer& optimizer, std::mt19937_64& rng);

/// Seed the buffer with `explore_iters` episodes of undiscounted greedy
/// maximum-|flow| rollouts. Shares the availability tree with the online
/// phase so none of these chains is ever revisited. Returns the number of
/// episodes actually run (the tree may exhaust first).
int offline_fill(CascadeEnv& env, SequentialBuffer& buffer,
                 AvailabilityTree& tree, int explore_iters);

struct SearchOptions {
  /// Oracle top-S TLL sum; NaN leaves the regret column NaN.
  double oracle_top_s_sum_mw = std::numeric_limits<double>::quiet_NaN();
  /// Risky threshold M in MW.
  double risky_threshold_mw = 0.0;
  /// Wall-clock budget; 0 disables. Checked at episode starts.
  double time_budget_s = 0.0;
  /// When false, the elapsed_ms metric column is written as 0 so reruns are
  /// byte-identical; the budget always uses the real clock either way.
  bool wall_timing = false;
};

struct SearchResult {
  std::vector<FaultChain> chains;
  MetricsSeries metrics;
  std::optional<GrnnParameters> parameters;  ///< final behavior network
  int episodes_completed = 0;
};

/// The full online loop: flow-seeded buffer, adaptive ε between power-flow
/// exploration and count-normalized Q exploitation, κ training steps per
/// action, hidden state carried across episodes, target sync and availability
/// closure at episode ends, and per-episode metric rows.
[[nodiscard]] SearchResult run_search(CascadeEnv& env, const AgentConfig& config,
                                      const SearchOptions& options = {});

}  // namespace gridfc
