#pragma once

#include <map>
#include <vector>

#include "gridfc/agent.hpp"
#include "gridfc/env.hpp"

namespace gridfc {

/// Action values keyed by the ordered removal prefix plus the action — the
/// same state identification the visit counts use. Absent entries read as 0.
class QTable {
public:
  [[nodiscard]] double value(const std::vector<int>& prefix, int action) const;
  void assign(const std::vector<int>& prefix, int action, double value);
  /// Number of (state, action) pairs ever written.
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

private:
  std::map<std::vector<int>, double> values_;  ///< key: prefix with action appended
};

/// One temporal-difference backup:
///   Q(s,a) += lr * (r + gamma * max_{a' in next_available} Q(s',a') - Q(s,a))
/// where s is the removal prefix, s' is the prefix extended by `action`, and
/// the maximum is 0 when the episode ended. Returns the updated value.
double td_update(QTable& table, const std::vector<int>& prefix, int action,
                 double reward_mw, const std::vector<int>& next_available,
                 bool terminal, double gamma, double learning_rate);

/// The network-free counterpart of run_search: identical exploration
/// schedule, visit counts, availability closure, and metrics, but action
/// values come from a lookup table updated once per step. No buffer-seeding
/// phase and no stored parameters (SearchResult::parameters is empty).
[[nodiscard]] SearchResult run_baseline(CascadeEnv& env,
                                        const AgentConfig& config,
                                        double learning_rate,
                                        const SearchOptions& options = {});

}  // namespace gridfc
