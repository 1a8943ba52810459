#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridfc/case.hpp"
#include "gridfc/powerflow.hpp"

namespace gridfc {

/// Raised by CascadeEnv::step on an out-of-range, already-removed, or
/// post-termination action.
class InvalidActionError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// What the searching agent sees after a stage: live-bus connectivity plus one
/// feature per bus (the slack-referenced voltage angle; dead-island buses
/// report 0).
struct Observation {
  AdjacencyMatrix adjacency;
  Eigen::VectorXd features;

  bool operator==(const Observation& other) const {
    return adjacency == other.adjacency &&
           features.size() == other.features.size() &&
           (features.array() == other.features.array()).all();
  }
};

/// One completed removal sequence: the chosen action per stage, the full set
/// of components lost in that stage (action plus overload trips), and the
/// stage's load loss.
struct FaultChain {
  std::vector<int> actions;
  std::vector<std::vector<int>> stages;
  std::vector<double> stage_losses_mw;

  [[nodiscard]] double tll_mw() const;
};

/// Discounted return of a chain's stage losses; the first stage is undiscounted.
[[nodiscard]] double discounted_return(const FaultChain& chain, double gamma);

struct EnvState {
  std::vector<std::uint8_t> in_service;  ///< per component
  PowerFlowState pf;
  int stage_index = 0;
  std::vector<int> removed_so_far;  ///< removal order: action first, trips after
};

struct StepResult {
  Observation observation;
  double reward_mw = 0.0;  ///< load served before the stage minus after; never negative
  bool ended = false;
  std::vector<int> failed;  ///< every component lost this stage
};

/// Deterministic cascading-outage simulator. A step removes the chosen
/// component, then repeatedly trips every branch loaded beyond its rating
/// (with a 1e-9 MW guard band) and re-solves until no overloads remain.
/// Episodes end after `horizon` stages or when nothing is left to remove.
class CascadeEnv {
public:
  CascadeEnv(const GridCase& grid, int horizon);

  Observation reset();
  StepResult step(int action);
  /// Rewind to a previously captured state() snapshot (used by depth-first
  /// enumeration to branch without replaying prefixes).
  void restore(const EnvState& snapshot);

  [[nodiscard]] const EnvState& state() const noexcept { return state_; }
  [[nodiscard]] const GridCase& grid() const noexcept { return *grid_; }
  [[nodiscard]] int horizon() const noexcept { return horizon_; }
  [[nodiscard]] bool ended() const noexcept { return ended_; }
  /// Component ids still in service, ascending.
  [[nodiscard]] std::vector<int> available_actions() const;

  [[nodiscard]] Observation observation() const;

private:
  const GridCase* grid_;
  int horizon_;
  EnvState state_;
  bool ended_ = true;  ///< true until the first reset
};

}  // namespace gridfc
