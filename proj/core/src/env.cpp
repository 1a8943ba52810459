#include "gridfc/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gridfc {

namespace {
constexpr double kOverloadGuardMw = 1e-9;
}

double FaultChain::tll_mw() const {
  return std::accumulate(stage_losses_mw.begin(), stage_losses_mw.end(), 0.0);
}

double discounted_return(const FaultChain& chain, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (double loss : chain.stage_losses_mw) {
    total += weight * loss;
    weight *= gamma;
  }
  return total;
}

CascadeEnv::CascadeEnv(const GridCase& grid, int horizon)
    : grid_(&grid), horizon_(horizon) {
  if (horizon <= 0) {
    throw std::invalid_argument("episode horizon must be positive");
  }
}

Observation CascadeEnv::reset() {
  state_.in_service.assign(static_cast<std::size_t>(grid_->component_count()), 0);
  for (const auto& br : grid_->branches) {
    state_.in_service[static_cast<std::size_t>(br.component_id)] = br.in_service ? 1 : 0;
  }
  state_.stage_index = 0;
  state_.removed_so_far.clear();
  state_.pf = solve(*grid_, state_.in_service);
  ended_ = false;
  return observation();
}

void CascadeEnv::restore(const EnvState& snapshot) {
  state_ = snapshot;
  const bool anything_left = std::any_of(state_.in_service.begin(),
                                         state_.in_service.end(),
                                         [](std::uint8_t b) { return b != 0; });
  ended_ = state_.stage_index >= horizon_ || !anything_left;
}

Observation CascadeEnv::observation() const {
  return Observation{adjacency(*grid_, state_.in_service), state_.pf.angles_rad};
}

std::vector<int> CascadeEnv::available_actions() const {
  std::vector<int> result;
  result.reserve(state_.in_service.size());
  for (int c = 0; c < grid_->component_count(); ++c) {
    if (state_.in_service[static_cast<std::size_t>(c)]) result.push_back(c);
  }
  return result;
}

StepResult CascadeEnv::step(int action) {
  if (ended_) {
    throw InvalidActionError("step on an ended episode (call reset first)");
  }
  if (action < 0 || action >= grid_->component_count() ||
      !state_.in_service[static_cast<std::size_t>(action)]) {
    throw InvalidActionError("invalid or already-removed action id " +
                             std::to_string(action));
  }

  const double served_before = state_.pf.total_served_mw;
  StepResult result;
  result.failed.push_back(action);
  state_.in_service[static_cast<std::size_t>(action)] = 0;
  state_.removed_so_far.push_back(action);

  // Propagate: trip everything beyond its rating, simultaneously per pass,
  // until the network settles.
  for (;;) {
    state_.pf = solve(*grid_, state_.in_service);
    std::vector<int> tripped;
    for (int c = 0; c < grid_->component_count(); ++c) {
      if (!state_.in_service[static_cast<std::size_t>(c)]) continue;
      const auto& br = grid_->branches[static_cast<std::size_t>(c)];
      if (std::abs(state_.pf.branch_flows_mw[c]) > br.rating_mw + kOverloadGuardMw) {
        tripped.push_back(c);
      }
    }
    if (tripped.empty()) break;
    for (int c : tripped) {
      state_.in_service[static_cast<std::size_t>(c)] = 0;
      state_.removed_so_far.push_back(c);
      result.failed.push_back(c);
    }
  }

  ++state_.stage_index;
  result.reward_mw = served_before - state_.pf.total_served_mw;
  const bool anything_left = std::any_of(state_.in_service.begin(),
                                         state_.in_service.end(),
                                         [](std::uint8_t b) { return b != 0; });
  ended_ = state_.stage_index >= horizon_ || !anything_left;
  result.ended = ended_;
  result.observation = observation();
  return result;
}

}  // namespace gridfc
