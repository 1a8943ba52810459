#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gridfc/case.hpp"

namespace gridfc {

/// Result of one DC solve over a component mask. Angles are slack-referenced
/// per island (reference = the island's lowest-id bus, pinned to 0); buses in
/// dead islands (no usable generation) carry angle 0 and zero service.
struct PowerFlowState {
  Eigen::VectorXd angles_rad;       ///< per bus
  Eigen::VectorXd branch_flows_mw;  ///< per component; 0 when out of service
  Eigen::VectorXd served_load_mw;   ///< per bus, after any pro-rata shedding
  std::vector<int> island_id;       ///< per bus, labeled by ascending lowest bus position
  double total_served_mw = 0.0;
};

/// Total served load of a solved state, in MW.
[[nodiscard]] inline double load_mw(const PowerFlowState& state) noexcept {
  return state.total_served_mw;
}

/// Solves DC power flow over the given component mask.
///
/// Each island is redispatched independently: generators scale proportionally
/// to capacity to cover island load; when capacity falls short the remainder
/// is shed pro-rata across the island's loads; islands without generation
/// capacity are fully shed. Per island the reduced susceptance system is
/// factorized densely; a pivot magnitude below 1e-10 marks the island
/// numerically singular and it is treated as fully shed. Branch flow is
/// (theta_from - theta_to) / x * base_mva.
[[nodiscard]] PowerFlowState solve(const GridCase& grid,
                                   const std::vector<std::uint8_t>& in_service);

/// Returns a copy of the case where every branch with an absent rating
/// (rating_mw == 0) gets overload_factor * |intact base-case flow| instead.
/// Intended to run on the unscaled case, before apply_load_scale, so limits
/// do not shrink with the study loading.
[[nodiscard]] GridCase with_rating_fallback(const GridCase& grid,
                                            double overload_factor);

}  // namespace gridfc
