#include "gridfc/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridfc {

namespace {

constexpr double kSingularPivot = 1e-10;

/// Connected components over buses induced by live branches, labeled in
/// ascending order of each island's lowest bus position.
std::vector<int> label_islands(const GridCase& grid,
                               const std::vector<std::uint8_t>& in_service) {
  const int n = grid.bus_count();
  std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
  for (const auto& br : grid.branches) {
    if (!in_service[static_cast<std::size_t>(br.component_id)]) continue;
    neighbors[static_cast<std::size_t>(br.from_index)].push_back(br.to_index);
    neighbors[static_cast<std::size_t>(br.to_index)].push_back(br.from_index);
  }
  std::vector<int> island(static_cast<std::size_t>(n), -1);
  int next = 0;
  std::vector<int> stack;
  for (int root = 0; root < n; ++root) {
    if (island[static_cast<std::size_t>(root)] != -1) continue;
    const int label = next++;
    stack.push_back(root);
    island[static_cast<std::size_t>(root)] = label;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : neighbors[static_cast<std::size_t>(u)]) {
        if (island[static_cast<std::size_t>(v)] == -1) {
          island[static_cast<std::size_t>(v)] = label;
          stack.push_back(v);
        }
      }
    }
  }
  return island;
}

}  // namespace

PowerFlowState solve(const GridCase& grid, const std::vector<std::uint8_t>& in_service) {
  if (static_cast<int>(in_service.size()) != grid.component_count()) {
    throw std::invalid_argument("in_service mask size must equal component count");
  }
  const int n = grid.bus_count();
  PowerFlowState state;
  state.angles_rad = Eigen::VectorXd::Zero(n);
  state.branch_flows_mw = Eigen::VectorXd::Zero(grid.component_count());
  state.served_load_mw = Eigen::VectorXd::Zero(n);
  state.island_id = label_islands(grid, in_service);

  const int island_count =
      n == 0 ? 0 : 1 + *std::max_element(state.island_id.begin(), state.island_id.end());

  // Per-island aggregates for the redispatch.
  std::vector<double> load(static_cast<std::size_t>(island_count), 0.0);
  std::vector<double> capacity(static_cast<std::size_t>(island_count), 0.0);
  for (int u = 0; u < n; ++u) {
    load[static_cast<std::size_t>(state.island_id[static_cast<std::size_t>(u)])] +=
        grid.buses[static_cast<std::size_t>(u)].load_mw;
  }
  for (const auto& gen : grid.generators) {
    const int u = grid.bus_index(gen.bus_id);
    capacity[static_cast<std::size_t>(state.island_id[static_cast<std::size_t>(u)])] +=
        gen.p_max_mw;
  }

  std::vector<double> served_factor(static_cast<std::size_t>(island_count), 0.0);
  std::vector<double> dispatch_ratio(static_cast<std::size_t>(island_count), 0.0);
  for (int k = 0; k < island_count; ++k) {
    const auto ki = static_cast<std::size_t>(k);
    if (capacity[ki] <= 0.0) continue;  // dead island: everything shed
    const double served = std::min(load[ki], capacity[ki]);
    served_factor[ki] = load[ki] != 0.0 ? served / load[ki] : 0.0;
    dispatch_ratio[ki] = served / capacity[ki];
  }

  // Bus injections in per-unit, after shedding and proportional dispatch.
  Eigen::VectorXd injection = Eigen::VectorXd::Zero(n);
  for (int u = 0; u < n; ++u) {
    const auto ui = static_cast<std::size_t>(u);
    const auto ki = static_cast<std::size_t>(state.island_id[ui]);
    state.served_load_mw[u] = grid.buses[ui].load_mw * served_factor[ki];
    injection[u] = -state.served_load_mw[u];
  }
  for (const auto& gen : grid.generators) {
    const int u = grid.bus_index(gen.bus_id);
    const auto ki = static_cast<std::size_t>(state.island_id[static_cast<std::size_t>(u)]);
    injection[u] += gen.p_max_mw * dispatch_ratio[ki];
  }
  injection /= grid.base_mva;

  // Group buses by island, in ascending position order.
  std::vector<std::vector<int>> members(static_cast<std::size_t>(island_count));
  for (int u = 0; u < n; ++u) {
    members[static_cast<std::size_t>(state.island_id[static_cast<std::size_t>(u)])]
        .push_back(u);
  }

  for (int k = 0; k < island_count; ++k) {
    const auto& buses = members[static_cast<std::size_t>(k)];
    const int m = static_cast<int>(buses.size());
    if (m <= 1) continue;  // single bus: angle stays 0
    bool any_injection = false;
    for (int u : buses) {
      if (injection[u] != 0.0) {
        any_injection = true;
        break;
      }
    }
    if (!any_injection) continue;  // zero RHS solves to zero angles

    // Reduced susceptance matrix with the island's lowest bus as reference.
    std::vector<int> pos(static_cast<std::size_t>(grid.bus_count()), -1);
    for (int i = 1; i < m; ++i) pos[static_cast<std::size_t>(buses[static_cast<std::size_t>(i)])] = i - 1;
    Eigen::MatrixXd b_red = Eigen::MatrixXd::Zero(m - 1, m - 1);
    for (const auto& br : grid.branches) {
      if (!in_service[static_cast<std::size_t>(br.component_id)]) continue;
      if (state.island_id[static_cast<std::size_t>(br.from_index)] != k) continue;
      const double b = 1.0 / br.reactance_pu;
      const int pf = pos[static_cast<std::size_t>(br.from_index)];
      const int pt = pos[static_cast<std::size_t>(br.to_index)];
      if (pf >= 0) b_red(pf, pf) += b;
      if (pt >= 0) b_red(pt, pt) += b;
      if (pf >= 0 && pt >= 0) {
        b_red(pf, pt) -= b;
        b_red(pt, pf) -= b;
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b_red);
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (min_pivot < kSingularPivot) {
      // Numerically singular island: treat as fully shed.
      for (int u : buses) {
        state.served_load_mw[u] = 0.0;
        state.angles_rad[u] = 0.0;
      }
      continue;
    }

    Eigen::VectorXd rhs(m - 1);
    for (int i = 1; i < m; ++i) rhs[i - 1] = injection[buses[static_cast<std::size_t>(i)]];
    const Eigen::VectorXd theta = lu.solve(rhs);
    for (int i = 1; i < m; ++i) {
      state.angles_rad[buses[static_cast<std::size_t>(i)]] = theta[i - 1];
    }
  }

  for (const auto& br : grid.branches) {
    if (!in_service[static_cast<std::size_t>(br.component_id)]) continue;
    state.branch_flows_mw[br.component_id] =
        (state.angles_rad[br.from_index] - state.angles_rad[br.to_index]) /
        br.reactance_pu * grid.base_mva;
  }

  state.total_served_mw = state.served_load_mw.sum();
  return state;
}

GridCase with_rating_fallback(const GridCase& grid, double overload_factor) {
  if (!(overload_factor > 0.0)) {
    throw std::invalid_argument("overload factor must be > 0");
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.component_count()));
  for (const auto& br : grid.branches) {
    mask[static_cast<std::size_t>(br.component_id)] = br.in_service ? 1 : 0;
  }
  const PowerFlowState base = solve(grid, mask);
  GridCase out = grid;
  for (auto& br : out.branches) {
    if (br.rating_mw == 0.0) {
      br.rating_mw = overload_factor * std::abs(base.branch_flows_mw[br.component_id]);
    }
  }
  return out;
}

}  // namespace gridfc
