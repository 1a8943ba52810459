#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <doctest.h>

#include "gridfc/case.hpp"
#include "gridfc/powerflow.hpp"
#include "support.hpp"

using namespace gridfc;
using testsupport::data_path;
using testsupport::read_file;

namespace {

std::vector<std::uint8_t> full_mask(const GridCase& grid) {
  std::vector<std::uint8_t> mask;
  for (const auto& br : grid.branches) mask.push_back(br.in_service ? 1 : 0);
  return mask;
}

/// Infinity norm of B·θ − P over the full network (reference rows included;
/// they must balance too because injections sum to zero per island).
double laplacian_residual(const GridCase& grid,
                          const std::vector<std::uint8_t>& mask,
                          const PowerFlowState& pf) {
  const int n = grid.bus_count();
  Eigen::VectorXd injection = Eigen::VectorXd::Zero(n);
  for (int u = 0; u < n; ++u) injection[u] = -pf.served_load_mw[u];
  std::vector<double> load(static_cast<std::size_t>(n), 0.0);
  std::vector<double> cap(static_cast<std::size_t>(n), 0.0);
  const int islands =
      1 + *std::max_element(pf.island_id.begin(), pf.island_id.end());
  std::vector<double> island_load(static_cast<std::size_t>(islands), 0.0);
  std::vector<double> island_served(static_cast<std::size_t>(islands), 0.0);
  std::vector<double> island_cap(static_cast<std::size_t>(islands), 0.0);
  for (int u = 0; u < n; ++u) {
    island_load[static_cast<std::size_t>(pf.island_id[static_cast<std::size_t>(u)])] +=
        grid.buses[static_cast<std::size_t>(u)].load_mw;
    island_served[static_cast<std::size_t>(pf.island_id[static_cast<std::size_t>(u)])] +=
        pf.served_load_mw[u];
  }
  for (const auto& gen : grid.generators) {
    const int u = grid.bus_index(gen.bus_id);
    island_cap[static_cast<std::size_t>(pf.island_id[static_cast<std::size_t>(u)])] +=
        gen.p_max_mw;
  }
  for (const auto& gen : grid.generators) {
    const int u = grid.bus_index(gen.bus_id);
    const auto k = static_cast<std::size_t>(pf.island_id[static_cast<std::size_t>(u)]);
    if (island_cap[k] > 0.0) {
      injection[u] += gen.p_max_mw * (island_served[k] / island_cap[k]);
    }
  }
  injection /= grid.base_mva;

  Eigen::VectorXd mismatch = injection;
  for (const auto& br : grid.branches) {
    if (!mask[static_cast<std::size_t>(br.component_id)]) continue;
    const double flow_pu =
        (pf.angles_rad[br.from_index] - pf.angles_rad[br.to_index]) /
        br.reactance_pu;
    mismatch[br.from_index] -= flow_pu;
    mismatch[br.to_index] += flow_pu;
  }
  // Fully shed islands (numerical-singularity fallback) carry no flow and no
  // served load, so their rows cancel; dead islands likewise.
  return mismatch.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("two-bus closed form") {
  const GridCase grid = parse_case(testsupport::two_bus_case());
  const PowerFlowState pf = solve(grid, full_mask(grid));
  CHECK(pf.angles_rad[0] == doctest::Approx(0.0));
  CHECK(pf.angles_rad[1] == doctest::Approx(-0.5));
  CHECK(pf.branch_flows_mw[0] == doctest::Approx(100.0));
  CHECK(pf.served_load_mw[1] == doctest::Approx(100.0));
  CHECK(pf.total_served_mw == doctest::Approx(100.0));
  CHECK(pf.island_id == std::vector<int>{0, 0});

  SUBCASE("flow antisymmetry under endpoint swap") {
    GridCase swapped = grid;
    std::swap(swapped.branches[0].from_bus, swapped.branches[0].to_bus);
    std::swap(swapped.branches[0].from_index, swapped.branches[0].to_index);
    const PowerFlowState pf2 = solve(swapped, full_mask(swapped));
    CHECK(pf2.branch_flows_mw[0] == doctest::Approx(-100.0));
    CHECK(pf2.total_served_mw == doctest::Approx(100.0));
  }

  SUBCASE("all components out serves nothing") {
    const PowerFlowState dark = solve(grid, {0});
    CHECK(dark.total_served_mw == doctest::Approx(0.0));
    CHECK(dark.branch_flows_mw[0] == doctest::Approx(0.0));
    CHECK(dark.island_id == std::vector<int>{0, 1});
  }

  SUBCASE("mask size mismatch rejected") {
    CHECK_THROWS_AS((void)solve(grid, {1, 1}), std::invalid_argument);
  }
}

TEST_CASE("four-bus chain: intact and islanded") {
  const GridCase grid = parse_case(testsupport::four_bus_case());
  const PowerFlowState pf = solve(grid, full_mask(grid));
  CHECK(pf.angles_rad[0] == doctest::Approx(0.0));
  CHECK(pf.angles_rad[1] == doctest::Approx(-0.16));
  CHECK(pf.angles_rad[2] == doctest::Approx(-0.28));
  CHECK(pf.angles_rad[3] == doctest::Approx(-0.24));
  CHECK(pf.branch_flows_mw[0] == doctest::Approx(160.0));
  CHECK(pf.branch_flows_mw[1] == doctest::Approx(60.0));
  CHECK(pf.branch_flows_mw[2] == doctest::Approx(-40.0));
  CHECK(pf.total_served_mw == doctest::Approx(200.0));

  SUBCASE("cutting the middle branch sheds the short island pro-rata") {
    const PowerFlowState split = solve(grid, {1, 0, 1});
    CHECK(split.island_id == std::vector<int>{0, 0, 1, 1});
    CHECK(split.total_served_mw == doctest::Approx(150.0));
    CHECK(split.served_load_mw[1] == doctest::Approx(100.0));
    CHECK(split.served_load_mw[2] == doctest::Approx(50.0));
    CHECK(split.angles_rad[0] == doctest::Approx(0.0));
    CHECK(split.angles_rad[1] == doctest::Approx(-0.1));
    CHECK(split.angles_rad[2] == doctest::Approx(0.0));  // island reference
    CHECK(split.angles_rad[3] == doctest::Approx(0.05));
    CHECK(split.branch_flows_mw[0] == doctest::Approx(100.0));
    CHECK(split.branch_flows_mw[1] == doctest::Approx(0.0));  // out of service
    CHECK(split.branch_flows_mw[2] == doctest::Approx(-50.0));
  }

  SUBCASE("island without generation is fully shed") {
    GridCase no_tail_gen = grid;
    no_tail_gen.generators.pop_back();  // drop the bus-4 generator
    const PowerFlowState split = solve(no_tail_gen, {1, 0, 1});
    CHECK(split.served_load_mw[2] == doctest::Approx(0.0));
    CHECK(split.angles_rad[2] == doctest::Approx(0.0));
    CHECK(split.angles_rad[3] == doctest::Approx(0.0));
    CHECK(split.branch_flows_mw[2] == doctest::Approx(0.0));
    CHECK(split.total_served_mw == doctest::Approx(100.0));
  }
}

TEST_CASE("numerically singular island is treated as fully shed") {
  GridCase grid = parse_case(testsupport::two_bus_case());
  grid.branches[0].reactance_pu = 1e12;  // susceptance below the pivot floor
  const PowerFlowState pf = solve(grid, full_mask(grid));
  CHECK(pf.total_served_mw == doctest::Approx(0.0));
  CHECK(pf.angles_rad[1] == doctest::Approx(0.0));
  CHECK(pf.branch_flows_mw[0] == doctest::Approx(0.0));
}

TEST_CASE("39-bus at 0.55 scale matches the independent reference") {
  GridCase grid = parse_case(read_file(data_path("case39.case")));
  grid = apply_load_scale(grid, 0.55);
  const PowerFlowState pf = solve(grid, full_mask(grid));

  // Intact network sheds nothing.
  CHECK(pf.total_served_mw == doctest::Approx(3439.8265).epsilon(1e-12));

  // Angles (radians, bus 1 reference) and flows (MW) frozen from an
  // independent dense solve of the same case.
  CHECK(pf.angles_rad[1] == doctest::Approx(0.06284572447388234).epsilon(1e-9));
  CHECK(pf.angles_rad[15] ==
        doctest::Approx(-0.00024208628460246917).epsilon(1e-9));
  CHECK(pf.angles_rad[30] == doctest::Approx(0.07354197302338249).epsilon(1e-9));
  CHECK(pf.angles_rad[38] ==
        doctest::Approx(-0.024807326322312983).epsilon(1e-9));
  CHECK(pf.branch_flows_mw[0] ==
        doctest::Approx(-152.90930528925145).epsilon(1e-9));
  CHECK(pf.branch_flows_mw[5] ==
        doctest::Approx(109.01458970400037).epsilon(1e-9));
  CHECK(pf.branch_flows_mw[13] ==
        doctest::Approx(-296.57267530880966).epsilon(1e-9));
  CHECK(pf.branch_flows_mw[27] ==
        doctest::Approx(-140.8526761828562).epsilon(1e-9));
  CHECK(pf.branch_flows_mw[45] ==
        doctest::Approx(-403.8889537803721).epsilon(1e-9));

  // Largest intact loading sits on component 4 (the 2-30 transformer).
  int argmax = 0;
  for (int c = 1; c < grid.component_count(); ++c) {
    if (std::abs(pf.branch_flows_mw[c]) > std::abs(pf.branch_flows_mw[argmax])) {
      argmax = c;
    }
  }
  CHECK(argmax == 4);

  CHECK(laplacian_residual(grid, full_mask(grid), pf) < 1e-8);
}

TEST_CASE("randomized submasks: residual, shedding bound, monotone service") {
  GridCase grid = parse_case(read_file(data_path("case39.case")));
  grid = apply_load_scale(grid, 0.55);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, grid.component_count() - 1);
  std::uniform_int_distribution<int> removals(1, 8);

  for (int trial = 0; trial < 50; ++trial) {
    auto mask = full_mask(grid);
    for (int r = removals(rng); r > 0; --r) {
      mask[static_cast<std::size_t>(pick(rng))] = 0;
    }
    const PowerFlowState pf = solve(grid, mask);
    CHECK(laplacian_residual(grid, mask, pf) < 1e-8);
    CHECK(pf.angles_rad.allFinite());
    for (int u = 0; u < grid.bus_count(); ++u) {
      CHECK(pf.served_load_mw[u] <=
            grid.buses[static_cast<std::size_t>(u)].load_mw + 1e-9);
    }

    // Removing one more component never increases service.
    std::vector<int> live;
    for (int c = 0; c < grid.component_count(); ++c) {
      if (mask[static_cast<std::size_t>(c)]) live.push_back(c);
    }
    if (live.empty()) continue;
    auto tighter = mask;
    tighter[static_cast<std::size_t>(
        live[static_cast<std::size_t>(pick(rng)) % live.size()])] = 0;
    const PowerFlowState pf2 = solve(grid, tighter);
    CHECK(pf2.total_served_mw <= pf.total_served_mw + 1e-9);
  }
}

TEST_CASE("rating fallback fills zero ratings from intact loadings") {
  GridCase toy = parse_case(testsupport::four_bus_case());
  toy.branches[0].rating_mw = 0.0;
  toy.branches[1].rating_mw = 77.0;
  toy.branches[2].rating_mw = 0.0;
  const GridCase patched = with_rating_fallback(toy, 1.3);
  CHECK(patched.branches[0].rating_mw == doctest::Approx(1.3 * 160.0));
  CHECK(patched.branches[1].rating_mw == doctest::Approx(77.0));
  CHECK(patched.branches[2].rating_mw == doctest::Approx(1.3 * 40.0));

  CHECK_THROWS_AS((void)with_rating_fallback(toy, 0.0), std::invalid_argument);

  SUBCASE("118-bus ratings derive from the unscaled base case") {
    GridCase big = parse_case(read_file(data_path("case118.case")));
    const PowerFlowState base = solve(big, full_mask(big));
    const GridCase patched118 = with_rating_fallback(big, 1.3);
    for (const auto& br : patched118.branches) {
      CHECK(br.rating_mw ==
            doctest::Approx(1.3 * std::abs(base.branch_flows_mw[br.component_id])));
    }
  }
}
