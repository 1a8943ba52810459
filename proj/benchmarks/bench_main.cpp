// Micro-benchmarks for the hot paths: case parsing, the DC solve, a full
// cascade episode, the recurrent network's forward and backward passes, and
// one optimizer step over a sampled batch.

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "gridfc/agent.hpp"
#include "gridfc/case.hpp"
#include "gridfc/env.hpp"
#include "gridfc/grnn.hpp"
#include "gridfc/powerflow.hpp"

namespace {

using namespace gridfc;

std::string case39_text() {
  std::ifstream in(std::string(GRIDFC_DATA_DIR) + "/case39.case");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

const GridCase& study_case() {
  static const GridCase grid = apply_load_scale(
      with_rating_fallback(parse_case(case39_text()), 1.3), 0.55);
  return grid;
}

GrnnConfig network_config(const GridCase& grid) {
  GrnnConfig config;
  config.buses = grid.bus_count();
  config.in_features = 1;
  config.hidden = 12;
  config.out_features = 12;
  config.taps = 3;
  config.actions = grid.component_count();
  return config;
}

void bm_parse_case(benchmark::State& state) {
  const std::string text = case39_text();
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_case(text));
  }
}
BENCHMARK(bm_parse_case);

void bm_dc_solve(benchmark::State& state) {
  const GridCase& grid = study_case();
  const std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(grid.component_count()), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(grid, mask));
  }
}
BENCHMARK(bm_dc_solve);

void bm_cascade_episode(benchmark::State& state) {
  CascadeEnv env(study_case(), 3);
  for (auto _ : state) {
    env.reset();
    int stage = 0;
    while (!env.ended() && stage < 3) {
      benchmark::DoNotOptimize(env.step(env.available_actions().front()));
      ++stage;
    }
  }
}
BENCHMARK(bm_cascade_episode);

void bm_grnn_forward(benchmark::State& state) {
  const GridCase& grid = study_case();
  std::mt19937_64 rng(1);
  const GrnnParameters params =
      GrnnParameters::random_init(network_config(grid), rng);
  CascadeEnv env(grid, 3);
  const Observation obs = env.reset();
  const Eigen::MatrixXd x = obs.features;
  const Eigen::MatrixXd z0 =
      Eigen::MatrixXd::Zero(params.config.buses, params.config.hidden);
  for (auto _ : state) {
    const StageOutput out =
        grnn_step(obs.adjacency, obs.adjacency, x, z0, params);
    benchmark::DoNotOptimize(q_head(out.y, params));
  }
}
BENCHMARK(bm_grnn_forward);

void bm_grnn_backward(benchmark::State& state) {
  const GridCase& grid = study_case();
  std::mt19937_64 rng(1);
  const GrnnParameters params =
      GrnnParameters::random_init(network_config(grid), rng);
  CascadeEnv env(grid, 3);

  // Tape one three-stage unroll along a fixed episode.
  std::vector<StageTape> tape;
  std::vector<Eigen::VectorXd> dq;
  Observation obs = env.reset();
  Eigen::MatrixXd z =
      Eigen::MatrixXd::Zero(params.config.buses, params.config.hidden);
  AdjacencyMatrix adj_prev = obs.adjacency;
  for (int stage = 0; stage < 3; ++stage) {
    StageTape stage_tape;
    const StageOutput out = grnn_step(obs.adjacency, adj_prev, obs.features, z,
                                      params, &stage_tape);
    tape.push_back(std::move(stage_tape));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.config.actions);
    grad[stage] = 1.0;
    dq.push_back(std::move(grad));
    adj_prev = obs.adjacency;
    z = out.z;
    obs = env.step(env.available_actions().front()).observation;
  }

  GrnnParameters grads = GrnnParameters::zeros(params.config);
  for (auto _ : state) {
    grads.set_zero();
    grnn_backward(tape, dq, params, grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(bm_grnn_backward);

void bm_train_step(benchmark::State& state) {
  const GridCase& grid = study_case();
  AgentConfig config;
  config.horizon = 3;
  config.batch_size = 8;
  CascadeEnv env(grid, config.horizon);

  SequentialBuffer buffer;
  AvailabilityTree tree;
  offline_fill(env, buffer, tree, 16);

  std::mt19937_64 rng(1);
  GrnnParameters behavior = GrnnParameters::random_init(
      network_config(grid), rng);
  GrnnParameters target = behavior;
  AdamOptimizer adam(config.learning_rate);
  const std::vector<std::uint8_t> all_in(
      static_cast<std::size_t>(grid.component_count()), 1);
  for (auto _ : state) {
    train_step(buffer, behavior, target, config, all_in, adam, rng);
  }
}
BENCHMARK(bm_train_step);

}  // namespace

BENCHMARK_MAIN();
