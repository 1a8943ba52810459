#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gridfc/case.hpp"

namespace gridfc {

/// Shape of the recurrent graph network. The parameter count depends only on
/// feature widths and tap count — not on bus count — except for the readout
/// head, which maps the flattened per-bus output to one value per component.
struct GrnnConfig {
  int buses = 0;        ///< N: rows of every node-signal matrix
  int in_features = 1;  ///< F: input features per bus
  int hidden = 0;       ///< H: recurrent state features per bus
  int out_features = 0; ///< G: readout features per bus
  int taps = 0;         ///< K: graph-filter taps (powers 0..K-1 of the shift)
  int actions = 0;      ///< |U|: one value per removable component

  void validate() const;

  bool operator==(const GrnnConfig&) const = default;
};

/// Learnable tensors. Also used for gradient accumulators, which share the
/// shapes exactly.
struct GrnnParameters {
  GrnnConfig config;
  std::vector<Eigen::MatrixXd> h1;  ///< K filters, F×H: input path
  std::vector<Eigen::MatrixXd> h2;  ///< K filters, H×H: recurrent path
  std::vector<Eigen::MatrixXd> h3;  ///< K filters, H×G: output path
  Eigen::MatrixXd head_w;           ///< (N·G)×|U| readout weights
  Eigen::VectorXd head_b;           ///< |U| readout bias

  static GrnnParameters zeros(const GrnnConfig& config);
  /// Per-tensor uniform in ±1/sqrt(fan_in); tensors drawn in declaration
  /// order, entries row-major, so a seed pins the full initialization.
  static GrnnParameters random_init(const GrnnConfig& config,
                                    std::mt19937_64& rng);

  [[nodiscard]] Eigen::Index parameter_count() const;
  /// Flatten every tensor into one vector (declaration order); unpack inverts.
  [[nodiscard]] Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& flat);
  void set_zero();
};

/// One application of the adjacency shift: out = A·m, accumulated edge by
/// edge so no dense N×N matrix is ever formed.
[[nodiscard]] Eigen::MatrixXd graph_shift(const AdjacencyMatrix& adj,
                                          const Eigen::MatrixXd& m);

/// Graph filter Σ_k A^k · m · weights[k] over taps k = 0..K-1.
[[nodiscard]] Eigen::MatrixXd graph_filter(
    const AdjacencyMatrix& adj, const Eigen::MatrixXd& m,
    const std::vector<Eigen::MatrixXd>& weights);

/// Everything the backward pass needs about one stage of the unroll. The
/// shift sequences hold A^k·(signal) for k = 0..K-1 (entry 0 is the signal
/// itself), saving their recomputation during backpropagation.
struct StageTape {
  AdjacencyMatrix adj_now;
  AdjacencyMatrix adj_prev;
  std::vector<Eigen::MatrixXd> x_shifts;      ///< powers of adj_now on X
  std::vector<Eigen::MatrixXd> zprev_shifts;  ///< powers of adj_prev on Z_prev
  std::vector<Eigen::MatrixXd> z_shifts;      ///< powers of adj_now on Z
  Eigen::MatrixXd z;                          ///< N×H post-tanh state
  Eigen::MatrixXd y;                          ///< N×G post-tanh readout input
};

struct StageOutput {
  Eigen::MatrixXd z;  ///< next hidden state, N×H
  Eigen::MatrixXd y;  ///< readout features, N×G
};

/// One recurrent stage:
///   Z = tanh(Σ_k A_now^k·X·H1_k + Σ_k A_prev^k·Z_prev·H2_k)
///   Y = tanh(Σ_k A_now^k·Z·H3_k)
/// When `tape` is non-null the stage is recorded for grnn_backward.
StageOutput grnn_step(const AdjacencyMatrix& adj_now,
                      const AdjacencyMatrix& adj_prev, const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& z_prev, const GrnnParameters& params,
                      StageTape* tape = nullptr);

/// Readout q = head_w'·relu(vec(Y)) + head_b with Y flattened bus-major.
[[nodiscard]] Eigen::VectorXd q_head(const Eigen::MatrixXd& y,
                                     const GrnnParameters& params);
/// Single-action readout; avoids the full head product when only the taken
/// action's value is needed.
[[nodiscard]] double q_head_at(const Eigen::MatrixXd& y,
                               const GrnnParameters& params, int action);

/// Backpropagation through a taped unroll. `dq[j]` is ∂loss/∂q at stage j
/// (entries for untouched actions are zero). Gradients are accumulated into
/// `grads`, which must be zeros() or a running accumulator of the same shape.
/// The unroll is assumed to start from a zero hidden state.
void grnn_backward(const std::vector<StageTape>& tape,
                   const std::vector<Eigen::VectorXd>& dq,
                   const GrnnParameters& params, GrnnParameters& grads);

/// Adam with pow-based bias correction over a flat parameter vector. First
/// and second moments persist across steps.
class AdamOptimizer {
public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  [[nodiscard]] long long steps_taken() const noexcept { return t_; }
  [[nodiscard]] double learning_rate() const noexcept { return lr_; }

private:
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long long t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

}  // namespace gridfc
