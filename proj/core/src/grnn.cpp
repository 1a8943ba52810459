#include "gridfc/grnn.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "gridfc/rng.hpp"

namespace gridfc {

namespace {

/// Below this many touched actions the head backward uses per-column updates
/// instead of the dense outer product / full matrix-vector product.
constexpr int kSparseHeadLimit = 4;

void fill_uniform(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rand_range(rng, -bound, bound);
    }
  }
}

/// Σ_k A^k·(m·weights[k]ᵀ) via Horner's scheme — the adjoint of graph_filter
/// with respect to its signal argument (the shift operator is symmetric).
Eigen::MatrixXd filter_adjoint(const AdjacencyMatrix& adj,
                               const Eigen::MatrixXd& m,
                               const std::vector<Eigen::MatrixXd>& weights) {
  const auto taps = static_cast<int>(weights.size());
  Eigen::MatrixXd result = m * weights[static_cast<std::size_t>(taps - 1)].transpose();
  for (int k = taps - 2; k >= 0; --k) {
    result = m * weights[static_cast<std::size_t>(k)].transpose() +
             graph_shift(adj, result);
  }
  return result;
}

}  // namespace

void GrnnConfig::validate() const {
  if (buses <= 0 || in_features <= 0 || hidden <= 0 || out_features <= 0 ||
      taps <= 0 || actions <= 0) {
    throw std::invalid_argument("every network dimension must be positive");
  }
}

GrnnParameters GrnnParameters::zeros(const GrnnConfig& config) {
  config.validate();
  GrnnParameters p;
  p.config = config;
  p.h1.reserve(static_cast<std::size_t>(config.taps));
  p.h2.reserve(static_cast<std::size_t>(config.taps));
  p.h3.reserve(static_cast<std::size_t>(config.taps));
  for (int k = 0; k < config.taps; ++k) {
    p.h1.emplace_back(Eigen::MatrixXd::Zero(config.in_features, config.hidden));
    p.h2.emplace_back(Eigen::MatrixXd::Zero(config.hidden, config.hidden));
    p.h3.emplace_back(Eigen::MatrixXd::Zero(config.hidden, config.out_features));
  }
  p.head_w = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(config.buses) * config.out_features,
      config.actions);
  p.head_b = Eigen::VectorXd::Zero(config.actions);
  return p;
}

GrnnParameters GrnnParameters::random_init(const GrnnConfig& config,
                                           std::mt19937_64& rng) {
  GrnnParameters p = zeros(config);
  for (auto& t : p.h1) fill_uniform(t, rng);
  for (auto& t : p.h2) fill_uniform(t, rng);
  for (auto& t : p.h3) fill_uniform(t, rng);
  fill_uniform(p.head_w, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.head_w.rows()));
  for (Eigen::Index i = 0; i < p.head_b.size(); ++i) {
    p.head_b[i] = rand_range(rng, -bound, bound);
  }
  return p;
}

Eigen::Index GrnnParameters::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& t : h1) n += t.size();
  for (const auto& t : h2) n += t.size();
  for (const auto& t : h3) n += t.size();
  return n + head_w.size() + head_b.size();
}

Eigen::VectorXd GrnnParameters::pack() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  const auto put = [&](const Eigen::MatrixXd& t) {
    flat.segment(at, t.size()) =
        Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
    at += t.size();
  };
  for (const auto& t : h1) put(t);
  for (const auto& t : h2) put(t);
  for (const auto& t : h3) put(t);
  put(head_w);
  flat.segment(at, head_b.size()) = head_b;
  return flat;
}

void GrnnParameters::unpack(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("flat parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  const auto take = [&](Eigen::MatrixXd& t) {
    Eigen::Map<Eigen::VectorXd>(t.data(), t.size()) =
        flat.segment(at, t.size());
    at += t.size();
  };
  for (auto& t : h1) take(t);
  for (auto& t : h2) take(t);
  for (auto& t : h3) take(t);
  take(head_w);
  head_b = flat.segment(at, head_b.size());
}

void GrnnParameters::set_zero() {
  for (auto& t : h1) t.setZero();
  for (auto& t : h2) t.setZero();
  for (auto& t : h3) t.setZero();
  head_w.setZero();
  head_b.setZero();
}

Eigen::MatrixXd graph_shift(const AdjacencyMatrix& adj,
                            const Eigen::MatrixXd& m) {
  if (m.rows() != adj.size()) {
    throw std::invalid_argument("signal rows must match the graph's bus count");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (const auto& [u, v] : adj.edges()) {
    out.row(u) += m.row(v);
    out.row(v) += m.row(u);
  }
  return out;
}

Eigen::MatrixXd graph_filter(const AdjacencyMatrix& adj,
                             const Eigen::MatrixXd& m,
                             const std::vector<Eigen::MatrixXd>& weights) {
  if (weights.empty()) {
    throw std::invalid_argument("graph filter needs at least one tap");
  }
  Eigen::MatrixXd acc = m * weights[0];
  Eigen::MatrixXd shifted = m;
  for (std::size_t k = 1; k < weights.size(); ++k) {
    shifted = graph_shift(adj, shifted);
    acc.noalias() += shifted * weights[k];
  }
  return acc;
}

StageOutput grnn_step(const AdjacencyMatrix& adj_now,
                      const AdjacencyMatrix& adj_prev, const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& z_prev,
                      const GrnnParameters& params, StageTape* tape) {
  const GrnnConfig& cfg = params.config;
  if (adj_now.size() != cfg.buses || adj_prev.size() != cfg.buses ||
      x.rows() != cfg.buses || x.cols() != cfg.in_features ||
      z_prev.rows() != cfg.buses || z_prev.cols() != cfg.hidden) {
    throw std::invalid_argument("stage inputs do not match the network shape");
  }

  const auto taps = static_cast<std::size_t>(cfg.taps);
  std::vector<Eigen::MatrixXd> x_shifts(taps);
  std::vector<Eigen::MatrixXd> zprev_shifts(taps);
  std::vector<Eigen::MatrixXd> z_shifts(taps);

  x_shifts[0] = x;
  zprev_shifts[0] = z_prev;
  for (std::size_t k = 1; k < taps; ++k) {
    x_shifts[k] = graph_shift(adj_now, x_shifts[k - 1]);
    zprev_shifts[k] = graph_shift(adj_prev, zprev_shifts[k - 1]);
  }

  Eigen::MatrixXd state_pre = Eigen::MatrixXd::Zero(cfg.buses, cfg.hidden);
  for (std::size_t k = 0; k < taps; ++k) {
    state_pre.noalias() += x_shifts[k] * params.h1[k];
    state_pre.noalias() += zprev_shifts[k] * params.h2[k];
  }

  StageOutput out;
  out.z = state_pre.array().tanh();

  z_shifts[0] = out.z;
  for (std::size_t k = 1; k < taps; ++k) {
    z_shifts[k] = graph_shift(adj_now, z_shifts[k - 1]);
  }
  Eigen::MatrixXd readout_pre = Eigen::MatrixXd::Zero(cfg.buses, cfg.out_features);
  for (std::size_t k = 0; k < taps; ++k) {
    readout_pre.noalias() += z_shifts[k] * params.h3[k];
  }
  out.y = readout_pre.array().tanh();

  if (tape != nullptr) {
    tape->adj_now = adj_now;
    tape->adj_prev = adj_prev;
    tape->x_shifts = std::move(x_shifts);
    tape->zprev_shifts = std::move(zprev_shifts);
    tape->z_shifts = std::move(z_shifts);
    tape->z = out.z;
    tape->y = out.y;
  }
  return out;
}

Eigen::VectorXd q_head(const Eigen::MatrixXd& y, const GrnnParameters& params) {
  const Eigen::Index g = y.cols();
  if (y.rows() * g != params.head_w.rows()) {
    throw std::invalid_argument("readout shape does not match the head");
  }
  Eigen::VectorXd rect(params.head_w.rows());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index f = 0; f < g; ++f) {
      rect[i * g + f] = std::max(y(i, f), 0.0);
    }
  }
  Eigen::VectorXd q = params.head_b;
  q.noalias() += params.head_w.transpose() * rect;
  return q;
}

double q_head_at(const Eigen::MatrixXd& y, const GrnnParameters& params,
                 int action) {
  const Eigen::Index g = y.cols();
  if (y.rows() * g != params.head_w.rows()) {
    throw std::invalid_argument("readout shape does not match the head");
  }
  if (action < 0 || action >= params.head_w.cols()) {
    throw std::out_of_range("action id outside the head's range");
  }
  const auto col = params.head_w.col(action);
  double acc = params.head_b[action];
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index f = 0; f < g; ++f) {
      const double v = y(i, f);
      if (v > 0.0) acc += col[i * g + f] * v;
    }
  }
  return acc;
}

void grnn_backward(const std::vector<StageTape>& tape,
                   const std::vector<Eigen::VectorXd>& dq,
                   const GrnnParameters& params, GrnnParameters& grads) {
  if (dq.size() != tape.size()) {
    throw std::invalid_argument("one dq vector per taped stage is required");
  }
  const GrnnConfig& cfg = params.config;
  const auto taps = static_cast<std::size_t>(cfg.taps);
  const Eigen::Index g = cfg.out_features;

  Eigen::MatrixXd dz_carry = Eigen::MatrixXd::Zero(cfg.buses, cfg.hidden);
  for (auto j = static_cast<std::ptrdiff_t>(tape.size()) - 1; j >= 0; --j) {
    const StageTape& st = tape[static_cast<std::size_t>(j)];
    const Eigen::VectorXd& dqj = dq[static_cast<std::size_t>(j)];
    if (dqj.size() != cfg.actions) {
      throw std::invalid_argument("dq vector length must equal the action count");
    }

    std::vector<int> touched;
    for (Eigen::Index a = 0; a < dqj.size(); ++a) {
      if (dqj[a] != 0.0) touched.push_back(static_cast<int>(a));
    }

    Eigen::MatrixXd dz = dz_carry;
    if (!touched.empty()) {
      Eigen::VectorXd rect(params.head_w.rows());
      for (Eigen::Index i = 0; i < st.y.rows(); ++i) {
        for (Eigen::Index f = 0; f < g; ++f) {
          rect[i * g + f] = std::max(st.y(i, f), 0.0);
        }
      }
      Eigen::VectorXd dvec;
      if (static_cast<int>(touched.size()) <= kSparseHeadLimit) {
        dvec = Eigen::VectorXd::Zero(params.head_w.rows());
        for (int a : touched) {
          grads.head_w.col(a).noalias() += rect * dqj[a];
          grads.head_b[a] += dqj[a];
          dvec.noalias() += params.head_w.col(a) * dqj[a];
        }
      } else {
        grads.head_w.noalias() += rect * dqj.transpose();
        grads.head_b += dqj;
        dvec.noalias() = params.head_w * dqj;
      }

      Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(st.y.rows(), g);
      for (Eigen::Index i = 0; i < st.y.rows(); ++i) {
        for (Eigen::Index f = 0; f < g; ++f) {
          if (st.y(i, f) > 0.0) dy(i, f) = dvec[i * g + f];
        }
      }
      const Eigen::MatrixXd dreadout_pre =
          (dy.array() * (1.0 - st.y.array().square())).matrix();
      for (std::size_t k = 0; k < taps; ++k) {
        grads.h3[k].noalias() += st.z_shifts[k].transpose() * dreadout_pre;
      }
      dz += filter_adjoint(st.adj_now, dreadout_pre, params.h3);
    }

    const Eigen::MatrixXd dstate_pre =
        (dz.array() * (1.0 - st.z.array().square())).matrix();
    for (std::size_t k = 0; k < taps; ++k) {
      grads.h1[k].noalias() += st.x_shifts[k].transpose() * dstate_pre;
      grads.h2[k].noalias() += st.zprev_shifts[k].transpose() * dstate_pre;
    }
    if (j > 0) {
      dz_carry = filter_adjoint(st.adj_prev, dstate_pre, params.h2);
    }
  }
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (!(lr_ > 0.0) || !(beta1_ >= 0.0 && beta1_ < 1.0) ||
      !(beta2_ >= 0.0 && beta2_ < 1.0) || !(epsilon_ > 0.0)) {
    throw std::invalid_argument("optimizer hyperparameters out of range");
  }
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m_.size() == 0) {
    m_ = Eigen::VectorXd::Zero(grad.size());
    v_ = Eigen::VectorXd::Zero(grad.size());
  }
  if (grad.size() != m_.size() || params.size() != m_.size()) {
    throw std::invalid_argument("parameter/gradient size changed between steps");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / correction1) /
                    ((v_.array() / correction2).sqrt() + epsilon_);
}

}  // namespace gridfc
