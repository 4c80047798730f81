#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "ndec/error.hpp"

namespace ndec {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct Linear {
  Mat w;  // out x in
  Vec b;  // out

  std::size_t in() const { return static_cast<std::size_t>(w.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(w.rows()); }

  /// Columns of x are samples.
  Mat forward(const Mat& x) const { return (w * x).colwise() + b; }
};

/// Uniform in +-1/sqrt(fan_in) for both weights and biases.
inline Linear make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Linear l{Mat(out, in), Vec(out)};
  for (Eigen::Index j = 0; j < l.w.cols(); ++j)
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) l.w(i, j) = u(rng);
  for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = u(rng);
  return l;
}

struct BatchNorm {
  Vec gamma, beta;
  Vec running_mean, running_var;

  explicit BatchNorm(std::size_t n = 0)
      : gamma(Vec::Ones(n)), beta(Vec::Zero(n)), running_mean(Vec::Zero(n)),
        running_var(Vec::Ones(n)) {}

  Mat forward_eval(const Mat& x) const {
    const Vec scale = gamma.array() / (running_var.array() + kNormEps).sqrt();
    const Vec shift = beta.array() - running_mean.array() * scale.array();
    return (x.array().colwise() * scale.array()).colwise() + shift.array();
  }
};

/// Normalizes each column over its rows, then applies an elementwise affine.
struct LayerNorm {
  Vec gamma, beta;

  explicit LayerNorm(std::size_t n = 0) : gamma(Vec::Ones(n)), beta(Vec::Zero(n)) {}

  Mat forward(const Mat& x) const {
    Mat y(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double mean = x.col(c).mean();
      const double var = (x.col(c).array() - mean).square().mean();
      const double inv = 1.0 / std::sqrt(var + kNormEps);
      y.col(c) = (((x.col(c).array() - mean) * inv) * gamma.array() + beta.array()).matrix();
    }
    return y;
  }
};

// --- reverse-mode helpers -------------------------------------------------

/// Accumulates dW, db for y = Wx + b and returns dx.
inline Mat linear_backward(const Linear& l, const Mat& x, const Mat& dy, Linear& grad) {
  grad.w += dy * x.transpose();
  grad.b += dy.rowwise().sum();
  return l.w.transpose() * dy;
}

struct BatchNormTape {
  Mat xhat;
  Vec inv_std;
};

/// Training-mode batch norm (biased batch variance) with running-stat update.
inline Mat batchnorm_forward_train(BatchNorm& bn, const Mat& x, BatchNormTape& tape,
                                   bool update_running = true) {
  const auto n = static_cast<double>(x.cols());
  const Vec mean = x.rowwise().mean();
  const Mat centered = x.colwise() - mean;
  const Vec var = centered.array().square().rowwise().mean();
  tape.inv_std = (var.array() + kNormEps).rsqrt();
  tape.xhat = centered.array().colwise() * tape.inv_std.array();
  if (update_running) {
    const double unbias = n > 1 ? n / (n - 1) : 1.0;
    bn.running_mean = (1 - kBatchNormMomentum) * bn.running_mean + kBatchNormMomentum * mean;
    bn.running_var =
        (1 - kBatchNormMomentum) * bn.running_var + kBatchNormMomentum * unbias * var;
  }
  return (tape.xhat.array().colwise() * bn.gamma.array()).colwise() + bn.beta.array();
}

inline Mat batchnorm_backward(const BatchNorm& bn, const BatchNormTape& tape, const Mat& dy,
                              Vec& dgamma, Vec& dbeta) {
  const auto n = static_cast<double>(dy.cols());
  dgamma += (dy.array() * tape.xhat.array()).rowwise().sum().matrix();
  dbeta += dy.rowwise().sum();
  const Mat dxhat = dy.array().colwise() * bn.gamma.array();
  const Vec sum_dxhat = dxhat.rowwise().sum();
  const Vec sum_dxhat_xhat = (dxhat.array() * tape.xhat.array()).rowwise().sum();
  Mat dx = (n * dxhat.array() - tape.xhat.array().colwise() * sum_dxhat_xhat.array())
               .colwise() -
           sum_dxhat.array();
  return dx.array().colwise() * (tape.inv_std.array() / n);
}

struct LayerNormTape {
  Mat xhat;
  Eigen::RowVectorXd inv_std;
};

inline Mat layernorm_forward_train(const LayerNorm& ln, const Mat& x, LayerNormTape& tape) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Mat centered = x.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  tape.inv_std = (var.array() + kNormEps).rsqrt();
  tape.xhat = centered.array().rowwise() * tape.inv_std.array();
  return (tape.xhat.array().colwise() * ln.gamma.array()).colwise() + ln.beta.array();
}

inline Mat layernorm_backward(const LayerNorm& ln, const LayerNormTape& tape, const Mat& dy,
                              Vec& dgamma, Vec& dbeta) {
  const auto n = static_cast<double>(dy.rows());
  dgamma += (dy.array() * tape.xhat.array()).rowwise().sum().matrix();
  dbeta += dy.rowwise().sum();
  const Mat dxhat = dy.array().colwise() * ln.gamma.array();
  const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * tape.xhat.array()).colwise().sum();
  Mat dx = (n * dxhat.array() - tape.xhat.array().rowwise() * sum_dxhat_xhat.array())
               .rowwise() -
           sum_dxhat.array();
  return dx.array().rowwise() * (tape.inv_std.array() / n);
}

/// Inverted dropout mask: kept entries scaled by 1/(1-rate).
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  if (rate <= 0) return Mat::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  Mat m(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : 0.0;
  return m;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// --- operation counting ---------------------------------------------------

/// Activity of one synaptic layer accumulated over counted inferences.
struct LayerActivity {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  double nonzero_inputs = 0;  // summed over every use
  double inputs = 0;
  double uses = 0;            // weight-matrix passes
  bool accumulate_only = false;

  std::size_t weights() const { return fan_in * fan_out; }
  double nonzero_fraction() const { return inputs > 0 ? nonzero_inputs / inputs : 0.0; }
};

/// Instrumentation threaded through eval-mode forwards. A synapse costs one
/// MAC (or one AC for binary-input layers) when its input is nonzero;
/// normalization, neuron updates and output scaling are counted as MACs.
struct OpCounter {
  double macs = 0;
  double acs = 0;
  double aux_fetches = 0;  // non-weight parameter reads
  double zero_activations = 0;
  double activations = 0;
  std::size_t inferences = 0;
  std::vector<LayerActivity> layers;

  void synapse(std::size_t layer, const Vec& x, std::size_t fan_out, bool accumulate_only) {
    if (layers.size() <= layer) layers.resize(layer + 1);
    auto& l = layers[layer];
    l.fan_in = static_cast<std::size_t>(x.size());
    l.fan_out = fan_out;
    l.accumulate_only = accumulate_only;
    const auto nnz = static_cast<double>((x.array() != 0.0).count());
    l.nonzero_inputs += nnz;
    l.inputs += static_cast<double>(x.size());
    l.uses += 1;
    (accumulate_only ? acs : macs) += nnz * static_cast<double>(fan_out);
    zero_activations += static_cast<double>(x.size()) - nnz;
    activations += static_cast<double>(x.size());
  }

  void aux(double mac_count, double fetches) {
    macs += mac_count;
    aux_fetches += fetches;
  }
};

}  // namespace ndec
