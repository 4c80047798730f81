#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "ndec/error.hpp"
#include "ndec/nn.hpp"

namespace ndec {

enum class ResetMode { None, ToZero, BySubtraction };

struct LIFParams {
  double beta = 0.9;
  double threshold = 1.0;
  ResetMode reset = ResetMode::ToZero;
  double u_sub = 1.0;  // BySubtraction only
};

/// Membrane potentials and the spikes emitted at the previous step.
struct LIFState {
  Vec u;
  Vec spikes;

  LIFState() = default;
  explicit LIFState(Eigen::Index n) : u(Vec::Zero(n)), spikes(Vec::Zero(n)) {}
  void reset() {
    u.setZero();
    spikes.setZero();
  }
};

/// One discrete LIF update:
///   U[t] = beta*U[t-1] + WX[t] - S[t-1]*theta,   S[t] = (U[t] > threshold)
/// with theta selected by the reset mode. Returns the new spikes.
inline const Vec& lif_step(LIFState& st, const Vec& weighted_input, const LIFParams& p) {
  require(weighted_input.size() == st.u.size(), ErrorCode::ShapeMismatch,
          "LIF input size does not match layer");
  require(weighted_input.allFinite(), ErrorCode::NumericalFault, "non-finite LIF input");
  const Eigen::ArrayXd carried = p.beta * st.u.array() + weighted_input.array();
  Eigen::ArrayXd theta;
  switch (p.reset) {
    case ResetMode::None: theta = Eigen::ArrayXd::Zero(carried.size()); break;
    case ResetMode::ToZero: theta = carried; break;
    case ResetMode::BySubtraction: theta = Eigen::ArrayXd::Constant(carried.size(), p.u_sub); break;
  }
  st.u = (carried - st.spikes.array() * theta).matrix();
  st.spikes = (st.u.array() > p.threshold).cast<double>().matrix();
  return st.spikes;
}

/// Derivative of 1/2 + atan(pi*x)/pi, used in place of the Heaviside
/// derivative when backpropagating through a spike.
inline double arctan_surrogate(double x) {
  const double px = std::numbers::pi * x;
  return 1.0 / (1.0 + px * px);
}

}  // namespace ndec
