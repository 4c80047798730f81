#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/model.hpp"

namespace ndec {

/// Mean over samples and both velocity components of the squared error.
inline double mse_loss(std::span<const Eigen::Vector2d> pred, std::span<const Eigen::Vector2d> label) {
  require(!pred.empty(), ErrorCode::InvalidArgument, "empty batch");
  require(pred.size() == label.size(), ErrorCode::ShapeMismatch, "prediction/label length mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - label[i]).squaredNorm();
  return sum / (2.0 * static_cast<double>(pred.size()));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-tensor moments in parameter visiting order.
struct OptimizerState {
  AdamWConfig config;
  std::vector<Vec> m, v;
  long long step = 0;
};

/// One AdamW step on flat tensors: decoupled decay w -= lr*wd*w, then the
/// bias-corrected Adam update.
inline void adamw_update(std::span<Eigen::Map<Vec>> params, std::span<const Eigen::Map<const Vec>> grads,
                         OptimizerState& opt, double lr, double weight_decay) {
  require(params.size() == grads.size(), ErrorCode::ShapeMismatch, "parameter/gradient count mismatch");
  if (opt.m.empty()) {
    for (const auto& p : params) {
      opt.m.push_back(Vec::Zero(p.size()));
      opt.v.push_back(Vec::Zero(p.size()));
    }
  }
  require(opt.m.size() == params.size(), ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  ++opt.step;
  const auto& c = opt.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i];
    const auto& g = grads[i];
    require(w.size() == g.size() && w.size() == opt.m[i].size(), ErrorCode::ShapeMismatch,
            "tensor shape mismatch in optimizer");
    if (weight_decay != 0) w *= (1.0 - lr * weight_decay);
    opt.m[i] = c.beta1 * opt.m[i] + (1.0 - c.beta1) * g;
    opt.v[i] = c.beta2 * opt.v[i] + (1.0 - c.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (opt.m[i].array() / bc1) / ((opt.v[i].array() / bc2).sqrt() + c.eps);
  }
}

/// Applies one AdamW step to every learnable tensor of the model.
inline void adamw_update(Model& model, const Net& grad, OptimizerState& opt, double lr,
                         double weight_decay) {
  std::vector<Eigen::Map<Vec>> params;
  std::vector<Eigen::Map<const Vec>> grads;
  std::visit(
      [&](auto& n) {
        using N = std::decay_t<decltype(n)>;
        for_each_param(n, [&](auto, Eigen::Map<Vec> t) { params.push_back(t); });
        for_each_param(std::get<N>(grad), [&](auto, Eigen::Map<const Vec> t) { grads.push_back(t); });
      },
      model.net);
  adamw_update(params, grads, opt, lr, weight_decay);
  // Keep the membrane decay a valid leak factor.
  std::visit(
      [](auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Snn3dNet> || std::is_same_v<N, SnnStreamNet>)
          n.beta = n.beta.cwiseMax(1e-3).cwiseMin(1.0 - 1e-3);
      },
      model.net);
}

/// Cosine annealing from lr_max to lr_min over `epochs`, stepped per epoch.
inline double lr_schedule(int epoch, int epochs, double lr_max, double lr_min = 0.0) {
  require(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / epochs));
}

}  // namespace ndec
