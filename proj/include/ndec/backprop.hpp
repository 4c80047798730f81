#pragma once

#include <Eigen/Dense>
#include <array>
#include <random>
#include <variant>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/lif.hpp"
#include "ndec/model.hpp"
#include "ndec/nn.hpp"

namespace ndec {

/// Feature windows for the stateless models: columns are samples.
struct WindowBatch {
  Mat x;  // input_dim x B
  Mat y;  // 2 x B
};

/// One chronological run (a reach) for the streaming models.
struct Sequence {
  Mat x;  // input_dim x T
  Mat y;  // 2 x T
};

/// Training-mode switches for one loss evaluation.
struct TrainMode {
  double dropout = 0.0;
  double l2 = 0.0;                     // coefficient of sum ||W||^2 added to the loss
  std::mt19937_64* rng = nullptr;      // dropout masks; required when dropout > 0
  bool update_running_stats = true;    // batch-norm running mean/var
};

template <class N>
N zeros_like(const N& net) {
  N g = net;
  for_each_param(g, [](auto, auto t) { t.setZero(); });
  return g;
}

inline Net zeros_like(const Net& net) {
  return std::visit([](const auto& n) -> Net { return zeros_like(n); }, net);
}

inline double& grad_beta(Snn3dNet& g, Eigen::Index i) { return g.beta(i); }
inline double& grad_beta(SnnStreamNet& g, Eigen::Index i) { return g.beta(i); }
inline double& grad_threshold(Snn3dNet& g, Eigen::Index i) { return g.threshold(i); }
inline double& grad_threshold(SnnStreamNet& g, Eigen::Index i) { return g.threshold(i); }

namespace detail {

inline Mat masks_for(Eigen::Index rows, Eigen::Index cols, const TrainMode& mode) {
  if (mode.dropout <= 0) return Mat::Ones(rows, cols);
  require(mode.rng != nullptr, ErrorCode::InvalidArgument, "dropout needs an rng");
  return dropout_mask(rows, cols, mode.dropout, *mode.rng);
}

/// Mean over samples and both axes of the squared error; dy receives dL/dpred.
inline double mse_with_grad(const Mat& pred, const Mat& label, double n_total, Mat* dy) {
  const Mat diff = pred - label;
  if (dy) *dy = diff / n_total;
  return diff.squaredNorm() / (2.0 * n_total);
}

// --- three-layer LIF stack with per-layer beta/threshold indices ----------

struct LifStackTape {
  std::vector<std::array<Mat, 3>> in, u_prev, s_prev, carried, u, s, mask;
};

template <class N>
struct LifStackView {
  std::array<Linear*, 3> fc;
  std::array<double, 3> beta, thr;
  std::array<Eigen::Index, 3> slot;  // which beta/threshold entry each layer uses
};

inline LifStackView<Snn3dNet> lif_view(Snn3dNet& n) {
  return {{&n.fc1, &n.fc2, &n.fc3}, {n.beta(0), n.beta(0), n.beta(0)},
          {n.threshold(0), n.threshold(0), n.threshold(0)}, {0, 0, 0}};
}
inline LifStackView<SnnStreamNet> lif_view(SnnStreamNet& n) {
  return {{&n.fc1, &n.fc2, &n.fc3}, {n.beta(0), n.beta(1), n.beta(2)},
          {n.threshold(0), n.threshold(1), n.threshold(2)}, {0, 1, 2}};
}

/// Runs the stack over inputs[t] (n_in x B) and returns read-out potentials.
template <class N>
std::vector<Mat> lif_stack_forward(const LifStackView<N>& v, const std::vector<Mat>& inputs,
                                   const TrainMode& mode, LifStackTape& tape) {
  const std::size_t steps = inputs.size();
  const Eigen::Index b = inputs.front().cols();
  std::array<Mat, 3> u, s;
  for (std::size_t l = 0; l < 3; ++l) {
    u[l] = Mat::Zero(static_cast<Eigen::Index>(v.fc[l]->out()), b);
    s[l] = u[l];
  }
  tape = {};
  for (auto* f : {&tape.in, &tape.u_prev, &tape.s_prev, &tape.carried, &tape.u, &tape.s, &tape.mask})
    f->resize(steps);
  std::vector<Mat> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Mat in = inputs[t];
    for (std::size_t l = 0; l < 3; ++l) {
      tape.in[t][l] = in;
      tape.u_prev[t][l] = u[l];
      tape.s_prev[t][l] = s[l];
      const Mat carried = (v.beta[l] * u[l] + v.fc[l]->forward(in));
      if (l < 2)  // reset-to-zero: theta is the carried potential
        u[l] = (carried.array() - s[l].array() * carried.array()).matrix();
      else
        u[l] = carried;
      s[l] = (u[l].array() > v.thr[l]).template cast<double>().matrix();
      tape.carried[t][l] = carried;
      tape.u[t][l] = u[l];
      tape.s[t][l] = s[l];
      if (l < 2) {
        tape.mask[t][l] = masks_for(s[l].rows(), b, mode);
        in = s[l].cwiseProduct(tape.mask[t][l]);
      }
    }
    out[t] = u[2];
  }
  return out;
}

/// BPTT through the stack. d_out[t] is dL/dU_readout at step t (may be empty).
/// Returns dL/dinputs[t].
template <class N>
std::vector<Mat> lif_stack_backward(const LifStackView<N>& v, const LifStackTape& tape,
                                    const std::vector<Mat>& d_out, N& grad) {
  const std::size_t steps = tape.in.size();
  auto view = lif_view(grad);
  std::array<Mat, 3> carry_du, carry_ds;
  for (std::size_t l = 0; l < 3; ++l) {
    carry_du[l] = Mat::Zero(tape.u[0][l].rows(), tape.u[0][l].cols());
    carry_ds[l] = carry_du[l];
  }
  std::vector<Mat> d_in(steps);
  for (std::size_t t = steps; t-- > 0;) {
    Mat d_from_above;  // dL/d(masked output of layer l) from layer l+1
    for (std::size_t l = 3; l-- > 0;) {
      Mat ds = carry_ds[l];
      if (l < 2) ds += d_from_above.cwiseProduct(tape.mask[t][l]);
      const Eigen::ArrayXXd sg =
          (tape.u[t][l].array() - v.thr[l]).unaryExpr([](double x) { return arctan_surrogate(x); });
      Mat du = carry_du[l] + (ds.array() * sg).matrix();
      if (l == 2 && d_out[t].size() > 0) du += d_out[t];
      grad_threshold(grad, view.slot[l]) -= (ds.array() * sg).sum();
      Mat dcarried;
      if (l < 2) {
        dcarried = ((1.0 - tape.s_prev[t][l].array()) * du.array()).matrix();
        carry_ds[l] = -(tape.carried[t][l].array() * du.array()).matrix();
      } else {
        dcarried = du;
      }
      carry_du[l] = v.beta[l] * dcarried;
      grad_beta(grad, view.slot[l]) += (tape.u_prev[t][l].array() * dcarried.array()).sum();
      d_from_above = linear_backward(*v.fc[l], tape.in[t][l], dcarried, *view.fc[l]);
    }
    d_in[t] = std::move(d_from_above);
  }
  return d_in;
}

}  // namespace detail

// --- per-architecture loss and gradient ---------------------------------

/// Loss of an ANN/ANN_3D batch in training mode; accumulates into grad when
/// given.
inline double mlp_loss(MlpNet& n, const WindowBatch& batch, const TrainMode& mode,
                       MlpNet* grad) {
  const Eigen::Index b = batch.x.cols();
  BatchNormTape t1, t2;
  const Mat z1 = n.fc1.forward(batch.x);
  const Mat a1 = batchnorm_forward_train(n.bn1, z1, t1, mode.update_running_stats);
  const Mat m1 = detail::masks_for(a1.rows(), b, mode);
  const Mat h1 = a1.cwiseMax(0.0).cwiseProduct(m1);
  const Mat z2 = n.fc2.forward(h1);
  const Mat a2 = batchnorm_forward_train(n.bn2, z2, t2, mode.update_running_stats);
  const Mat m2 = detail::masks_for(a2.rows(), b, mode);
  const Mat h2 = a2.cwiseMax(0.0).cwiseProduct(m2);
  const Mat y = n.fc3.forward(h2);

  Mat dy;
  double loss = detail::mse_with_grad(y, batch.y, static_cast<double>(b), grad ? &dy : nullptr);
  if (!grad) return loss;

  Mat dh2 = linear_backward(n.fc3, h2, dy, grad->fc3);
  Mat da2 = (dh2.array() * m2.array() * (a2.array() > 0).cast<double>()).matrix();
  Mat dz2 = batchnorm_backward(n.bn2, t2, da2, grad->bn2.gamma, grad->bn2.beta);
  Mat dh1 = linear_backward(n.fc2, h1, dz2, grad->fc2);
  Mat da1 = (dh1.array() * m1.array() * (a1.array() > 0).cast<double>()).matrix();
  Mat dz1 = batchnorm_backward(n.bn1, t1, da1, grad->bn1.gamma, grad->bn1.beta);
  linear_backward(n.fc1, batch.x, dz1, grad->fc1);
  return loss;
}

/// SNN_3D: every window starts from a fresh state and runs m LIF steps; the
/// prediction is scale * U_readout after the last step.
inline double snn3d_loss(Snn3dNet& n, const WindowBatch& batch, std::size_t steps,
                         const TrainMode& mode, Snn3dNet* grad) {
  const Eigen::Index b = batch.x.cols();
  const Eigen::Index n_ch = batch.x.rows() / static_cast<Eigen::Index>(steps);
  const auto m = static_cast<Eigen::Index>(steps);
  LayerNormTape ln_tape;
  const Mat xn = layernorm_forward_train(n.ln, batch.x, ln_tape);
  std::vector<Mat> inputs(steps);
  for (Eigen::Index j = 0; j < m; ++j) inputs[static_cast<std::size_t>(j)] = xn(Eigen::seqN(j, n_ch, m), Eigen::all);
  auto view = detail::lif_view(n);
  detail::LifStackTape tape;
  const std::vector<Mat> u = detail::lif_stack_forward(view, inputs, mode, tape);
  const Mat y = n.scale(0) * u.back();

  Mat dy;
  double loss = detail::mse_with_grad(y, batch.y, static_cast<double>(b), grad ? &dy : nullptr);
  if (!grad) return loss;

  grad->scale(0) += (u.back().array() * dy.array()).sum();
  std::vector<Mat> d_out(steps);
  d_out.back() = n.scale(0) * dy;
  const std::vector<Mat> d_in = detail::lif_stack_backward(view, tape, d_out, *grad);
  Mat dxn(xn.rows(), xn.cols());
  for (Eigen::Index j = 0; j < m; ++j) dxn(Eigen::seqN(j, n_ch, m), Eigen::all) = d_in[static_cast<std::size_t>(j)];
  layernorm_backward(n.ln, ln_tape, dxn, grad->ln.gamma, grad->ln.beta);
  return loss;
}

/// SNN_streaming over one sequence from a zeroed state. n_total normalizes
/// the loss so a group of sequences averages over all of its samples.
inline double snn_stream_loss(SnnStreamNet& n, const Sequence& seq, double n_total,
                              const TrainMode& mode, SnnStreamNet* grad) {
  const auto steps = static_cast<std::size_t>(seq.x.cols());
  std::vector<Mat> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs[t] = seq.x.col(static_cast<Eigen::Index>(t));
  auto view = detail::lif_view(n);
  detail::LifStackTape tape;
  const std::vector<Mat> u = detail::lif_stack_forward(view, inputs, mode, tape);
  Mat uu(2, static_cast<Eigen::Index>(steps));
  for (std::size_t t = 0; t < steps; ++t) uu.col(static_cast<Eigen::Index>(t)) = u[t];
  const Mat y = n.scale(0) * uu;

  Mat dy;
  double loss = detail::mse_with_grad(y, seq.y, n_total, grad ? &dy : nullptr);
  if (!grad) return loss;
  grad->scale(0) += (uu.array() * dy.array()).sum();
  std::vector<Mat> d_out(steps);
  for (std::size_t t = 0; t < steps; ++t) d_out[t] = n.scale(0) * dy.col(static_cast<Eigen::Index>(t));
  detail::lif_stack_backward(view, tape, d_out, *grad);
  return loss;
}

/// LSTM over one sequence from zero (h, c).
inline double lstm_loss(LstmNet& n, const Sequence& seq, double n_total, const TrainMode& mode,
                        LstmNet* grad) {
  const Eigen::Index steps = seq.x.cols();
  const Eigen::Index h = n.w_hh.cols();
  LayerNormTape ln_tape;
  const Mat xn = layernorm_forward_train(n.ln, seq.x, ln_tape);
  const Mat gx = n.w_ih * xn;
  Mat gi(h, steps), gf(h, steps), gg(h, steps), go(h, steps), cs(h, steps), hs(h, steps);
  Vec hp = Vec::Zero(h), cp = Vec::Zero(h);
  Mat h_prev(h, steps), c_prev(h, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    h_prev.col(t) = hp;
    c_prev.col(t) = cp;
    const Vec g = gx.col(t) + n.w_hh * hp + n.b;
    for (Eigen::Index i = 0; i < h; ++i) {
      gi(i, t) = sigmoid(g(i));
      gf(i, t) = sigmoid(g(h + i));
      gg(i, t) = std::tanh(g(2 * h + i));
      go(i, t) = sigmoid(g(3 * h + i));
      cp(i) = gf(i, t) * cp(i) + gi(i, t) * gg(i, t);
      hp(i) = go(i, t) * std::tanh(cp(i));
    }
    cs.col(t) = cp;
    hs.col(t) = hp;
  }
  const Mat masks = detail::masks_for(h, steps, mode);
  const Mat hd = hs.cwiseProduct(masks);
  const Mat y = n.head.forward(hd);

  Mat dy;
  double loss = detail::mse_with_grad(y, seq.y, n_total, grad ? &dy : nullptr);
  if (!grad) return loss;

  const Mat dh_all = linear_backward(n.head, hd, dy, grad->head).cwiseProduct(masks);
  Mat dgates(4 * h, steps);
  Vec dh_next = Vec::Zero(h), dc_next = Vec::Zero(h);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Vec dh = dh_all.col(t) + dh_next;
    for (Eigen::Index i = 0; i < h; ++i) {
      const double tc = std::tanh(cs(i, t));
      const double dc = dc_next(i) + dh(i) * go(i, t) * (1 - tc * tc);
      const double d_o = dh(i) * tc;
      const double d_i = dc * gg(i, t);
      const double d_g = dc * gi(i, t);
      const double d_f = dc * c_prev(i, t);
      dc_next(i) = dc * gf(i, t);
      dgates(i, t) = d_i * gi(i, t) * (1 - gi(i, t));
      dgates(h + i, t) = d_f * gf(i, t) * (1 - gf(i, t));
      dgates(2 * h + i, t) = d_g * (1 - gg(i, t) * gg(i, t));
      dgates(3 * h + i, t) = d_o * go(i, t) * (1 - go(i, t));
    }
    dh_next = n.w_hh.transpose() * dgates.col(t);
  }
  grad->w_ih += dgates * xn.transpose();
  grad->w_hh += dgates * h_prev.transpose();
  grad->b += dgates.rowwise().sum();
  const Mat dxn = n.w_ih.transpose() * dgates;
  layernorm_backward(n.ln, ln_tape, dxn, grad->ln.gamma, grad->ln.beta);
  return loss;
}

/// l2 * sum ||W||^2 over the synaptic weight matrices (not biases, norms or
/// neuron constants).
inline double l2_penalty(const Net& net, double l2, Net* grad) {
  if (l2 == 0) return 0.0;
  double loss = 0;
  auto term = [&](const Mat& w, Mat* g) {
    loss += l2 * w.squaredNorm();
    if (g) *g += 2.0 * l2 * w;
  };
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        N* g = grad ? &std::get<N>(*grad) : nullptr;
        if constexpr (std::is_same_v<N, LstmNet>) {
          term(n.w_ih, g ? &g->w_ih : nullptr);
          term(n.w_hh, g ? &g->w_hh : nullptr);
          term(n.head.w, g ? &g->head.w : nullptr);
        } else {
          term(n.fc1.w, g ? &g->fc1.w : nullptr);
          term(n.fc2.w, g ? &g->fc2.w : nullptr);
          term(n.fc3.w, g ? &g->fc3.w : nullptr);
        }
      },
      net);
  return loss;
}

/// A training batch: shuffled windows for ANN/ANN_3D/SNN_3D, a group of
/// chronological reaches for SNN_streaming/LSTM.
using TrainBatch = std::variant<WindowBatch, std::vector<Sequence>>;

struct Gradients {
  Net grad;
  double loss = 0;
};

/// Loss (MSE + l2 * sum ||W||^2) of one batch in training mode, and its exact
/// reverse-mode gradient with the arctan surrogate at every spike.
inline double batch_loss(Model& model, const TrainBatch& batch, const TrainMode& mode,
                         Net* grad) {
  double loss = 0;
  std::visit(
      [&](auto& n) {
        using N = std::decay_t<decltype(n)>;
        N* g = grad ? &std::get<N>(*grad) : nullptr;
        if constexpr (std::is_same_v<N, MlpNet> || std::is_same_v<N, Snn3dNet>) {
          const auto* wb = std::get_if<WindowBatch>(&batch);
          require(wb != nullptr, ErrorCode::ShapeMismatch, "window model needs a window batch");
          require(static_cast<std::size_t>(wb->x.rows()) == model.input_dim() && wb->x.cols() > 0,
                  ErrorCode::ShapeMismatch, "batch does not match model input");
          if constexpr (std::is_same_v<N, MlpNet>)
            loss = mlp_loss(n, *wb, mode, g);
          else
            loss = snn3d_loss(n, *wb, model.features.m, mode, g);
        } else {
          const auto* seqs = std::get_if<std::vector<Sequence>>(&batch);
          require(seqs != nullptr && !seqs->empty(), ErrorCode::ShapeMismatch,
                  "streaming model needs a non-empty sequence batch");
          double total = 0;
          for (const auto& s : *seqs) {
            require(static_cast<std::size_t>(s.x.rows()) == model.input_dim() && s.x.cols() > 0,
                    ErrorCode::ShapeMismatch, "sequence does not match model input");
            total += static_cast<double>(s.x.cols());
          }
          for (const auto& s : *seqs) {
            if constexpr (std::is_same_v<N, SnnStreamNet>)
              loss += snn_stream_loss(n, s, total, mode, g);
            else
              loss += lstm_loss(n, s, total, mode, g);
          }
        }
      },
      model.net);
  loss += l2_penalty(model.net, mode.l2, grad);
  return loss;
}

inline Gradients backprop_gradients(Model& model, const TrainBatch& batch, const TrainMode& mode) {
  Gradients out{zeros_like(model.net), 0.0};
  out.loss = batch_loss(model, batch, mode, &out.grad);
  return out;
}

}  // namespace ndec
