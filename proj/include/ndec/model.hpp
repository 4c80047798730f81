#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "ndec/error.hpp"
#include "ndec/features.hpp"
#include "ndec/lif.hpp"
#include "ndec/nn.hpp"

namespace ndec {

enum class Arch : std::uint32_t { Ann = 0, Ann3d = 1, Snn3d = 2, SnnStreaming = 3, Lstm = 4 };

inline std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::Ann: return "ANN";
    case Arch::Ann3d: return "ANN_3D";
    case Arch::Snn3d: return "SNN_3D";
    case Arch::SnnStreaming: return "SNN_streaming";
    case Arch::Lstm: return "LSTM";
  }
  return "?";
}

inline Arch parse_arch(std::string_view s) {
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "ann" || lower == "ann_2d") return Arch::Ann;
  if (lower == "ann_3d" || lower == "ann3d" || lower == "ann_flat") return Arch::Ann3d;
  if (lower == "snn_3d" || lower == "snn3d" || lower == "snn_flat") return Arch::Snn3d;
  if (lower == "snn_streaming" || lower == "snn_stream" || lower == "snn") return Arch::SnnStreaming;
  if (lower == "lstm") return Arch::Lstm;
  throw Error(ErrorCode::InvalidArgument, "unknown architecture '" + std::string(s) + "'");
}

inline constexpr std::array<Arch, 5> kAllArchs{Arch::Ann, Arch::Ann3d, Arch::Snn3d,
                                               Arch::SnnStreaming, Arch::Lstm};

/// Input preprocessing each architecture is built for.
inline FeatureConfig default_features(Arch a) {
  switch (a) {
    case Arch::Ann: return FeatureConfig::summation(0.2);
    case Arch::Ann3d:
    case Arch::Snn3d: return FeatureConfig::subwindow(0.2, 7);
    case Arch::SnnStreaming: return FeatureConfig::streaming();
    case Arch::Lstm: return FeatureConfig::summation(0.032);
  }
  return FeatureConfig::summation(0.2);
}

/// N_ch - N1 - N2 - 2 for the feed-forward and spiking models; n_lstm for LSTM.
struct LayerShape {
  std::size_t n_probes = 96;
  std::size_t n1 = 32;
  std::size_t n2 = 48;
  std::size_t n_lstm = 40;
  static constexpr std::size_t n_out = 2;

  static LayerShape base(std::size_t n_probes = 96) { return {n_probes, 32, 48, 40}; }
  static LayerShape tiny(Arch a, std::size_t n_probes = 96) {
    return a == Arch::SnnStreaming ? LayerShape{n_probes, 16, 48, 40}
                                   : LayerShape{n_probes, 16, 32, 40};
  }
};

struct MlpNet {
  Linear fc1, fc2, fc3;
  BatchNorm bn1, bn2;
};

/// Sub-window spiking net: layer norm over the whole N_ch x m window, then m
/// LIF steps sharing one beta and one threshold.
struct Snn3dNet {
  LayerNorm ln;
  Linear fc1, fc2, fc3;
  Vec beta{Vec::Constant(1, 0.9)};
  Vec threshold{Vec::Constant(1, 1.0)};
  Vec scale{Vec::Constant(1, 1.0)};
};

/// Streaming spiking net: one LIF step per binary input, beta/threshold per layer.
struct SnnStreamNet {
  Linear fc1, fc2, fc3;
  Vec beta{Vec::Constant(3, 0.9)};
  Vec threshold{Vec::Constant(3, 1.0)};
  Vec scale{Vec::Constant(1, 1.0)};
};

/// Single LSTM layer (gate order i, f, g, o) with a linear read-out.
struct LstmNet {
  LayerNorm ln;
  Mat w_ih, w_hh;
  Vec b;
  Linear head;
};

using Net = std::variant<MlpNet, Snn3dNet, SnnStreamNet, LstmNet>;

/// Calls f(name, Eigen::Map<Vec>) on every learnable tensor in checkpoint order.
template <class N, class F>
void for_each_param(N& net, F&& f) {
  using M = std::conditional_t<std::is_const_v<N>, Eigen::Map<const Vec>, Eigen::Map<Vec>>;
  auto visit = [&](std::string_view name, auto& t) { f(name, M(t.data(), t.size())); };
  using Plain = std::remove_const_t<N>;
  if constexpr (std::is_same_v<Plain, MlpNet>) {
    visit("fc1.w", net.fc1.w); visit("fc1.b", net.fc1.b);
    visit("bn1.gamma", net.bn1.gamma); visit("bn1.beta", net.bn1.beta);
    visit("fc2.w", net.fc2.w); visit("fc2.b", net.fc2.b);
    visit("bn2.gamma", net.bn2.gamma); visit("bn2.beta", net.bn2.beta);
    visit("fc3.w", net.fc3.w); visit("fc3.b", net.fc3.b);
  } else if constexpr (std::is_same_v<Plain, Snn3dNet>) {
    visit("ln.gamma", net.ln.gamma); visit("ln.beta", net.ln.beta);
    visit("fc1.w", net.fc1.w); visit("fc1.b", net.fc1.b);
    visit("fc2.w", net.fc2.w); visit("fc2.b", net.fc2.b);
    visit("fc3.w", net.fc3.w); visit("fc3.b", net.fc3.b);
    visit("lif.beta", net.beta); visit("lif.threshold", net.threshold);
    visit("scale", net.scale);
  } else if constexpr (std::is_same_v<Plain, SnnStreamNet>) {
    visit("fc1.w", net.fc1.w); visit("fc1.b", net.fc1.b);
    visit("fc2.w", net.fc2.w); visit("fc2.b", net.fc2.b);
    visit("fc3.w", net.fc3.w); visit("fc3.b", net.fc3.b);
    visit("lif.beta", net.beta); visit("lif.threshold", net.threshold);
    visit("scale", net.scale);
  } else {
    visit("ln.gamma", net.ln.gamma); visit("ln.beta", net.ln.beta);
    visit("lstm.w_ih", net.w_ih); visit("lstm.w_hh", net.w_hh); visit("lstm.b", net.b);
    visit("head.w", net.head.w); visit("head.b", net.head.b);
  }
}

/// Non-learnable stored tensors (batch-norm running statistics).
template <class N, class F>
void for_each_buffer(N& net, F&& f) {
  using M = std::conditional_t<std::is_const_v<N>, Eigen::Map<const Vec>, Eigen::Map<Vec>>;
  if constexpr (std::is_same_v<std::remove_const_t<N>, MlpNet>) {
    f("bn1.running_mean", M(net.bn1.running_mean.data(), net.bn1.running_mean.size()));
    f("bn1.running_var", M(net.bn1.running_var.data(), net.bn1.running_var.size()));
    f("bn2.running_mean", M(net.bn2.running_mean.data(), net.bn2.running_mean.size()));
    f("bn2.running_var", M(net.bn2.running_var.data(), net.bn2.running_var.size()));
  }
}

/// Recurrent state carried between strides by the streaming models.
struct StreamState {
  std::array<LIFState, 3> lif;
  Vec h, c;
};

struct Model {
  Arch arch = Arch::Ann;
  LayerShape shape;
  FeatureConfig features;
  double dropout = 0.5;
  Net net;
  StreamState state;

  /// Width of one feature record this model consumes.
  std::size_t input_dim() const { return shape.n_probes * features.per_probe(); }
};

inline void reset_state(Model& model) {
  const auto& s = model.shape;
  model.state.lif = {LIFState(static_cast<Eigen::Index>(s.n1)),
                     LIFState(static_cast<Eigen::Index>(s.n2)),
                     LIFState(static_cast<Eigen::Index>(LayerShape::n_out))};
  model.state.h = Vec::Zero(static_cast<Eigen::Index>(s.n_lstm));
  model.state.c = Vec::Zero(static_cast<Eigen::Index>(s.n_lstm));
}

inline Model make_model(Arch arch, const LayerShape& shape, std::uint64_t seed,
                        FeatureConfig features) {
  validate(features);
  require(shape.n_probes > 0 && shape.n1 > 0 && shape.n2 > 0 && shape.n_lstm > 0,
          ErrorCode::InvalidArgument, "layer sizes must be positive");
  const bool wants_window = arch == Arch::Ann3d || arch == Arch::Snn3d;
  require(wants_window == (features.mode == FeatureMode::Subwindow), ErrorCode::ConfigMismatch,
          std::string(to_string(arch)) + " does not take this feature mode");
  require(arch != Arch::SnnStreaming || features.mode == FeatureMode::Streaming,
          ErrorCode::ConfigMismatch, "SNN_streaming needs streaming features");
  require(arch == Arch::SnnStreaming || features.mode != FeatureMode::Streaming,
          ErrorCode::ConfigMismatch, "streaming features are for SNN_streaming only");

  std::mt19937_64 rng(seed);
  Model m;
  m.arch = arch;
  m.shape = shape;
  m.features = features;
  const std::size_t n_ch = shape.n_probes;
  const std::size_t win = n_ch * features.per_probe();
  switch (arch) {
    case Arch::Ann:
    case Arch::Ann3d: {
      MlpNet n;
      n.fc1 = make_linear(win, shape.n1, rng);
      n.fc2 = make_linear(shape.n1, shape.n2, rng);
      n.fc3 = make_linear(shape.n2, LayerShape::n_out, rng);
      n.bn1 = BatchNorm(shape.n1);
      n.bn2 = BatchNorm(shape.n2);
      m.net = std::move(n);
      break;
    }
    case Arch::Snn3d: {
      Snn3dNet n;
      n.ln = LayerNorm(win);
      n.fc1 = make_linear(n_ch, shape.n1, rng);
      n.fc2 = make_linear(shape.n1, shape.n2, rng);
      n.fc3 = make_linear(shape.n2, LayerShape::n_out, rng);
      m.net = std::move(n);
      break;
    }
    case Arch::SnnStreaming: {
      SnnStreamNet n;
      n.fc1 = make_linear(n_ch, shape.n1, rng);
      n.fc2 = make_linear(shape.n1, shape.n2, rng);
      n.fc3 = make_linear(shape.n2, LayerShape::n_out, rng);
      m.net = std::move(n);
      break;
    }
    case Arch::Lstm: {
      LstmNet n;
      const auto h = static_cast<Eigen::Index>(shape.n_lstm);
      n.ln = LayerNorm(n_ch);
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape.n_lstm));
      std::uniform_real_distribution<double> u(-bound, bound);
      auto fill = [&](auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
      };
      n.w_ih = Mat(4 * h, static_cast<Eigen::Index>(n_ch));
      n.w_hh = Mat(4 * h, h);
      n.b = Vec(4 * h);
      fill(n.w_ih);
      fill(n.w_hh);
      fill(n.b);
      n.head = make_linear(shape.n_lstm, LayerShape::n_out, rng);
      m.net = std::move(n);
      break;
    }
  }
  reset_state(m);
  return m;
}

inline Model make_model(Arch arch, const LayerShape& shape, std::uint64_t seed) {
  return make_model(arch, shape, seed, default_features(arch));
}

inline std::size_t parameter_count(const Model& m) {
  std::size_t n = 0;
  std::visit([&](const auto& net) { for_each_param(net, [&](auto, auto t) { n += t.size(); }); },
             m.net);
  return n;
}

inline std::size_t buffer_count(const Model& m) {
  std::size_t n = 0;
  std::visit([&](const auto& net) { for_each_buffer(net, [&](auto, auto t) { n += t.size(); }); },
             m.net);
  return n;
}

/// LIF settings for layer 0..2: hidden layers reset to zero, the read-out
/// layer never resets so it integrates the prediction.
inline LIFParams lif_layer_params(const Snn3dNet& n, std::size_t layer) {
  return {n.beta(0), n.threshold(0), layer < 2 ? ResetMode::ToZero : ResetMode::None, 1.0};
}
inline LIFParams lif_layer_params(const SnnStreamNet& n, std::size_t layer) {
  const auto l = static_cast<Eigen::Index>(layer);
  return {n.beta(l), n.threshold(l), layer < 2 ? ResetMode::ToZero : ResetMode::None, 1.0};
}

// --- eval-mode forward ------------------------------------------------------

namespace detail {

inline Vec record_to_vec(std::span<const std::uint16_t> record) {
  Vec x(static_cast<Eigen::Index>(record.size()));
  for (std::size_t i = 0; i < record.size(); ++i) x(static_cast<Eigen::Index>(i)) = record[i];
  return x;
}

inline Eigen::Vector2d to_pred(const Vec& y) { return {y(0), y(1)}; }

inline Vec mlp_eval(const MlpNet& n, const Vec& x, OpCounter* oc) {
  if (oc) oc->synapse(0, x, n.fc1.out(), false);
  Vec h1 = n.bn1.forward_eval(n.fc1.forward(x)).cwiseMax(0.0);
  if (oc) {
    oc->aux(static_cast<double>(n.fc1.out()), 3.0 * static_cast<double>(n.fc1.out()));
    oc->synapse(1, h1, n.fc2.out(), false);
  }
  Vec h2 = n.bn2.forward_eval(n.fc2.forward(h1)).cwiseMax(0.0);
  if (oc) {
    oc->aux(static_cast<double>(n.fc2.out()), 3.0 * static_cast<double>(n.fc2.out()));
    oc->synapse(2, h2, n.fc3.out(), false);
    oc->aux(0, static_cast<double>(n.fc3.out()));
  }
  return n.fc3.forward(h2);
}

/// One LIF stack step for a single stream; returns the read-out potential.
template <class N>
Vec lif_stack_step(const N& n, std::array<LIFState, 3>& st, const Vec& x, bool accumulate_only,
                   OpCounter* oc) {
  const std::array<const Linear*, 3> fc{&n.fc1, &n.fc2, &n.fc3};
  Vec in = x;
  for (std::size_t l = 0; l < 3; ++l) {
    if (oc) {
      oc->synapse(l, in, fc[l]->out(), accumulate_only);
      // beta*U + I per neuron; bias, beta and threshold fetched per neuron.
      oc->aux(static_cast<double>(fc[l]->out()), static_cast<double>(fc[l]->out()) + 2.0);
    }
    in = lif_step(st[l], fc[l]->forward(in), lif_layer_params(n, l));
  }
  return st[2].u;
}

}  // namespace detail

/// Eval-mode prediction for one feature record. Stateful models advance their
/// stream state; SNN_3D starts every window from a fresh state.
inline Eigen::Vector2d model_forward(Model& model, std::span<const std::uint16_t> record,
                                     OpCounter* oc = nullptr) {
  require(record.size() == model.input_dim(), ErrorCode::ShapeMismatch,
          "feature record has " + std::to_string(record.size()) + " values, model expects " +
              std::to_string(model.input_dim()));
  const Vec x = detail::record_to_vec(record);
  Vec y;
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, MlpNet>) {
          y = detail::mlp_eval(n, x, oc);
        } else if constexpr (std::is_same_v<N, Snn3dNet>) {
          const auto n_ch = static_cast<Eigen::Index>(model.shape.n_probes);
          const auto steps = static_cast<Eigen::Index>(model.features.m);
          const Vec xn = n.ln.forward(x);
          if (oc) oc->aux(2.0 * static_cast<double>(x.size()), 2.0 * static_cast<double>(x.size()));
          std::array<LIFState, 3> st{LIFState(static_cast<Eigen::Index>(n.fc1.out())),
                                     LIFState(static_cast<Eigen::Index>(n.fc2.out())),
                                     LIFState(static_cast<Eigen::Index>(n.fc3.out()))};
          Vec u;
          for (Eigen::Index j = 0; j < steps; ++j) {
            const Vec xj = xn(Eigen::seqN(j, n_ch, steps));
            u = detail::lif_stack_step(n, st, xj, false, oc);
          }
          if (oc) oc->aux(2.0, 1.0);
          y = n.scale(0) * u;
        } else if constexpr (std::is_same_v<N, SnnStreamNet>) {
          const Vec u = detail::lif_stack_step(n, model.state.lif, x, true, oc);
          if (oc) oc->aux(2.0, 1.0);
          y = n.scale(0) * u;
        } else {
          const auto h = static_cast<Eigen::Index>(model.shape.n_lstm);
          const Vec xn = n.ln.forward(x);
          if (oc) {
            oc->aux(2.0 * static_cast<double>(x.size()), 2.0 * static_cast<double>(x.size()));
            oc->synapse(0, xn, static_cast<std::size_t>(4 * h), false);
            oc->synapse(1, model.state.h, static_cast<std::size_t>(4 * h), false);
            oc->aux(3.0 * static_cast<double>(h), 4.0 * static_cast<double>(h));
          }
          const Vec g = n.w_ih * xn + n.w_hh * model.state.h + n.b;
          auto& c = model.state.c;
          auto& hs = model.state.h;
          for (Eigen::Index i = 0; i < h; ++i) {
            const double ig = sigmoid(g(i)), fg = sigmoid(g(h + i));
            const double gg = std::tanh(g(2 * h + i)), og = sigmoid(g(3 * h + i));
            c(i) = fg * c(i) + ig * gg;
            hs(i) = og * std::tanh(c(i));
          }
          if (oc) {
            oc->synapse(2, hs, n.head.out(), false);
            oc->aux(0, static_cast<double>(n.head.out()));
          }
          y = n.head.forward(hs);
        }
      },
      model.net);
  if (oc) ++oc->inferences;
  require(y.allFinite(), ErrorCode::NumericalFault, "non-finite model output");
  return detail::to_pred(y);
}

}  // namespace ndec
