#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ndec/backprop.hpp"
#include "ndec/error.hpp"
#include "ndec/features.hpp"
#include "ndec/metrics.hpp"
#include "ndec/model.hpp"
#include "ndec/optim.hpp"
#include "ndec/reaches.hpp"
#include "ndec/session.hpp"

namespace ndec {

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 0.005;
  double dropout = 0.5;        // typical range 0.3-0.5
  double weight_decay = 0.01;  // AdamW decoupled decay; typical range 0.005-0.2
  double l2_loss = 0.0;        // optional explicit l2 * sum ||W||^2 in the loss
  std::size_t batch_size = 512;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

inline void validate(const TrainConfig& c) {
  require(c.epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
  require(c.learning_rate > 0, ErrorCode::InvalidArgument, "learning rate must be > 0");
  require(c.dropout >= 0 && c.dropout < 1, ErrorCode::InvalidArgument, "dropout must be in [0,1)");
  require(c.weight_decay >= 0 && c.l2_loss >= 0, ErrorCode::InvalidArgument,
          "regularization must be >= 0");
  require(c.batch_size >= 2, ErrorCode::InvalidArgument, "batch size must be >= 2");
}

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_r2 = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  Model model;  // best validation checkpoint
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool diverged = false;
  std::string message;
};

inline bool is_stream_model(Arch a) { return a == Arch::SnnStreaming || a == Arch::Lstm; }

/// 2 x N velocity labels at the given samples.
inline Mat labels_at(const Session& s, std::span<const std::size_t> idx) {
  Mat y(2, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    y(0, static_cast<Eigen::Index>(i)) = s.vx[idx[i]];
    y(1, static_cast<Eigen::Index>(i)) = s.vy[idx[i]];
  }
  return y;
}

inline Mat features_at(const FeatureSeries& f, std::span<const std::size_t> idx) {
  Mat x(static_cast<Eigen::Index>(f.dim()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto rec = f.record(idx[i]);
    for (std::size_t d = 0; d < rec.size(); ++d)
      x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = rec[d];
  }
  return x;
}

inline std::vector<Sequence> reach_sequences(const FeatureSeries& f, const Session& s,
                                             const ReachBoundaries& reaches) {
  std::vector<Sequence> out;
  for (std::size_t r = 0; r < reaches.size(); ++r) {
    std::vector<std::size_t> idx(reaches.length(r));
    std::iota(idx.begin(), idx.end(), reaches.starts[r]);
    out.push_back({features_at(f, idx), labels_at(s, idx)});
  }
  return out;
}

/// Eval-mode predictions over the reaches in chronological order with a single
/// state reset at the start (2 x N).
inline Mat predict(Model& model, const FeatureSeries& f, const ReachBoundaries& reaches,
                   OpCounter* oc = nullptr) {
  require(f.dim() == model.input_dim(), ErrorCode::ShapeMismatch,
          "feature series does not match model input");
  reset_state(model);
  const auto idx = reaches.sample_indices();
  Mat pred(2, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    pred.col(static_cast<Eigen::Index>(i)) = model_forward(model, f.record(idx[i]), oc);
  return pred;
}

inline double evaluate_r2(Model& model, const FeatureSeries& f, const Session& s,
                          const ReachBoundaries& reaches) {
  const auto idx = reaches.sample_indices();
  return r2_score(predict(model, f, reaches), labels_at(s, idx));
}

namespace detail {

/// Consecutive reaches grouped until each group holds at least min_samples.
inline std::vector<std::vector<std::size_t>> group_reaches(const ReachBoundaries& b,
                                                           std::size_t min_samples) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> cur;
  std::size_t n = 0;
  for (std::size_t r = 0; r < b.size(); ++r) {
    cur.push_back(r);
    n += b.length(r);
    if (n >= min_samples) {
      groups.push_back(std::move(cur));
      cur.clear();
      n = 0;
    }
  }
  if (!cur.empty()) groups.push_back(std::move(cur));
  return groups;
}

}  // namespace detail

/// Trains with AdamW + per-epoch cosine annealing and keeps the checkpoint
/// with the best validation R2. Window models see shuffled batches;
/// streaming models see chronological reaches, each from a zeroed state.
inline TrainResult train(Model model, const Session& s, const FeatureSeries& f,
                         const ReachSplit& split, const TrainConfig& cfg) {
  validate(cfg);
  require(f.dim() == model.input_dim(), ErrorCode::ShapeMismatch,
          "feature series does not match model input");
  require(!split.train.empty() && !split.val.empty(), ErrorCode::InsufficientData,
          "training and validation splits must be non-empty");
  model.dropout = cfg.dropout;
  std::mt19937_64 rng(cfg.seed);
  OptimizerState opt;
  TrainMode mode{cfg.dropout, cfg.l2_loss, &rng, true};

  const bool stream = is_stream_model(model.arch);
  std::vector<std::size_t> train_idx = split.train.sample_indices();
  std::vector<Sequence> train_seqs;
  std::vector<std::vector<std::size_t>> groups;
  Mat x_all, y_all;
  if (stream) {
    train_seqs = reach_sequences(f, s, split.train);
    groups = detail::group_reaches(split.train, cfg.batch_size);
  } else {
    x_all = features_at(f, train_idx);
    y_all = labels_at(s, train_idx);
  }

  TrainResult result{model, {}, -1, false, {}};
  double best_r2 = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> order(train_idx.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg.epochs, cfg.learning_rate);
    double loss_sum = 0, weight_sum = 0;
    std::size_t batch_index = 0;
    auto step = [&](const TrainBatch& batch, double weight) {
      Gradients g = backprop_gradients(model, batch, mode);
      if (!std::isfinite(g.loss))
        throw Error(ErrorCode::NumericalFault, "non-finite loss at epoch " + std::to_string(epoch) +
                                                   ", batch " + std::to_string(batch_index));
      adamw_update(model, g.grad, opt, lr, cfg.weight_decay);
      loss_sum += g.loss * weight;
      weight_sum += weight;
      ++batch_index;
    };
    try {
      if (stream) {
        for (const auto& group : groups) {
          std::vector<Sequence> batch;
          double n = 0;
          for (auto r : group) {
            batch.push_back(train_seqs[r]);
            n += static_cast<double>(train_seqs[r].x.cols());
          }
          step(TrainBatch{std::move(batch)}, n);
        }
      } else {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
          const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
          if (b1 - b0 < 2) break;  // batch statistics need two samples
          const std::vector<Eigen::Index> cols(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                               order.begin() + static_cast<std::ptrdiff_t>(b1));
          WindowBatch wb{x_all(Eigen::all, cols), y_all(Eigen::all, cols)};
          step(TrainBatch{std::move(wb)}, static_cast<double>(b1 - b0));
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalFault) throw;
      result.diverged = true;
      result.message = e.what();
      return result;
    }
    const double val_r2 = evaluate_r2(model, f, s, split.val);
    result.history.push_back({epoch, lr, loss_sum / std::max(weight_sum, 1.0), val_r2});
    if (val_r2 > best_r2) {
      best_r2 = val_r2;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  reset_state(result.model);
  return result;
}

inline TrainResult train(Model model, const Session& s, const ReachSplit& split,
                         const TrainConfig& cfg) {
  const FeatureSeries f = extract_features(s, model.features);
  return train(std::move(model), s, f, split, cfg);
}

}  // namespace ndec
