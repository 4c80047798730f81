#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/model.hpp"
#include "ndec/pareto.hpp"
#include "ndec/reaches.hpp"
#include "ndec/train.hpp"

namespace ndec {

struct SweepEntry {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t parameters = 0;
  double val_r2 = 0;
  double test_r2 = 0;
  bool ok = false;
  std::string error;

  std::string id() const { return std::to_string(n1) + "-" + std::to_string(n2); }
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::vector<ParetoPoint> front;  // cost = parameter count, accuracy = test R2
};

/// Trains one model per (N1, N2) pair with the same seed and reports test R2
/// against parameter count. A failing configuration is recorded, not fatal.
inline SweepResult size_sweep(Arch arch, std::span<const std::pair<std::size_t, std::size_t>> grid,
                              const Session& s, const ReachSplit& split, const TrainConfig& cfg,
                              std::uint64_t model_seed) {
  require(!grid.empty(), ErrorCode::InvalidArgument, "size grid is empty");
  const FeatureConfig fc = default_features(arch);
  const FeatureSeries f = extract_features(s, fc);
  SweepResult res;
  std::vector<ParetoPoint> points;
  for (const auto& [n1, n2] : grid) {
    SweepEntry e;
    e.n1 = n1;
    e.n2 = n2;
    try {
      LayerShape shape = LayerShape::base(s.n_probes);
      shape.n1 = n1;
      shape.n2 = n2;
      Model m = make_model(arch, shape, model_seed, fc);
      e.parameters = parameter_count(m);
      TrainResult tr = train(std::move(m), s, f, split, cfg);
      if (tr.diverged) throw Error(ErrorCode::NumericalFault, tr.message);
      e.val_r2 = tr.history.at(static_cast<std::size_t>(tr.best_epoch)).val_r2;
      e.test_r2 = evaluate_r2(tr.model, f, s, split.test);
      e.ok = true;
      points.push_back({static_cast<double>(e.parameters), e.test_r2, e.id()});
    } catch (const Error& err) {
      e.error = e.id() + ": " + err.what();
    }
    res.entries.push_back(std::move(e));
  }
  res.front = pareto_front(points);
  return res;
}

}  // namespace ndec
