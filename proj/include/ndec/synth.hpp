#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/session.hpp"

namespace ndec {

/// Center-out style reaching with cosine-tuned Poisson probes.
struct SynthConfig {
  std::uint32_t n_probes = 96;
  double duration = 120.0;          // seconds
  double baseline_rate = 20.0;      // Hz
  double modulation_depth = 1.0;    // Hz per unit of speed
  std::vector<double> preferred_directions;  // radians; drawn from the seed when empty
  std::uint64_t rng_seed = 1;

  double workspace_half_width = 10.0;  // targets drawn uniformly from the square
  double min_move_seconds = 0.5;
  double max_move_seconds = 1.5;
  double min_hold_seconds = 0.1;
  double max_hold_seconds = 0.6;
  double long_reach_probability = 0.05;  // inattentive reaches with an 8-10 s hold
};

/// Rate of one probe for a given velocity, clamped at zero.
inline double tuned_rate(double baseline, double depth, double preferred, double vx, double vy) {
  const double drive = vx * std::cos(preferred) + vy * std::sin(preferred);
  return std::max(0.0, baseline + depth * drive);
}

/// Deterministic for a fixed seed. Velocities follow a minimum-jerk profile
/// from the previous target to the next one, then hold at zero until the
/// target changes. Spikes are drawn per label interval (t_k, t_k+1] with the
/// rate evaluated at v(t_k).
inline Session synth_session(const SynthConfig& cfg) {
  require(cfg.duration > 0 && std::isfinite(cfg.duration), ErrorCode::InvalidArgument,
          "synthetic duration must be positive");
  require(cfg.n_probes > 0, ErrorCode::InvalidArgument, "need at least one probe");
  require(cfg.baseline_rate >= 0, ErrorCode::InvalidArgument, "baseline rate must be >= 0");
  require(cfg.preferred_directions.empty() || cfg.preferred_directions.size() == cfg.n_probes,
          ErrorCode::InvalidArgument, "one preferred direction per probe");
  require(cfg.min_move_seconds > 0 && cfg.max_move_seconds >= cfg.min_move_seconds &&
              cfg.min_hold_seconds > 0 && cfg.max_hold_seconds >= cfg.min_hold_seconds,
          ErrorCode::InvalidArgument, "bad reach timing");

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Session s;
  s.n_probes = cfg.n_probes;
  s.sample_rate = kLabelRate;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration * s.sample_rate));
  require(n >= 2, ErrorCode::InvalidArgument, "synthetic duration shorter than two samples");
  s.vx.assign(n, 0.0f);
  s.vy.assign(n, 0.0f);
  s.tx.assign(n, 0.0f);
  s.ty.assign(n, 0.0f);

  std::vector<double> pd = cfg.preferred_directions;
  if (pd.empty()) {
    pd.resize(cfg.n_probes);
    for (auto& a : pd) a = uniform(0.0, 2.0 * std::numbers::pi);
  }

  const double w = cfg.workspace_half_width;
  double px = 0.0, py = 0.0;
  std::size_t k = 0;
  while (k < n) {
    double gx = uniform(-w, w), gy = uniform(-w, w);
    // A new target must differ from the current one or the boundary vanishes.
    if (w > 0 && k > 0 && static_cast<float>(gx) == s.tx[k - 1] &&
        static_cast<float>(gy) == s.ty[k - 1])
      gx = -gx;
    const double move = uniform(cfg.min_move_seconds, cfg.max_move_seconds);
    double hold = uniform(cfg.min_hold_seconds, cfg.max_hold_seconds);
    if (unit(rng) < cfg.long_reach_probability) hold = uniform(8.0, 10.0);
    const auto move_n = static_cast<std::size_t>(std::llround(move * s.sample_rate));
    const auto total_n = move_n + static_cast<std::size_t>(std::llround(hold * s.sample_rate));
    const double dx = gx - px, dy = gy - py;
    for (std::size_t j = 0; j < total_n && k < n; ++j, ++k) {
      s.tx[k] = static_cast<float>(gx);
      s.ty[k] = static_cast<float>(gy);
      if (j < move_n) {
        const double tau = static_cast<double>(j) / static_cast<double>(move_n);
        const double shape = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / move;
        s.vx[k] = static_cast<float>(dx * shape);
        s.vy[k] = static_cast<float>(dy * shape);
      }
    }
    px = gx;
    py = gy;
  }

  const double dt = s.period();
  s.spikes.assign(cfg.n_probes, {});
  for (std::uint32_t p = 0; p < cfg.n_probes; ++p) {
    auto& train = s.spikes[p];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double rate =
          tuned_rate(cfg.baseline_rate, cfg.modulation_depth, pd[p], s.vx[i], s.vy[i]);
      if (rate <= 0) continue;
      std::poisson_distribution<int> count(rate * dt);
      const int c = count(rng);
      const double t0 = s.sample_time(i), t1 = s.sample_time(i + 1);
      const std::size_t first = train.size();
      for (int j = 0; j < c; ++j) {
        double t = t0 + (t1 - t0) * unit(rng);
        if (t <= t0) t = t1;  // keep inside the half-open bin (t0, t1]
        train.push_back(t);
      }
      std::sort(train.begin() + static_cast<std::ptrdiff_t>(first), train.end());
    }
  }
  return s;
}

}  // namespace ndec
