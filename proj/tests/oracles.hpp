#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the library code they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ndec/backprop.hpp"
#include "ndec/model.hpp"
#include "ndec/pareto.hpp"

namespace oracle {

/// Plain-loop R2 of one axis.
inline double r2_axis(const std::vector<double>& pred, const std::vector<double>& label) {
  double mean = 0;
  for (double v : label) mean += v;
  mean /= static_cast<double>(label.size());
  double res = 0, tot = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    res += (label[i] - pred[i]) * (label[i] - pred[i]);
    tot += (label[i] - mean) * (label[i] - mean);
  }
  return 1.0 - res / tot;
}

enum class Reset { None, Zero, Subtract };

/// Scalar leaky integrate-and-fire neuron driven by a sequence of weighted
/// inputs. Returns (potential, spike) per step.
struct LifTrace {
  std::vector<double> u;
  std::vector<int> s;
};

inline LifTrace simulate_lif(double beta, double threshold, Reset reset, double u_sub,
                             const std::vector<double>& input) {
  LifTrace out;
  double u_prev = 0.0;
  int s_prev = 0;
  for (double wx : input) {
    double u = beta * u_prev + wx;
    if (s_prev == 1) {
      if (reset == Reset::Zero) u = 0.0;
      if (reset == Reset::Subtract) u = u - u_sub;
    }
    const int s = u > threshold ? 1 : 0;
    out.u.push_back(u);
    out.s.push_back(s);
    u_prev = u;
    s_prev = s;
  }
  return out;
}

/// O(n^2) dominance filter with duplicate points resolved by id, then by
/// input position, and the result ordered like the library's front.
inline std::vector<ndec::ParetoPoint> pareto_brute_force(const std::vector<ndec::ParetoPoint>& pts) {
  std::vector<ndec::ParetoPoint> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool drop = false;
    for (std::size_t j = 0; j < pts.size() && !drop; ++j) {
      if (i == j) continue;
      const auto& a = pts[j];
      const auto& b = pts[i];
      const bool weakly = a.cost <= b.cost && a.accuracy >= b.accuracy;
      const bool strictly = a.cost < b.cost || a.accuracy > b.accuracy;
      if (weakly && strictly) drop = true;
      if (a.cost == b.cost && a.accuracy == b.accuracy && (a.id < b.id || (a.id == b.id && j < i)))
        drop = true;
    }
    if (!drop) keep.push_back(pts[i]);
  }
  std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) { return a.cost < b.cost; });
  return keep;
}

/// Coefficients (lowest power first) of the Bessel polynomial's reverse form
/// from its closed-form coefficients (2n-k)! / (2^(n-k) k! (n-k)!).
inline std::vector<double> reverse_bessel_closed_form(int n) {
  auto fact = [](int k) {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k)
    c[static_cast<std::size_t>(k)] = fact(2 * n - k) / (std::pow(2.0, n - k) * fact(k) * fact(n - k));
  return c;
}

/// Central finite-difference check of the analytic gradient on randomly
/// chosen coordinates of the tensors whose names pass `select`. Returns the
/// largest relative error |a - n| / max(|a|, |n|, floor).
struct GradCheck {
  double max_rel_error = 0;
  int coordinates = 0;
  int kinks = 0;  // rejected coordinates
};

template <class Select>
GradCheck check_gradients(ndec::Model& model, const ndec::TrainBatch& batch, int n_coords,
                          std::uint64_t seed, Select&& select, double eps = 1e-4,
                          double floor = 1e-7, double kink_tol = 1e-2) {
  ndec::TrainMode mode;
  mode.update_running_stats = false;
  const ndec::Gradients g = ndec::backprop_gradients(model, batch, mode);

  struct Slot {
    Eigen::Map<ndec::Vec> param;
    Eigen::Map<const ndec::Vec> grad;
  };
  std::vector<Slot> slots;
  std::vector<Eigen::Map<const ndec::Vec>> grads;
  std::visit(
      [&](const auto& gn) {
        ndec::for_each_param(gn, [&](std::string_view name, Eigen::Map<const ndec::Vec> t) {
          if (select(name)) grads.push_back(t);
        });
      },
      g.grad);
  std::size_t gi = 0;
  std::visit(
      [&](auto& n) {
        ndec::for_each_param(n, [&](std::string_view name, Eigen::Map<ndec::Vec> t) {
          if (select(name)) slots.push_back({t, grads[gi++]});
        });
      },
      model.net);

  std::size_t total = 0;
  for (const auto& s : slots) total += static_cast<std::size_t>(s.param.size());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  auto loss = [&] { return ndec::batch_loss(model, batch, mode, nullptr); };

  GradCheck out;
  const double l0 = loss();
  for (int tries = 0; out.coordinates < n_coords && tries < 50 * n_coords; ++tries) {
    std::size_t k = pick(rng);
    std::size_t si = 0;
    while (k >= static_cast<std::size_t>(slots[si].param.size())) k -= static_cast<std::size_t>(slots[si++].param.size());
    double& w = slots[si].param(static_cast<Eigen::Index>(k));
    const double analytic = slots[si].grad(static_cast<Eigen::Index>(k));
    const double w0 = w;
    w = w0 + eps;
    const double lp = loss();
    w = w0 - eps;
    const double lm = loss();
    w = w0;
    // Piecewise-linear activations: a step across a kink makes the two
    // one-sided slopes disagree, and the point is not differentiable there.
    const double right = (lp - l0) / eps, left = (l0 - lm) / eps;
    if (std::abs(right - left) > kink_tol * std::max({std::abs(right), std::abs(left), floor})) {
      ++out.kinks;
      continue;
    }
    const double numeric = (lp - lm) / (2 * eps);
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.coordinates;
  }
  return out;
}

inline bool any_name(std::string_view) { return true; }

/// Random batch with Poisson-like integer inputs and unit-scale labels.
inline ndec::WindowBatch random_window_batch(std::size_t dim, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> counts(2.0);
  std::normal_distribution<double> normal;
  ndec::WindowBatch b{ndec::Mat(static_cast<Eigen::Index>(dim), n), ndec::Mat(2, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) b.x(i, j) = counts(rng);
    b.y(0, j) = normal(rng);
    b.y(1, j) = normal(rng);
  }
  return b;
}

inline std::vector<ndec::Sequence> random_sequences(std::size_t dim, std::vector<Eigen::Index> lengths,
                                                    double p_one, bool binary, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(p_one);
  std::poisson_distribution<int> counts(1.0);
  std::normal_distribution<double> normal;
  std::vector<ndec::Sequence> out;
  for (auto t : lengths) {
    ndec::Sequence s{ndec::Mat(static_cast<Eigen::Index>(dim), t), ndec::Mat(2, t)};
    for (Eigen::Index j = 0; j < t; ++j) {
      for (Eigen::Index i = 0; i < s.x.rows(); ++i) s.x(i, j) = binary ? bit(rng) : counts(rng);
      s.y(0, j) = normal(rng);
      s.y(1, j) = normal(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace oracle
