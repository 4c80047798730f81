#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/metrics.hpp"
#include "ndec/nn.hpp"

namespace ndec {

enum class FilterMode { Forward, Bid, BlockBid };

inline std::string_view to_string(FilterMode m) {
  switch (m) {
    case FilterMode::Forward: return "fwd";
    case FilterMode::Bid: return "bid";
    case FilterMode::BlockBid: return "blockbid";
  }
  return "?";
}

/// Bessel low-pass; cutoff is a fraction of Nyquist.
struct FilterSpec {
  int order = 2;
  double cutoff = 0.05;
  FilterMode mode = FilterMode::BlockBid;
  std::size_t block_window = 16;

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

inline void validate(const FilterSpec& f) {
  require(f.order >= 1 && f.order <= 4, ErrorCode::InvalidArgument, "filter order must be 1..4");
  require(f.cutoff >= 0.05 - 1e-12 && f.cutoff <= 0.5 + 1e-12, ErrorCode::InvalidArgument,
          "cutoff must lie in [0.05, 0.5] of Nyquist");
  if (f.mode == FilterMode::BlockBid)
    require(f.block_window >= 2 && f.block_window % 2 == 0, ErrorCode::InvalidArgument,
            "block window must be even and >= 2");
}

/// Coefficients of the reverse Bessel polynomial, lowest power first:
/// theta_0 = 1, theta_1 = s + 1, theta_n = (2n-1) theta_{n-1} + s^2 theta_{n-2}.
inline std::vector<double> bessel_reverse_polynomial(int order) {
  require(order >= 0, ErrorCode::InvalidArgument, "order must be >= 0");
  std::vector<double> prev{1.0};
  if (order == 0) return prev;
  std::vector<double> cur{1.0, 1.0};
  for (int n = 2; n <= order; ++n) {
    std::vector<double> next(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[i] += (2.0 * n - 1.0) * cur[i];
    for (std::size_t i = 0; i < prev.size(); ++i) next[i + 2] += prev[i];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

namespace detail {

inline std::complex<double> poly_eval(std::span<const double> c, std::complex<double> s) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * s + c[i];
  return acc;
}

/// Roots of a polynomial (lowest power first) via companion-matrix eigenvalues.
inline std::vector<std::complex<double>> poly_roots(std::span<const double> c) {
  const auto n = static_cast<Eigen::Index>(c.size()) - 1;
  if (n < 1) return {};
  Mat comp = Mat::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) comp(i, n - 1) = -c[static_cast<std::size_t>(i)] / c.back();
  Eigen::EigenSolver<Mat> es(comp, false);
  std::vector<std::complex<double>> r(es.eigenvalues().data(), es.eigenvalues().data() + n);
  return r;
}

}  // namespace detail

/// Analog prototype poles normalized so |H(j)| = 1/sqrt(2), i.e. a -3 dB
/// cutoff at 1 rad/s, with H(s) = theta_n(0) / theta_n(s).
inline std::vector<std::complex<double>> bessel_analog_poles(int order) {
  const auto poly = bessel_reverse_polynomial(order);
  auto mag2 = [&](double w) {
    return std::norm(poly.front() / detail::poly_eval(poly, {0.0, w}));
  };
  double lo = 0.0, hi = 1.0;
  while (mag2(hi) > 0.5) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mag2(mid) > 0.5 ? lo : hi) = mid;
  }
  const double w3 = 0.5 * (lo + hi);
  auto poles = detail::poly_roots(poly);
  for (auto& p : poles) p /= w3;
  return poles;
}

/// One biquad, a0 = 1: y = b0 x + b1 x[-1] + b2 x[-2] - a1 y[-1] - a2 y[-2].
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

struct IIRCoefficients {
  std::vector<Biquad> sections;
  double gain = 1.0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h = gain;
    for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
  }
  double dc_gain() const { return std::abs(response(0.0)); }

  std::vector<std::complex<double>> poles() const {
    std::vector<std::complex<double>> out;
    for (const auto& s : sections) {
      if (s.a2 == 0) {
        out.emplace_back(-s.a1, 0.0);
      } else {
        const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4 * s.a2));
        out.push_back((-s.a1 + disc) / 2.0);
        out.push_back((-s.a1 - disc) / 2.0);
      }
    }
    return out;
  }
};

/// Digital Bessel low-pass: prewarped bilinear transform of the -3 dB
/// normalized prototype, emitted as DC-normalized second-order sections.
inline IIRCoefficients design_bessel(int order, double cutoff) {
  validate(FilterSpec{order, cutoff, FilterMode::Forward, 16});
  const double warped = std::tan(std::numbers::pi * cutoff / 2.0);
  auto poles = bessel_analog_poles(order);
  std::sort(poles.begin(), poles.end(), [](auto a, auto b) {
    return a.imag() != b.imag() ? a.imag() > b.imag() : a.real() < b.real();
  });
  IIRCoefficients c;
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const std::complex<double> pa = poles[i] * warped;
    const std::complex<double> zp = (1.0 + pa) / (1.0 - pa);
    Biquad q;
    if (std::abs(poles[i].imag()) < 1e-12) {
      q = {1.0, 1.0, 0.0, -zp.real(), 0.0};
    } else {
      // Pair with the conjugate partner.
      for (std::size_t j = i + 1; j < poles.size(); ++j)
        if (!used[j] && std::abs(poles[j] - std::conj(poles[i])) < 1e-9) {
          used[j] = true;
          break;
        }
      q = {1.0, 2.0, 1.0, -2.0 * zp.real(), std::norm(zp)};
    }
    const double g = 1.0 / q.dc_gain();
    q.b0 *= g;
    q.b1 *= g;
    q.b2 *= g;
    c.sections.push_back(q);
  }
  c.gain = 1.0 / c.dc_gain();
  return c;
}

/// Second-order sections as CSV (gain folded into the first section).
inline void write_sos_csv(std::ostream& os, const IIRCoefficients& c) {
  os.precision(17);
  os << "section,b0,b1,b2,a0,a1,a2\n";
  for (std::size_t i = 0; i < c.sections.size(); ++i) {
    const auto& s = c.sections[i];
    const double g = i == 0 ? c.gain : 1.0;
    os << i << ',' << g * s.b0 << ',' << g * s.b1 << ',' << g * s.b2 << ",1," << s.a1 << ','
       << s.a2 << '\n';
  }
}

// --- application ------------------------------------------------------------

/// Shortest signal the bidirectional mode accepts.
inline std::size_t bid_min_length(int order) { return 3 * (static_cast<std::size_t>(order) + 1); }

namespace detail {

/// Cascade in transposed direct form II. With steady_start the delay line is
/// primed as if x[0] had been applied forever, so constants pass unchanged.
inline void sos_filter(const IIRCoefficients& c, std::span<double> x, bool steady_start) {
  if (x.empty()) return;
  const double x0 = x[0] * c.gain;
  for (auto& v : x) v *= c.gain;
  double level = x0;  // steady-state input level of the current section
  for (const auto& s : c.sections) {
    double z1 = 0, z2 = 0;
    if (steady_start) {
      const double y = s.dc_gain() * level;
      z2 = s.b2 * level - s.a2 * y;
      z1 = s.b1 * level - s.a1 * y + z2;
      level = y;
    }
    for (auto& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

inline void bid_filter(const IIRCoefficients& c, std::span<double> x) {
  sos_filter(c, x, true);
  std::reverse(x.begin(), x.end());
  sos_filter(c, x, true);
  std::reverse(x.begin(), x.end());
}

inline std::vector<double> block_bid_filter(const IIRCoefficients& c, std::span<const double> x,
                                            std::size_t window) {
  const std::size_t n = x.size();
  const std::size_t half = window / 2;
  std::vector<double> out(n), block;
  for (std::size_t i = 0; i < n; ++i) {
    // Block ends half a window ahead (the latency); near the start it is
    // truncated rather than reaching further into the future.
    const std::size_t end = std::min(n - 1, i + half);
    const std::size_t start = end + 1 >= window ? end + 1 - window : 0;
    block.assign(x.begin() + static_cast<std::ptrdiff_t>(start),
                 x.begin() + static_cast<std::ptrdiff_t>(end) + 1);
    bid_filter(c, block);
    out[i] = block[i - start];
  }
  return out;
}

}  // namespace detail

/// Filters one axis; output length always equals input length.
inline std::vector<double> apply_filter(std::span<const double> signal, const FilterSpec& spec,
                                        const IIRCoefficients& c) {
  validate(spec);
  for (double v : signal)
    require(std::isfinite(v), ErrorCode::InvalidArgument, "signal must be finite");
  std::vector<double> y(signal.begin(), signal.end());
  switch (spec.mode) {
    case FilterMode::Forward:
      detail::sos_filter(c, y, false);
      break;
    case FilterMode::Bid:
      require(y.size() >= bid_min_length(spec.order), ErrorCode::TooShort,
              "signal shorter than the bidirectional warm-up");
      detail::bid_filter(c, y);
      break;
    case FilterMode::BlockBid:
      y = detail::block_bid_filter(c, signal, spec.block_window);
      break;
  }
  return y;
}

inline std::vector<double> apply_filter(std::span<const double> signal, const FilterSpec& spec) {
  return apply_filter(signal, spec, design_bessel(spec.order, spec.cutoff));
}

/// Filters each row (velocity axis) of a 2 x N series independently.
inline Mat apply_filter(const Mat& series, const FilterSpec& spec) {
  const IIRCoefficients c = design_bessel(spec.order, spec.cutoff);
  Mat out(series.rows(), series.cols());
  std::vector<double> row(static_cast<std::size_t>(series.cols()));
  for (Eigen::Index r = 0; r < series.rows(); ++r) {
    for (Eigen::Index k = 0; k < series.cols(); ++k) row[static_cast<std::size_t>(k)] = series(r, k);
    const auto y = apply_filter(row, spec, c);
    for (Eigen::Index k = 0; k < series.cols(); ++k) out(r, k) = y[static_cast<std::size_t>(k)];
  }
  return out;
}

// --- grid search --------------------------------------------------------------

/// 0.05, 0.06, ..., 0.50.
inline std::vector<double> default_cutoff_grid() {
  std::vector<double> g;
  for (int k = 5; k <= 50; ++k) g.push_back(k / 100.0);
  return g;
}

struct FilterGridCell {
  int order;
  double cutoff;
  double r2;
};

struct FilterGridResult {
  FilterSpec best;
  double best_r2 = -std::numeric_limits<double>::infinity();
  std::vector<FilterGridCell> table;
};

/// R2 after filtering for every (order, cutoff) pair; ties keep the lower
/// order, then the lower cutoff.
inline FilterGridResult filter_grid_search(const Mat& pred, const Mat& labels, FilterMode mode,
                                           std::span<const int> orders,
                                           std::span<const double> cutoffs,
                                           std::size_t block_window = 16) {
  require(!orders.empty() && !cutoffs.empty(), ErrorCode::InvalidArgument, "empty filter grid");
  std::vector<int> os(orders.begin(), orders.end());
  std::vector<double> cs(cutoffs.begin(), cutoffs.end());
  std::sort(os.begin(), os.end());
  std::sort(cs.begin(), cs.end());
  FilterGridResult res;
  for (int o : os)
    for (double c : cs) {
      const FilterSpec spec{o, c, mode, block_window};
      const double r2 = r2_score(apply_filter(pred, spec), labels);
      res.table.push_back({o, c, r2});
      if (r2 > res.best_r2) {
        res.best_r2 = r2;
        res.best = spec;
      }
    }
  return res;
}

inline FilterGridResult filter_grid_search(const Mat& pred, const Mat& labels, FilterMode mode) {
  static constexpr int kOrders[] = {1, 2, 3, 4};
  const auto cutoffs = default_cutoff_grid();
  return filter_grid_search(pred, labels, mode, kOrders, cutoffs);
}

}  // namespace ndec
