#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/session.hpp"

namespace ndec {

enum class FeatureMode { Summation, Subwindow, Streaming };

struct FeatureConfig {
  FeatureMode mode = FeatureMode::Summation;
  double window = 0.2;  // T_W, seconds
  std::size_t m = 1;    // sub-windows per bin (Subwindow only)

  static FeatureConfig summation(double window) { return {FeatureMode::Summation, window, 1}; }
  static FeatureConfig subwindow(double window, std::size_t m) {
    return {FeatureMode::Subwindow, window, m};
  }
  static FeatureConfig streaming() { return {FeatureMode::Streaming, kLabelPeriod, 1}; }

  /// Values per probe in one record.
  std::size_t per_probe() const { return mode == FeatureMode::Subwindow ? m : 1; }
};

inline void validate(const FeatureConfig& cfg, double period = kLabelPeriod) {
  require(cfg.m >= 1, ErrorCode::InvalidArgument, "m must be >= 1");
  require(cfg.mode == FeatureMode::Subwindow || cfg.m == 1, ErrorCode::ConfigMismatch,
          "sub-windows are only meaningful in subwindow mode");
  require(std::isfinite(cfg.window) && cfg.window >= period * (1 - 1e-9),
          ErrorCode::InvalidArgument, "bin window must be at least one stride");
  if (cfg.mode == FeatureMode::Streaming)
    require(std::abs(cfg.window - period) <= 1e-12, ErrorCode::ConfigMismatch,
            "streaming mode uses a window of exactly one stride");
}

/// Per-sample feature records, probe-major within a record: probe i occupies
/// [i*per_probe, (i+1)*per_probe). Counts are non-negative integers; streaming
/// records hold 0/1.
struct FeatureSeries {
  FeatureConfig config;
  std::size_t n_probes = 0;
  std::size_t n_records = 0;
  std::vector<std::uint16_t> values;

  std::size_t dim() const { return n_probes * config.per_probe(); }
  std::span<const std::uint16_t> record(std::size_t k) const {
    return {values.data() + k * dim(), dim()};
  }
  std::uint16_t at(std::size_t k, std::size_t probe, std::size_t sub = 0) const {
    return values[k * dim() + probe * config.per_probe() + sub];
  }
};

/// Number of spikes of a sorted train in the half-open interval (lo, hi].
inline std::size_t count_in(std::span<const double> train, double lo, double hi) {
  if (hi <= lo) return 0;
  auto a = std::upper_bound(train.begin(), train.end(), lo);
  auto b = std::upper_bound(a, train.end(), hi);
  return static_cast<std::size_t>(b - a);
}

/// Spike count of one probe in (t_k - window, t_k].
inline std::size_t firing_rate(const Session& s, std::size_t probe, double t_k, double window) {
  require(probe < s.n_probes, ErrorCode::InvalidArgument, "probe index out of range");
  require(window > 0, ErrorCode::InvalidArgument, "window must be positive");
  return count_in(s.spikes[probe], t_k - window, t_k);
}

namespace detail {

/// Left edge of the bin ending at sample k. Windows spanning a whole number of
/// strides reuse the exact grid time so consecutive bins tile without gaps;
/// otherwise the edge is t_k - window.
inline double bin_left_edge(const Session& s, std::size_t k, double window) {
  const double strides = window * s.sample_rate;
  const double whole = std::round(strides);
  if (std::abs(strides - whole) <= 1e-9 * std::max(1.0, whole)) {
    const auto n = static_cast<std::size_t>(whole);
    if (k >= n) return s.sample_time(k - n);
  }
  return s.sample_time(k) - window;
}

}  // namespace detail

/// Computes one record per label sample. Windows reaching before the first
/// label count whatever spikes the recording holds there (none for sessions
/// that start at t = 0), which is zero padding.
inline FeatureSeries extract_features(const Session& s, const FeatureConfig& cfg) {
  validate(cfg, s.period());
  FeatureSeries out;
  out.config = cfg;
  out.n_probes = s.n_probes;
  out.n_records = s.n_samples();
  const std::size_t per = cfg.per_probe();
  const std::size_t dim = out.dim();
  out.values.assign(out.n_records * dim, 0);

  std::vector<double> edges(per + 1);
  // Sweep pointers: edges[j] is non-decreasing in k, so each boundary keeps
  // its own cursor into the spike train.
  std::vector<std::size_t> cursor(per + 1);
  for (std::size_t p = 0; p < s.n_probes; ++p) {
    const auto& train = s.spikes[p];
    std::fill(cursor.begin(), cursor.end(), 0);
    for (std::size_t k = 0; k < out.n_records; ++k) {
      const double t = s.sample_time(k);
      const double left = detail::bin_left_edge(s, k, cfg.window);
      const double width = (t - left) / static_cast<double>(per);
      edges[0] = left;
      for (std::size_t j = 1; j < per; ++j) edges[j] = left + static_cast<double>(j) * width;
      edges[per] = t;
      for (std::size_t j = 0; j <= per; ++j) {
        auto& c = cursor[j];
        while (c < train.size() && train[c] <= edges[j]) ++c;
        while (c > 0 && train[c - 1] > edges[j]) --c;
      }
      for (std::size_t j = 0; j < per; ++j) {
        std::size_t n = cursor[j + 1] - cursor[j];
        if (cfg.mode == FeatureMode::Streaming) n = n > 0 ? 1 : 0;
        require(n <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::NumericalFault,
                "spike count overflows feature storage");
        out.values[k * dim + p * per + j] = static_cast<std::uint16_t>(n);
      }
    }
  }
  return out;
}

/// Debug dump: sample_time followed by the record's values, probe-major.
inline void write_features_csv(std::ostream& os, const Session& s, const FeatureSeries& f) {
  os << "sample_time";
  for (std::size_t p = 0; p < f.n_probes; ++p)
    for (std::size_t j = 0; j < f.config.per_probe(); ++j) {
      os << ",p" << p;
      if (f.config.per_probe() > 1) os << "_w" << j;
    }
  os << '\n';
  for (std::size_t k = 0; k < f.n_records; ++k) {
    os << s.sample_time(k);
    for (auto v : f.record(k)) os << ',' << v;
    os << '\n';
  }
}

}  // namespace ndec
