#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ndec/error.hpp"

namespace ndec {

/// Label rate of the reaching recordings (Hz) and the matching stride.
inline constexpr double kLabelRate = 250.0;
inline constexpr double kLabelPeriod = 1.0 / kLabelRate;

/// Longest bin window any feature mode uses; spikes may precede the first
/// label by at most this much.
inline constexpr double kMaxWindow = 0.2;

/// One recording: per-probe spike trains plus velocity and target labels on a
/// uniform grid t_k = k / sample_rate.
struct Session {
  std::uint32_t n_probes = 0;
  double sample_rate = kLabelRate;
  std::vector<float> vx, vy;  // velocity labels
  std::vector<float> tx, ty;  // on-screen target position
  std::vector<std::vector<double>> spikes;  // seconds, sorted per probe

  std::size_t n_samples() const { return vx.size(); }
  double period() const { return 1.0 / sample_rate; }
  double sample_time(std::size_t k) const { return static_cast<double>(k) / sample_rate; }

  friend bool operator==(const Session&, const Session&) = default;
};

inline void validate(const Session& s) {
  const std::size_t n = s.n_samples();
  require(n >= 1, ErrorCode::InvalidSession, "session has no samples");
  require(std::isfinite(s.sample_rate) && s.sample_rate > 0, ErrorCode::InvalidSession,
          "sample rate must be positive");
  require(s.vy.size() == n && s.tx.size() == n && s.ty.size() == n, ErrorCode::InvalidSession,
          "label arrays differ in length");
  require(s.spikes.size() == s.n_probes, ErrorCode::InvalidSession,
          "spike train count does not match n_probes");
  const double lo = s.sample_time(0) - kMaxWindow;
  const double hi = s.sample_time(n - 1);
  for (std::size_t p = 0; p < s.spikes.size(); ++p) {
    const auto& train = s.spikes[p];
    require(std::is_sorted(train.begin(), train.end()), ErrorCode::InvalidSession,
            "spikes of probe " + std::to_string(p) + " are not sorted");
    if (!train.empty()) {
      require(train.front() >= lo && train.back() <= hi, ErrorCode::InvalidSession,
              "spikes of probe " + std::to_string(p) + " fall outside the recording");
    }
  }
}

/// Half-open reach spans [starts[i], ends[i]) in sample indices.
struct ReachBoundaries {
  std::vector<std::size_t> starts;
  std::vector<std::size_t> ends;

  std::size_t size() const { return starts.size(); }
  bool empty() const { return starts.empty(); }
  std::size_t length(std::size_t i) const { return ends[i] - starts[i]; }

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += length(i);
    return n;
  }

  void push_back(std::size_t start, std::size_t end) {
    starts.push_back(start);
    ends.push_back(end);
  }

  /// Sample indices of all reaches, in order.
  std::vector<std::size_t> sample_indices() const {
    std::vector<std::size_t> idx;
    idx.reserve(total_samples());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t k = starts[i]; k < ends[i]; ++k) idx.push_back(k);
    return idx;
  }

  friend bool operator==(const ReachBoundaries&, const ReachBoundaries&) = default;
};

}  // namespace ndec
