#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

#include "ndec/error.hpp"
#include "ndec/session.hpp"

namespace ndec {

/// A reach ends wherever the target position changes. Targets are piecewise
/// constant so the comparison is exact.
inline ReachBoundaries segment_reaches(std::span<const float> tx, std::span<const float> ty) {
  require(!tx.empty(), ErrorCode::InvalidSession, "cannot segment an empty target array");
  require(tx.size() == ty.size(), ErrorCode::InvalidSession, "target axes differ in length");
  ReachBoundaries b;
  std::size_t start = 0;
  for (std::size_t i = 1; i < tx.size(); ++i) {
    if (tx[i] != tx[i - 1] || ty[i] != ty[i - 1]) {
      b.push_back(start, i);
      start = i;
    }
  }
  b.push_back(start, tx.size());
  return b;
}

inline ReachBoundaries segment_reaches(const Session& s) { return segment_reaches(s.tx, s.ty); }

enum class SplitMode { Contiguous, KFold };

struct SplitSpec {
  double train_fraction = 0.5;
  double val_fraction = 0.25;
  double test_fraction = 0.25;
  SplitMode mode = SplitMode::Contiguous;
  std::size_t k = 5;
  std::size_t fold_index = 0;
  std::optional<double> max_reach_seconds = 8.0;
  bool remove_long_from_test = false;

  static SplitSpec fifty() { return {}; }
  static SplitSpec eighty() { return {0.8, 0.1, 0.1}; }
  static SplitSpec kfold(std::size_t k, std::size_t fold) {
    SplitSpec s;
    s.mode = SplitMode::KFold;
    s.k = k;
    s.fold_index = fold;
    return s;
  }
};

inline void validate(const SplitSpec& spec) {
  auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (spec.mode == SplitMode::Contiguous) {
    require(in_unit(spec.train_fraction) && in_unit(spec.val_fraction) &&
                in_unit(spec.test_fraction),
            ErrorCode::InvalidArgument, "split fractions must lie in (0,1)");
    require(std::abs(spec.train_fraction + spec.val_fraction + spec.test_fraction - 1.0) <= 1e-9,
            ErrorCode::InvalidArgument, "split fractions must sum to 1");
  } else {
    require(spec.k >= 2, ErrorCode::InvalidArgument, "k-fold needs k >= 2");
    require(spec.fold_index < spec.k, ErrorCode::InvalidArgument, "fold index out of range");
  }
  if (spec.max_reach_seconds)
    require(*spec.max_reach_seconds > 0, ErrorCode::InvalidArgument, "max reach must be > 0");
}

struct ReachSplit {
  ReachBoundaries train, val, test;
};

namespace detail {
inline ReachBoundaries take(const ReachBoundaries& b, std::size_t first, std::size_t last) {
  ReachBoundaries out;
  for (std::size_t i = first; i < last; ++i) out.push_back(b.starts[i], b.ends[i]);
  return out;
}
}  // namespace detail

/// Chronological split by reach count. In k-fold mode the reaches are cut into
/// k contiguous parts; the held-out part is halved into validation (first
/// half) and test (second half) and every other part trains.
inline ReachSplit split_reaches(const ReachBoundaries& b, const SplitSpec& spec) {
  validate(spec);
  const std::size_t r = b.size();
  require(r >= 4, ErrorCode::InsufficientData,
          "need at least 4 reaches to split, got " + std::to_string(r));
  ReachSplit out;
  if (spec.mode == SplitMode::Contiguous) {
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * r + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * r + 1e-9));
    require(n_train >= 1 && n_val >= 1 && n_train + n_val < r, ErrorCode::InsufficientData,
            "too few reaches for the requested split");
    out.train = detail::take(b, 0, n_train);
    out.val = detail::take(b, n_train, n_train + n_val);
    out.test = detail::take(b, n_train + n_val, r);
    return out;
  }
  require(r >= 2 * spec.k, ErrorCode::InsufficientData,
          "too few reaches for " + std::to_string(spec.k) + "-fold split");
  auto part_begin = [&](std::size_t p) { return p * r / spec.k; };
  for (std::size_t p = 0; p < spec.k; ++p) {
    if (p == spec.fold_index) continue;
    for (std::size_t i = part_begin(p); i < part_begin(p + 1); ++i)
      out.train.push_back(b.starts[i], b.ends[i]);
  }
  const std::size_t lo = part_begin(spec.fold_index);
  const std::size_t hi = part_begin(spec.fold_index + 1);
  const std::size_t mid = lo + (hi - lo) / 2;
  out.val = detail::take(b, lo, mid);
  out.test = detail::take(b, mid, hi);
  return out;
}

/// Drops reaches lasting longer than max_seconds; survivors are untouched.
inline ReachBoundaries remove_long_reaches(const ReachBoundaries& b, double period,
                                           double max_seconds) {
  require(max_seconds > 0, ErrorCode::InvalidArgument, "max_seconds must be positive");
  ReachBoundaries out;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (static_cast<double>(b.length(i)) * period <= max_seconds)
      out.push_back(b.starts[i], b.ends[i]);
  return out;
}

inline ReachBoundaries remove_long_reaches(const ReachBoundaries& b, const Session& s,
                                           double max_seconds) {
  return remove_long_reaches(b, s.period(), max_seconds);
}

/// Split, then apply the long-reach policy: training always, test only when
/// asked to.
inline ReachSplit prepare_splits(const Session& s, const SplitSpec& spec) {
  ReachSplit split = split_reaches(segment_reaches(s), spec);
  if (spec.max_reach_seconds) {
    split.train = remove_long_reaches(split.train, s, *spec.max_reach_seconds);
    if (spec.remove_long_from_test)
      split.test = remove_long_reaches(split.test, s, *spec.max_reach_seconds);
  }
  return split;
}

}  // namespace ndec
