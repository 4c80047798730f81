#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ndec/error.hpp"

namespace ndec {

struct ParetoPoint {
  double cost = 0;
  double accuracy = 0;
  std::string id;

  friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

/// Non-dominated points (lower cost, higher accuracy), ordered by cost.
/// Among identical points only the first by id survives.
inline std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points) {
  for (const auto& p : points)
    require(std::isfinite(p.cost) && std::isfinite(p.accuracy), ErrorCode::InvalidArgument,
            "pareto points must be finite");
  std::vector<ParetoPoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    return a.id < b.id;
  });
  std::vector<ParetoPoint> front;
  for (auto& p : sorted)
    if (front.empty() || p.accuracy > front.back().accuracy) front.push_back(std::move(p));
  return front;
}

}  // namespace ndec
