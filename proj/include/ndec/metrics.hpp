#pragma once

#include <Eigen/Dense>

#include "ndec/error.hpp"
#include "ndec/nn.hpp"

namespace ndec {

/// Coefficient of determination of one axis.
inline double r2_axis(const Eigen::Ref<const Eigen::RowVectorXd>& pred,
                      const Eigen::Ref<const Eigen::RowVectorXd>& label) {
  require(pred.size() == label.size(), ErrorCode::ShapeMismatch, "prediction/label length mismatch");
  require(label.size() >= 2, ErrorCode::InvalidArgument, "R2 needs at least two samples");
  const double mean = label.mean();
  const double ss_tot = (label.array() - mean).square().sum();
  require(ss_tot > 0, ErrorCode::DegenerateLabels, "labels have zero variance");
  const double ss_res = (label - pred).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

/// Mean of the X and Y R2 for 2 x N prediction and label series.
inline double r2_score(const Mat& pred, const Mat& label) {
  require(pred.rows() == 2 && label.rows() == 2, ErrorCode::ShapeMismatch,
          "series must have two rows (vx, vy)");
  return 0.5 * (r2_axis(pred.row(0), label.row(0)) + r2_axis(pred.row(1), label.row(1)));
}

}  // namespace ndec
