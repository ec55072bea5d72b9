#pragma once

// Pose error metrics over sets of n poses, each k x 3.

#include "l3d/common.hpp"

#include <vector>

namespace l3d {

namespace detail {

inline void check_pair(const std::vector<Points3>& pred, const std::vector<Points3>& gt) {
  require(!pred.empty(), "metric needs at least one pose");
  require(pred.size() == gt.size(), "metric: prediction and ground-truth counts differ");
  for (std::size_t i = 0; i < pred.size(); ++i)
    require(pred[i].rows() == gt[i].rows() && pred[i].rows() > 0,
            "metric: pose " + std::to_string(i) + " has mismatched keypoint count");
}

}  // namespace detail

/// Mean squared component difference over all n*k*3 scalars.
inline double mse(const std::vector<Points3>& pred, const std::vector<Points3>& gt) {
  detail::check_pair(pred, gt);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += (pred[i] - gt[i]).squaredNorm();
    count += static_cast<std::size_t>(pred[i].size());
  }
  return sum / static_cast<double>(count);
}

/// Diagonal of the axis-aligned bounding box of a pose.
inline double bbox_diagonal(const Points3& pose) {
  require(pose.rows() > 0, "bbox of an empty pose");
  return (pose.colwise().maxCoeff() - pose.colwise().minCoeff()).norm();
}

inline std::vector<double> bbox_diagonals(const std::vector<Points3>& gt) {
  std::vector<double> d;
  d.reserve(gt.size());
  for (const auto& g : gt) d.push_back(bbox_diagonal(g));
  return d;
}

/// Fraction of (sample, keypoint) pairs whose error is at most x * diag[sample].
inline double pdj(const std::vector<Points3>& pred, const std::vector<Points3>& gt,
                  const std::vector<double>& diag, double x) {
  detail::check_pair(pred, gt);
  require(diag.size() == pred.size(), "pdj: one bbox diagonal per sample required");
  require(x > 0.0, "pdj: threshold fraction must be positive");
  std::size_t hit = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(diag[i] > 0.0 && std::isfinite(diag[i]),
            "pdj: bbox diagonal of sample " + std::to_string(i) + " is not positive");
    const double limit = x * diag[i];
    for (Eigen::Index k = 0; k < pred[i].rows(); ++k)
      if ((pred[i].row(k) - gt[i].row(k)).norm() <= limit) ++hit;
    total += static_cast<std::size_t>(pred[i].rows());
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

/// PDJ with the diagonal taken from each ground-truth pose.
inline double pdj(const std::vector<Points3>& pred, const std::vector<Points3>& gt, double x) {
  detail::check_pair(pred, gt);
  return pdj(pred, gt, bbox_diagonals(gt), x);
}

}  // namespace l3d
