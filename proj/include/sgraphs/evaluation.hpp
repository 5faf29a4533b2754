#pragma once

#include "sgraphs/point_cloud.hpp"

namespace sgraphs {

struct AteResult {
  double rmse = 0.0;
  int matched_pairs = 0;
  Pose alignment;  // maps estimate positions onto the reference
};

/// Absolute trajectory error: associate poses by timestamp (within max_dt),
/// rigidly align the estimate onto the reference (closed-form Procrustes, no
/// scale) and report the RMSE of the translation residuals.
AteResult compute_ate(const Trajectory& estimate, const Trajectory& reference,
                      double max_dt = 0.01);

/// RMSE over estimated points of the nearest-neighbor distance to the
/// ground-truth cloud.
double compute_map_rmse(const PointCloud& estimated,
                        const PointCloud& ground_truth);

}  // namespace sgraphs
