#include "sgraphs/evaluation.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "sgraphs/error.hpp"
#include "sgraphs/kdtree.hpp"

namespace sgraphs {

AteResult compute_ate(const Trajectory& estimate, const Trajectory& reference,
                      double max_dt) {
  std::vector<std::pair<Vec3, Vec3>> pairs;  // (estimate, reference)
  for (const TrajectoryEntry& e : estimate) {
    double best_dt = max_dt;
    const TrajectoryEntry* best = nullptr;
    for (const TrajectoryEntry& r : reference) {
      const double dt = std::abs(e.timestamp - r.timestamp);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &r;
      }
    }
    if (best) pairs.emplace_back(e.pose.translation, best->pose.translation);
  }
  if (pairs.empty()) {
    throw Error(ErrorCode::NoOverlap, "no timestamp associations");
  }

  Vec3 c_est = Vec3::Zero(), c_ref = Vec3::Zero();
  for (const auto& [pe, pr] : pairs) {
    c_est += pe;
    c_ref += pr;
  }
  c_est /= static_cast<double>(pairs.size());
  c_ref /= static_cast<double>(pairs.size());

  Mat3 H = Mat3::Zero();
  for (const auto& [pe, pr] : pairs) {
    H += (pe - c_est) * (pr - c_ref).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0.0) {
    Mat3 fix = Mat3::Identity();
    fix(2, 2) = -1.0;
    R = svd.matrixV() * fix * svd.matrixU().transpose();
  }
  const Vec3 t = c_ref - R * c_est;

  double sum_sq = 0.0;
  for (const auto& [pe, pr] : pairs) {
    sum_sq += (R * pe + t - pr).squaredNorm();
  }

  AteResult out;
  out.rmse = std::sqrt(sum_sq / pairs.size());
  out.matched_pairs = static_cast<int>(pairs.size());
  out.alignment = Pose(Eigen::Quaterniond(R), t);
  return out;
}

double compute_map_rmse(const PointCloud& estimated,
                        const PointCloud& ground_truth) {
  if (estimated.empty() || ground_truth.empty()) {
    throw Error(ErrorCode::EmptyCloud, "map rmse needs non-empty clouds");
  }
  const KdTree tree(ground_truth);
  double sum_sq = 0.0;
  for (const Vec3& p : estimated) {
    sum_sq += tree.nearest(p).second;
  }
  return std::sqrt(sum_sq / estimated.size());
}

}  // namespace sgraphs
