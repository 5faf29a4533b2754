#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "sgraphs/point_cloud.hpp"

namespace sgraphs {

/// Median-split kd-tree over 3D points, enough for the nearest-neighbor
/// queries the ICP and map-evaluation paths need.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const PointCloud& points) : points_(points) {
    indices_.resize(points_.size());
    std::iota(indices_.begin(), indices_.end(), 0);
    if (!indices_.empty()) build(0, static_cast<int>(indices_.size()), 0);
  }

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  const Vec3& point(int i) const { return points_[i]; }

  /// Index of the nearest point and its squared distance; (-1, inf) if empty.
  std::pair<int, double> nearest(const Vec3& query) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (!points_.empty()) {
      nearest_impl(query, 0, static_cast<int>(indices_.size()), 0, best, best_d2);
    }
    return {best, best_d2};
  }

  /// Indices of the k nearest points, nearest first.
  std::vector<int> knn(const Vec3& query, int k) const {
    std::priority_queue<std::pair<double, int>> heap;  // max-heap on distance
    if (!points_.empty()) {
      knn_impl(query, 0, static_cast<int>(indices_.size()), 0, k, heap);
    }
    std::vector<int> out(heap.size());
    for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
      out[i] = heap.top().second;
      heap.pop();
    }
    return out;
  }

 private:
  void build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(indices_.begin() + lo, indices_.begin() + mid,
                     indices_.begin() + hi, [&](int a, int b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void nearest_impl(const Vec3& q, int lo, int hi, int depth, int& best,
                    double& best_d2) const {
    if (lo >= hi) return;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    const Vec3& p = points_[indices_[mid]];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = indices_[mid];
    }
    const double diff = q[axis] - p[axis];
    const int near_lo = diff < 0 ? lo : mid + 1;
    const int near_hi = diff < 0 ? mid : hi;
    const int far_lo = diff < 0 ? mid + 1 : lo;
    const int far_hi = diff < 0 ? hi : mid;
    nearest_impl(q, near_lo, near_hi, depth + 1, best, best_d2);
    if (diff * diff < best_d2) {
      nearest_impl(q, far_lo, far_hi, depth + 1, best, best_d2);
    }
  }

  void knn_impl(const Vec3& q, int lo, int hi, int depth, int k,
                std::priority_queue<std::pair<double, int>>& heap) const {
    if (lo >= hi) return;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    const Vec3& p = points_[indices_[mid]];
    const double d2 = (p - q).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace(d2, indices_[mid]);
    } else if (d2 < heap.top().first) {
      heap.pop();
      heap.emplace(d2, indices_[mid]);
    }
    const double diff = q[axis] - p[axis];
    const int near_lo = diff < 0 ? lo : mid + 1;
    const int near_hi = diff < 0 ? mid : hi;
    const int far_lo = diff < 0 ? mid + 1 : lo;
    const int far_hi = diff < 0 ? hi : mid;
    knn_impl(q, near_lo, near_hi, depth + 1, k, heap);
    if (static_cast<int>(heap.size()) < k || diff * diff < heap.top().first) {
      knn_impl(q, far_lo, far_hi, depth + 1, k, heap);
    }
  }

  PointCloud points_;
  std::vector<int> indices_;
};

}  // namespace sgraphs
