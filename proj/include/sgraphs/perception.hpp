#pragma once

#include <cstdint>
#include <vector>

#include "sgraphs/factor_graph.hpp"
#include "sgraphs/point_cloud.hpp"

namespace sgraphs {

struct PerceptionConfig {
  double range_min = 0.3;
  double range_max = 100.0;
  double voxel = 0.1;
  int ransac_iterations = 200;
  double ransac_threshold = 0.05;
  int min_inliers = 100;
  int max_planes = 12;
  double plane_match_tol = 0.35;
  double pose_plane_info_per_inlier = 0.01;
  double pose_plane_info_cap = 10.0;
  int max_points_per_observation = 300;
};

/// Range-filter then voxel-grid downsample (one centroid per voxel).
/// Output order follows first appearance of each voxel, so the result is
/// deterministic for a given input order.
PointCloud prefilter(const PointCloud& cloud, const PerceptionConfig& cfg);

struct SegmentedPlane {
  PlaneCoeffs coeffs;  // sensor frame, canonical sign
  std::vector<int> inlier_indices;
  int inlier_count = 0;
  Vec3 centroid{0.0, 0.0, 0.0};
};

/// Sequential RANSAC: extract the best plane, refine it by a least-squares
/// fit to its inliers, remove them, repeat. Stops below cfg.min_inliers or at
/// cfg.max_planes.
std::vector<SegmentedPlane> segment_planes(const PointCloud& cloud,
                                           const PerceptionConfig& cfg,
                                           std::uint64_t seed);

PlaneCategory classify_plane(const PlaneCoeffs& coeffs);

inline bool plane_is_vertical(PlaneCategory c) {
  return c != PlaneCategory::Horizontal;
}

/// Bookkeeping the mapper keeps per plane variable, outside the factor graph:
/// which keyframes observed it and a subsample of the local inlier points.
struct PlaneObservation {
  VariableId keyframe;
  PointCloud points_local;
};

struct MappedPlane {
  VariableId id;
  int last_keyframe_index = 0;  // monotone keyframe insertion counter
  std::vector<PlaneObservation> observations;
};

using PlaneBook = std::vector<MappedPlane>;

MappedPlane* find_mapped_plane(PlaneBook& book, VariableId id);

/// Inlier points of one mapped plane, materialized in the map frame with the
/// current keyframe estimates.
PointCloud mapped_plane_points(const FactorGraph& graph, const MappedPlane& entry);

/// Transform the observation into the map frame using the current keyframe
/// estimate, associate it against same-category planes of the same floor by
/// the l2 norm of sign-aligned coefficient vectors, insert a new PlaneVar when
/// nothing is close enough, and add the pose-plane factor either way.
VariableId associate_and_map_plane(FactorGraph& graph, PlaneBook& book,
                                   VariableId keyframe_id, int keyframe_index,
                                   int floor_id, const SegmentedPlane& observed,
                                   const PointCloud& cloud,
                                   const PerceptionConfig& cfg);

/// l2 distance between coefficient vectors after aligning b's sign to a.
double plane_coeff_distance(const PlaneCoeffs& a, const PlaneCoeffs& b);

}  // namespace sgraphs
