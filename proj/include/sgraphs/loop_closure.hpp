#pragma once

#include <map>
#include <optional>

#include "sgraphs/factor_graph.hpp"
#include "sgraphs/point_cloud.hpp"

namespace sgraphs {

struct LoopConfig {
  int min_index_gap = 20;
  double search_radius = 5.0;
  int max_candidates = 3;
  int icp_max_iterations = 30;
  double correspondence_cutoff = 1.0;
  int min_correspondences = 50;
  double fitness_accept = 0.05;  // mean squared point-to-plane residual, m^2
  int normal_knn = 10;
};

struct LoopCandidate {
  VariableId query;
  VariableId match;
  Pose relative;  // match -> query estimate
  double fitness = 0.0;
};

struct ScanMatchResult {
  Pose pose;  // maps source-frame points into the target frame
  double fitness = 0.0;
  int correspondences = 0;
  int iterations = 0;
};

/// Keyframes at least cfg.min_index_gap older than the query whose estimated
/// position is within cfg.search_radius, nearest first.
std::vector<VariableId> find_candidates(const FactorGraph& graph,
                                        VariableId query_id,
                                        const LoopConfig& cfg);

/// Point-to-plane ICP with target normals from a k-NN plane fit. Fitness is
/// non-increasing across accepted iterations. Throws InsufficientOverlap when
/// fewer than cfg.min_correspondences matches remain at convergence.
ScanMatchResult scan_match(const PointCloud& source, const PointCloud& target,
                           const Pose& init, const LoopConfig& cfg);

using KeyframeClouds = std::map<VariableId, PointCloud>;

/// Verify candidates with scan matching (optionally in parallel) and add a
/// loop factor for the first one whose fitness passes the gate; at most one
/// per query keyframe.
std::optional<FactorId> try_close_loop(FactorGraph& graph,
                                       const KeyframeClouds& clouds,
                                       VariableId query_id, const Mat6& information,
                                       const LoopConfig& cfg, bool parallel);

}  // namespace sgraphs
