#include "sgraphs/loop_closure.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <future>

#include "sgraphs/kdtree.hpp"

namespace sgraphs {

std::vector<VariableId> find_candidates(const FactorGraph& graph,
                                        VariableId query_id,
                                        const LoopConfig& cfg) {
  if (!graph.has_variable(query_id)) {
    throw Error(ErrorCode::UnknownKeyframe,
                "keyframe #" + std::to_string(query_id.index));
  }
  const Vec3 query_pos = graph.keyframe(query_id).pose.translation;
  std::vector<std::pair<double, VariableId>> scored;
  for (const auto& [id, v] : graph.variables()) {
    if (id.kind != VarKind::Keyframe) continue;
    if (std::abs(id.index - query_id.index) < cfg.min_index_gap) continue;
    const double dist =
        (std::get<KeyframeVar>(v).pose.translation - query_pos).norm();
    if (dist <= cfg.search_radius) scored.emplace_back(dist, id);
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first < b.first : a.second < b.second;
            });
  std::vector<VariableId> out;
  for (const auto& [dist, id] : scored) {
    if (static_cast<int>(out.size()) >= cfg.max_candidates) break;
    out.push_back(id);
  }
  return out;
}

namespace {

std::vector<Vec3> estimate_normals(const KdTree& tree, const PointCloud& points,
                                   int knn) {
  std::vector<Vec3> normals(points.size(), Vec3::Zero());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::vector<int> nn = tree.knn(points[i], knn);
    if (nn.size() < 3) continue;
    Vec3 centroid = Vec3::Zero();
    for (int j : nn) centroid += points[j];
    centroid /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (int j : nn) {
      const Vec3 q = points[j] - centroid;
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // Reject degenerate neighborhoods (collinear points).
    if (eig.eigenvalues()(1) < 1e-12) continue;
    normals[i] = eig.eigenvectors().col(0);
  }
  return normals;
}

struct IcpEval {
  double fitness = 0.0;
  int correspondences = 0;
  Mat6 hessian = Mat6::Zero();
  Vec6 gradient = Vec6::Zero();
};

IcpEval evaluate_icp(const PointCloud& source, const KdTree& tree,
                     const std::vector<Vec3>& normals, const Pose& T,
                     double cutoff) {
  IcpEval eval;
  const double cutoff2 = cutoff * cutoff;
  double sum_sq = 0.0;
  for (const Vec3& p : source) {
    const Vec3 s = T.apply(p);
    const auto [idx, d2] = tree.nearest(s);
    if (idx < 0 || d2 > cutoff2) continue;
    const Vec3& n = normals[idx];
    if (n.squaredNorm() < 0.5) continue;
    const double r = n.dot(s - tree.point(idx));
    Vec6 J;
    J.head<3>() = s.cross(n);
    J.tail<3>() = n;
    eval.hessian += J * J.transpose();
    eval.gradient += J * r;
    sum_sq += r * r;
    ++eval.correspondences;
  }
  if (eval.correspondences > 0) {
    eval.fitness = sum_sq / eval.correspondences;
  }
  return eval;
}

}  // namespace

ScanMatchResult scan_match(const PointCloud& source, const PointCloud& target,
                           const Pose& init, const LoopConfig& cfg) {
  if (source.empty() || target.empty()) {
    throw Error(ErrorCode::InsufficientOverlap, "empty cloud");
  }
  const KdTree tree(target);
  const std::vector<Vec3> normals = estimate_normals(tree, target, cfg.normal_knn);

  ScanMatchResult best;
  best.pose = init;
  best.fitness = std::numeric_limits<double>::infinity();

  Pose T = init;
  for (int iter = 0; iter < cfg.icp_max_iterations; ++iter) {
    const IcpEval eval =
        evaluate_icp(source, tree, normals, T, cfg.correspondence_cutoff);
    if (eval.correspondences < std::max(6, cfg.min_correspondences / 4) ||
        eval.fitness > best.fitness) {
      break;  // diverged or stopped improving; keep the best state
    }
    best.pose = T;
    best.fitness = eval.fitness;
    best.correspondences = eval.correspondences;
    best.iterations = iter + 1;

    Mat6 H = eval.hessian + 1e-9 * Mat6::Identity();
    const Vec6 delta = H.ldlt().solve(-eval.gradient);
    if (!delta.allFinite()) break;
    // Left perturbation: T <- (exp(w), tau) * T.
    const Eigen::Quaterniond dq = so3_exp(delta.head<3>());
    T = Pose(dq * T.rotation, dq * T.translation + delta.tail<3>());
    if (delta.norm() < 1e-12) break;
  }

  if (best.correspondences < cfg.min_correspondences) {
    throw Error(ErrorCode::InsufficientOverlap,
                std::to_string(best.correspondences) + " correspondences");
  }
  return best;
}

std::optional<FactorId> try_close_loop(FactorGraph& graph,
                                       const KeyframeClouds& clouds,
                                       VariableId query_id, const Mat6& information,
                                       const LoopConfig& cfg, bool parallel) {
  const auto query_cloud = clouds.find(query_id);
  if (query_cloud == clouds.end()) return std::nullopt;
  const std::vector<VariableId> candidates =
      find_candidates(graph, query_id, cfg);

  const Pose query_pose = graph.keyframe(query_id).pose;
  auto match_one = [&](VariableId match_id) -> std::optional<ScanMatchResult> {
    const auto target_cloud = clouds.find(match_id);
    if (target_cloud == clouds.end()) return std::nullopt;
    const Pose init = pose_between(graph.keyframe(match_id).pose, query_pose);
    try {
      return scan_match(query_cloud->second, target_cloud->second, init, cfg);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InsufficientOverlap) return std::nullopt;
      throw;
    }
  };

  std::vector<std::optional<ScanMatchResult>> results(candidates.size());
  if (parallel && candidates.size() > 1) {
    std::vector<std::future<std::optional<ScanMatchResult>>> futures;
    futures.reserve(candidates.size());
    for (VariableId id : candidates) {
      futures.push_back(
          std::async(std::launch::async, [&match_one, id] { return match_one(id); }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      results[i] = match_one(candidates[i]);
      if (results[i] && results[i]->fitness <= cfg.fitness_accept) break;
    }
  }

  // Accept the first candidate (in search order) that passes the gate, so the
  // outcome does not depend on evaluation order.
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!results[i] || results[i]->fitness > cfg.fitness_accept) continue;
    // scan_match maps query-frame points into the match frame, which is
    // exactly the match->query relative pose the factor measures.
    LoopFactor factor;
    factor.keyframe_a = candidates[i];
    factor.keyframe_b = query_id;
    factor.measurement = results[i]->pose;
    factor.information = information;
    return graph.add_factor(factor);
  }
  return std::nullopt;
}

}  // namespace sgraphs
