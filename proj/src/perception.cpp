#include "sgraphs/perception.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <unordered_map>

namespace sgraphs {

PointCloud prefilter(const PointCloud& cloud, const PerceptionConfig& cfg) {
  struct VoxelAccum {
    Vec3 sum{0.0, 0.0, 0.0};
    int count = 0;
  };
  auto key_of = [&](const Vec3& p) {
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() / cfg.voxel));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() / cfg.voxel));
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() / cfg.voxel));
    // 21 bits per axis is plenty for indoor extents.
    return (ix & 0x1fffff) | ((iy & 0x1fffff) << 21) | ((iz & 0x1fffff) << 42);
  };

  std::unordered_map<std::int64_t, int> slot;
  std::vector<VoxelAccum> voxels;  // in first-appearance order
  for (const Vec3& p : cloud) {
    const double r = p.norm();
    if (r < cfg.range_min || r > cfg.range_max) continue;
    const std::int64_t key = key_of(p);
    auto [it, inserted] = slot.try_emplace(key, static_cast<int>(voxels.size()));
    if (inserted) voxels.emplace_back();
    VoxelAccum& acc = voxels[it->second];
    acc.sum += p;
    ++acc.count;
  }

  PointCloud out;
  out.reserve(voxels.size());
  for (const VoxelAccum& acc : voxels) {
    out.push_back(acc.sum / acc.count);
  }
  return out;
}

namespace {

// Centroid + smallest-eigenvector least-squares plane fit.
PlaneCoeffs fit_plane(const PointCloud& cloud, const std::vector<int>& indices,
                      Vec3* centroid_out) {
  Vec3 centroid = Vec3::Zero();
  for (int i : indices) centroid += cloud[i];
  centroid /= static_cast<double>(indices.size());
  Mat3 cov = Mat3::Zero();
  for (int i : indices) {
    const Vec3 q = cloud[i] - centroid;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 n = eig.eigenvectors().col(0);
  if (centroid_out) *centroid_out = centroid;
  return plane_canonicalize(PlaneCoeffs(n, -n.dot(centroid), Frame::Sensor));
}

}  // namespace

std::vector<SegmentedPlane> segment_planes(const PointCloud& cloud,
                                           const PerceptionConfig& cfg,
                                           std::uint64_t seed) {
  std::vector<SegmentedPlane> planes;
  std::vector<int> work(cloud.size());
  std::iota(work.begin(), work.end(), 0);
  std::mt19937_64 rng(seed);

  while (static_cast<int>(planes.size()) < cfg.max_planes &&
         static_cast<int>(work.size()) >= cfg.min_inliers) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(work.size()) - 1);
    int best_count = 0;
    Vec3 best_n;
    double best_d = 0.0;
    for (int it = 0; it < cfg.ransac_iterations; ++it) {
      const int a = work[pick(rng)];
      const int b = work[pick(rng)];
      const int c = work[pick(rng)];
      if (a == b || a == c || b == c) continue;
      const Vec3 n_raw = (cloud[b] - cloud[a]).cross(cloud[c] - cloud[a]);
      const double norm = n_raw.norm();
      if (norm < 1e-9) continue;
      const Vec3 n = n_raw / norm;
      const double d = -n.dot(cloud[a]);
      int count = 0;
      for (int i : work) {
        if (std::abs(n.dot(cloud[i]) + d) <= cfg.ransac_threshold) ++count;
      }
      if (count > best_count) {
        best_count = count;
        best_n = n;
        best_d = d;
      }
    }
    if (best_count < cfg.min_inliers) break;

    // Refine on the candidate's inliers, then rebuild the inlier set against
    // the refined plane so the stored set matches the stored coefficients.
    std::vector<int> inliers;
    for (int i : work) {
      if (std::abs(best_n.dot(cloud[i]) + best_d) <= cfg.ransac_threshold) {
        inliers.push_back(i);
      }
    }
    SegmentedPlane plane;
    plane.coeffs = fit_plane(cloud, inliers, nullptr);
    inliers.clear();
    for (int i : work) {
      if (plane.coeffs.distance_to(cloud[i]) <= cfg.ransac_threshold) {
        inliers.push_back(i);
      }
    }
    if (static_cast<int>(inliers.size()) < cfg.min_inliers) break;
    plane.coeffs = fit_plane(cloud, inliers, &plane.centroid);
    // One more pass with the final coefficients keeps the invariant that
    // every stored inlier is within threshold.
    std::vector<int> final_inliers;
    for (int i : work) {
      if (plane.coeffs.distance_to(cloud[i]) <= cfg.ransac_threshold) {
        final_inliers.push_back(i);
      }
    }
    if (static_cast<int>(final_inliers.size()) < cfg.min_inliers) break;
    plane.inlier_indices = final_inliers;
    plane.inlier_count = static_cast<int>(final_inliers.size());
    Vec3 centroid = Vec3::Zero();
    for (int i : final_inliers) centroid += cloud[i];
    plane.centroid = centroid / plane.inlier_count;
    planes.push_back(std::move(plane));

    std::vector<int> remaining;
    remaining.reserve(work.size() - final_inliers.size());
    std::size_t k = 0;
    for (int i : work) {
      if (k < final_inliers.size() && final_inliers[k] == i) {
        ++k;
      } else {
        remaining.push_back(i);
      }
    }
    work = std::move(remaining);
  }
  return planes;
}

PlaneCategory classify_plane(const PlaneCoeffs& coeffs) {
  const Vec3 a = coeffs.normal.cwiseAbs();
  if (std::max(a.x(), a.y()) >= a.z()) {
    return a.x() >= a.y() ? PlaneCategory::XVertical : PlaneCategory::YVertical;
  }
  return PlaneCategory::Horizontal;
}

double plane_coeff_distance(const PlaneCoeffs& a, const PlaneCoeffs& b) {
  Vec4 vb = b.vec();
  if (a.normal.dot(b.normal) < 0.0) vb = -vb;
  return (a.vec() - vb).norm();
}

MappedPlane* find_mapped_plane(PlaneBook& book, VariableId id) {
  for (MappedPlane& entry : book) {
    if (entry.id == id) return &entry;
  }
  return nullptr;
}

PointCloud mapped_plane_points(const FactorGraph& graph, const MappedPlane& entry) {
  PointCloud out;
  for (const PlaneObservation& obs : entry.observations) {
    const Pose& pose = graph.keyframe(obs.keyframe).pose;
    for (const Vec3& p : obs.points_local) {
      out.push_back(pose.apply(p));
    }
  }
  return out;
}

VariableId associate_and_map_plane(FactorGraph& graph, PlaneBook& book,
                                   VariableId keyframe_id, int keyframe_index,
                                   int floor_id, const SegmentedPlane& observed,
                                   const PointCloud& cloud,
                                   const PerceptionConfig& cfg) {
  if (!graph.has_variable(keyframe_id) || keyframe_id.kind != VarKind::Keyframe) {
    throw Error(ErrorCode::UnknownKeyframe,
                "keyframe #" + std::to_string(keyframe_id.index));
  }
  const Pose& pose = graph.keyframe(keyframe_id).pose;
  const PlaneCoeffs observed_map = plane_to_map(pose, observed.coeffs);
  const PlaneCategory category = classify_plane(observed_map);

  VariableId match;
  double best = cfg.plane_match_tol;
  for (const auto& [id, v] : graph.variables()) {
    if (id.kind != VarKind::Plane) continue;
    const auto& pl = std::get<PlaneVar>(v);
    if (pl.category != category || pl.floor_id != floor_id) continue;
    const double dist = plane_coeff_distance(observed_map, pl.coeffs);
    if (dist < best) {
      best = dist;
      match = id;
    }
  }

  VariableId plane_id = match;
  if (!match.valid()) {
    PlaneVar var;
    var.coeffs = observed_map;
    var.category = category;
    var.floor_id = floor_id;
    plane_id = graph.add_variable(var);
    book.push_back(MappedPlane{plane_id, keyframe_index, {}});
  }

  PosePlaneFactor factor;
  factor.keyframe = keyframe_id;
  factor.plane = plane_id;
  factor.observation = observed.coeffs;
  const double info =
      std::min(cfg.pose_plane_info_cap,
               cfg.pose_plane_info_per_inlier * observed.inlier_count);
  factor.information = info * Mat4::Identity();
  graph.add_factor(factor);

  MappedPlane* entry = find_mapped_plane(book, plane_id);
  entry->last_keyframe_index = keyframe_index;
  PlaneObservation obs;
  obs.keyframe = keyframe_id;
  const std::size_t stride = std::max<std::size_t>(
      1, observed.inlier_indices.size() / cfg.max_points_per_observation);
  for (std::size_t i = 0; i < observed.inlier_indices.size(); i += stride) {
    obs.points_local.push_back(cloud[observed.inlier_indices[i]]);
  }
  entry->observations.push_back(std::move(obs));
  return plane_id;
}

}  // namespace sgraphs
