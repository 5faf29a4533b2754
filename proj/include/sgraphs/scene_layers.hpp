#pragma once

#include <optional>
#include <vector>

#include "sgraphs/factor_graph.hpp"
#include "sgraphs/freespace.hpp"
#include "sgraphs/perception.hpp"

namespace sgraphs {

struct SceneConfig {
  int keyframe_window = 3;
  int min_close_points = 20;
  double vertex_point_tol = 0.5;
  double min_side = 1.5;
  double max_side = 15.0;
  double opposed_max_angle_deg = 25.0;
  double room_match_tol = 2.0;
  double room_pair_info = 1.0;
  double room_prior_info_scale = 1e-2;  // relative to room_pair_info
  double floor_room_info = 0.1;
  double floor_reanchor_dist = 0.5;
  double floor_height_tol = 1.5;
};

/// A detected room before data association. side_planes is ordered
/// [x_low, x_high, y_low, y_high] for finite rooms and [low, high] along
/// `axis` for infinite ones.
struct RoomCandidate {
  bool infinite = false;
  Vec2 center{0.0, 0.0};
  std::vector<VariableId> side_planes;
  Axis axis = Axis::X;
  int cluster_id = -1;
  int floor_id = 0;
};

/// Mapper-side record of a room variable and its current wall assignment.
struct MappedRoom {
  VariableId id;
  std::vector<VariableId> side_planes;
  std::vector<FactorId> pair_factors;
  std::optional<FactorId> prior_factor;  // infinite rooms only
};

using RoomBook = std::vector<MappedRoom>;

/// Floor segmentor state. `var` stays invalid until enough walls are mapped.
struct FloorRecord {
  int floor_id = 0;
  double ref_z = 0.0;
  VariableId var;
  Vec2 last_center{0.0, 0.0};
  std::map<VariableId, FactorId> room_edges;
};

using FloorBook = std::vector<FloorRecord>;

struct FloorEstimate {
  int floor_id = 0;
  Vec2 center{0.0, 0.0};
  double ref_z = 0.0;
};

/// Vertical planes observed within the trailing keyframe window that have at
/// least cfg.min_close_points inlier points within cfg.vertex_point_tol (2D)
/// of some cluster vertex.
std::vector<VariableId> candidate_planes_for_cluster(
    const FactorGraph& graph, const Cluster& cluster,
    const FreeSpaceGraph& fs_graph, const PlaneBook& book,
    int current_keyframe_index, int floor_id, const SceneConfig& cfg);

/// Room detection over the free-space clusters: a cluster with opposed wall
/// pairs on both axes yields a finite room, a single opposed pair yields an
/// infinite room.
std::vector<RoomCandidate> detect_rooms(const FactorGraph& graph,
                                        const std::vector<Cluster>& clusters,
                                        const FreeSpaceGraph& fs_graph,
                                        const PlaneBook& book,
                                        int current_keyframe_index, int floor_id,
                                        const SceneConfig& cfg);

/// Center of a finite room: per-axis midpoints of the opposed pairs' closest
/// points. Throws NotOpposed when a pair is not anti-parallel within 25 deg.
Vec2 compute_room_center_finite(const PlaneCoeffs& x_low, const PlaneCoeffs& x_high,
                                const PlaneCoeffs& y_low, const PlaneCoeffs& y_high,
                                double max_angle_deg = 25.0);

/// Center of an infinite room: pair midpoint on the constrained axis, cluster
/// centroid on the free axis.
Vec2 compute_room_center_infinite(const PlaneCoeffs& low, const PlaneCoeffs& high,
                                  Axis axis, const Vec2& cluster_centroid,
                                  double max_angle_deg = 25.0);

struct RoomAssociation {
  VariableId room;
  std::vector<VariableId> merged_planes;
  bool created = false;
  bool upgraded = false;
};

/// Match the candidate against existing rooms (l2 of centers, axis-only for
/// infinite rooms). New rooms get their pair/prior factors; re-detections
/// merge duplicated walls into the lower-id plane, rewiring all factors.
/// A finite candidate matching an infinite room upgrades it in place.
RoomAssociation associate_room(FactorGraph& graph, RoomBook& rooms,
                               PlaneBook& planes, const RoomCandidate& candidate,
                               const SceneConfig& cfg);

/// Floor center from the maximally separated wall pairs of this floor;
/// creates or updates the floor variable and its room edges, re-anchoring
/// edge measurements when the center moved more than cfg.floor_reanchor_dist.
/// Throws InsufficientWalls with fewer than two walls on either axis.
FloorEstimate update_floor(FactorGraph& graph, FloorBook& floors, int floor_id,
                           const SceneConfig& cfg);

/// Existing floor id whose reference height is within cfg.floor_height_tol of
/// the keyframe, or a freshly allocated one.
int detect_floor_change(const Pose& keyframe_pose, FloorBook& floors,
                        const SceneConfig& cfg);

}  // namespace sgraphs
