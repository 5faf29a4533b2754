#include "sgraphs/scene_layers.hpp"

#include <algorithm>
#include <cmath>

namespace sgraphs {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

/// Flip the plane so its normal points toward the reference point.
PlaneCoeffs orient_toward(const PlaneCoeffs& p, const Vec2& reference) {
  const Vec3 ref(reference.x(), reference.y(), 0.0);
  if (p.normal.dot(ref) + p.d < 0.0) {
    PlaneCoeffs out = p;
    out.normal = -out.normal;
    out.d = -out.d;
    return out;
  }
  return p;
}

void check_opposed(const PlaneCoeffs& a, const PlaneCoeffs& b,
                   double max_angle_deg) {
  if (!planes_opposed(a, b, max_angle_deg * kDegToRad)) {
    throw Error(ErrorCode::NotOpposed, "plane pair is not anti-parallel");
  }
}

}  // namespace

std::vector<VariableId> candidate_planes_for_cluster(
    const FactorGraph& graph, const Cluster& cluster,
    const FreeSpaceGraph& fs_graph, const PlaneBook& book,
    int current_keyframe_index, int floor_id, const SceneConfig& cfg) {
  std::vector<VariableId> out;
  if (cluster.vertex_ids.empty()) return out;

  std::vector<Vec2> vertices;
  vertices.reserve(cluster.vertex_ids.size());
  for (int v : cluster.vertex_ids) {
    vertices.push_back(fs_graph.vertices[v].position);
  }
  const double tol2 = cfg.vertex_point_tol * cfg.vertex_point_tol;

  for (const MappedPlane& entry : book) {
    if (!graph.has_variable(entry.id)) continue;
    const PlaneVar& var = graph.plane(entry.id);
    if (!plane_is_vertical(var.category) || var.floor_id != floor_id) continue;
    if (entry.last_keyframe_index <= current_keyframe_index - cfg.keyframe_window) {
      continue;
    }
    const PointCloud points = mapped_plane_points(graph, entry);
    int close = 0;
    for (const Vec3& p : points) {
      const Vec2 p2 = p.head<2>();
      for (const Vec2& v : vertices) {
        if ((p2 - v).squaredNorm() <= tol2) {
          ++close;
          break;
        }
      }
      if (close >= cfg.min_close_points) break;
    }
    if (close >= cfg.min_close_points) out.push_back(entry.id);
  }
  return out;
}

namespace {

struct PairChoice {
  VariableId low, high;
  double separation = -1.0;
};

/// Best facing pair among same-axis candidates: normals oriented toward the
/// cluster centroid must be anti-parallel (which also places the centroid
/// between them), separation within [min_side, max_side] and maximal.
std::optional<PairChoice> best_pair(const FactorGraph& graph,
                                    const std::vector<VariableId>& ids,
                                    Axis axis, const Vec2& centroid,
                                    const SceneConfig& cfg) {
  const int k = static_cast<int>(axis);
  const double cos_max = std::cos(cfg.opposed_max_angle_deg * kDegToRad);
  std::optional<PairChoice> best;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const PlaneCoeffs a = orient_toward(graph.plane(ids[i]).coeffs, centroid);
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const PlaneCoeffs b = orient_toward(graph.plane(ids[j]).coeffs, centroid);
      if (a.normal.dot(b.normal) > -cos_max) continue;
      const double ca = a.closest_point()[k];
      const double cb = b.closest_point()[k];
      const double separation = std::abs(ca - cb);
      if (separation < cfg.min_side || separation > cfg.max_side) continue;
      if (!best || separation > best->separation) {
        PairChoice choice;
        choice.low = ca <= cb ? ids[i] : ids[j];
        choice.high = ca <= cb ? ids[j] : ids[i];
        choice.separation = separation;
        best = choice;
      }
    }
  }
  return best;
}

}  // namespace

Vec2 compute_room_center_finite(const PlaneCoeffs& x_low, const PlaneCoeffs& x_high,
                                const PlaneCoeffs& y_low, const PlaneCoeffs& y_high,
                                double max_angle_deg) {
  check_opposed(x_low, x_high, max_angle_deg);
  check_opposed(y_low, y_high, max_angle_deg);
  return Vec2(0.5 * (x_low.closest_point().x() + x_high.closest_point().x()),
              0.5 * (y_low.closest_point().y() + y_high.closest_point().y()));
}

Vec2 compute_room_center_infinite(const PlaneCoeffs& low, const PlaneCoeffs& high,
                                  Axis axis, const Vec2& cluster_centroid,
                                  double max_angle_deg) {
  check_opposed(low, high, max_angle_deg);
  const int k = static_cast<int>(axis);
  Vec2 center = cluster_centroid;
  center[k] = 0.5 * (low.closest_point()[k] + high.closest_point()[k]);
  return center;
}

std::vector<RoomCandidate> detect_rooms(const FactorGraph& graph,
                                        const std::vector<Cluster>& clusters,
                                        const FreeSpaceGraph& fs_graph,
                                        const PlaneBook& book,
                                        int current_keyframe_index, int floor_id,
                                        const SceneConfig& cfg) {
  std::vector<RoomCandidate> out;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const Cluster& cluster = clusters[c];
    const std::vector<VariableId> candidates = candidate_planes_for_cluster(
        graph, cluster, fs_graph, book, current_keyframe_index, floor_id, cfg);
    std::vector<VariableId> x_planes, y_planes;
    for (VariableId id : candidates) {
      const PlaneCategory cat = graph.plane(id).category;
      if (cat == PlaneCategory::XVertical) x_planes.push_back(id);
      if (cat == PlaneCategory::YVertical) y_planes.push_back(id);
    }
    const auto x_pair =
        best_pair(graph, x_planes, Axis::X, cluster.centroid, cfg);
    const auto y_pair =
        best_pair(graph, y_planes, Axis::Y, cluster.centroid, cfg);

    RoomCandidate room;
    room.cluster_id = static_cast<int>(c);
    room.floor_id = floor_id;
    if (x_pair && y_pair) {
      room.infinite = false;
      room.side_planes = {x_pair->low, x_pair->high, y_pair->low, y_pair->high};
      room.center = compute_room_center_finite(
          graph.plane(x_pair->low).coeffs, graph.plane(x_pair->high).coeffs,
          graph.plane(y_pair->low).coeffs, graph.plane(y_pair->high).coeffs,
          cfg.opposed_max_angle_deg);
    } else if (x_pair || y_pair) {
      const auto& pair = x_pair ? *x_pair : *y_pair;
      room.infinite = true;
      room.axis = x_pair ? Axis::X : Axis::Y;
      room.side_planes = {pair.low, pair.high};
      room.center = compute_room_center_infinite(
          graph.plane(pair.low).coeffs, graph.plane(pair.high).coeffs, room.axis,
          cluster.centroid, cfg.opposed_max_angle_deg);
    } else {
      continue;
    }
    out.push_back(std::move(room));
  }
  return out;
}

namespace {

MappedRoom* find_room(RoomBook& rooms, VariableId id) {
  for (MappedRoom& r : rooms) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

/// Merge `dup` into `survivor`: rewire factors, fold observations, update
/// every room's stored wall assignment.
void merge_planes(FactorGraph& graph, RoomBook& rooms, PlaneBook& planes,
                  VariableId survivor, VariableId dup) {
  graph.replace_plane(dup, survivor);
  MappedPlane* into = find_mapped_plane(planes, survivor);
  MappedPlane* from = find_mapped_plane(planes, dup);
  if (into && from) {
    into->last_keyframe_index =
        std::max(into->last_keyframe_index, from->last_keyframe_index);
    for (PlaneObservation& obs : from->observations) {
      into->observations.push_back(std::move(obs));
    }
  }
  if (from) {
    planes.erase(planes.begin() + (from - planes.data()));
  }
  for (MappedRoom& r : rooms) {
    for (VariableId& side : r.side_planes) {
      if (side == dup) side = survivor;
    }
  }
}

}  // namespace

RoomAssociation associate_room(FactorGraph& graph, RoomBook& rooms,
                               PlaneBook& planes, const RoomCandidate& candidate,
                               const SceneConfig& cfg) {
  RoomAssociation result;

  // Same-kind match first. A finite candidate may also match an infinite
  // room (upgrading it in place), and an infinite candidate may match an
  // already-finite room (treated as a partial re-detection).
  VariableId match;
  bool upgrade = false;
  bool partial = false;
  double best = cfg.room_match_tol;
  for (const auto& [id, v] : graph.variables()) {
    if (id.kind != VarKind::Room) continue;
    const auto& room = std::get<RoomVar>(v);
    if (room.floor_id != candidate.floor_id) continue;
    if (room.infinite == candidate.infinite) {
      if (candidate.infinite && room.axis != candidate.axis) continue;
      const double dist =
          candidate.infinite
              ? std::abs(candidate.center[static_cast<int>(candidate.axis)] -
                         room.position[static_cast<int>(candidate.axis)])
              : (candidate.center - room.position).norm();
      if (dist < best) {
        best = dist;
        match = id;
        upgrade = partial = false;
      }
    } else if (!candidate.infinite && room.infinite) {
      const int k = static_cast<int>(room.axis);
      const double dist = std::abs(candidate.center[k] - room.position[k]);
      if (dist < best) {
        best = dist;
        match = id;
        upgrade = true;
        partial = false;
      }
    } else {  // infinite candidate, finite room
      const int k = static_cast<int>(candidate.axis);
      const double dist = std::abs(candidate.center[k] - room.position[k]);
      if (dist < best) {
        best = dist;
        match = id;
        partial = true;
        upgrade = false;
      }
    }
  }

  if (!match.valid()) {
    RoomVar var;
    var.position = candidate.center;
    var.infinite = candidate.infinite;
    var.axis = candidate.axis;
    var.floor_id = candidate.floor_id;
    const VariableId id = graph.add_variable(var);

    MappedRoom record;
    record.id = id;
    record.side_planes = candidate.side_planes;
    if (candidate.infinite) {
      record.pair_factors.push_back(graph.add_factor(
          RoomPlanePairFactor{id, candidate.side_planes[0],
                              candidate.side_planes[1], candidate.axis,
                              cfg.room_pair_info}));
      const Axis free_axis = candidate.axis == Axis::X ? Axis::Y : Axis::X;
      record.prior_factor = graph.add_factor(RoomPriorFactor{
          id, free_axis, candidate.center[static_cast<int>(free_axis)],
          cfg.room_pair_info * cfg.room_prior_info_scale});
    } else {
      record.pair_factors.push_back(graph.add_factor(
          RoomPlanePairFactor{id, candidate.side_planes[0],
                              candidate.side_planes[1], Axis::X,
                              cfg.room_pair_info}));
      record.pair_factors.push_back(graph.add_factor(
          RoomPlanePairFactor{id, candidate.side_planes[2],
                              candidate.side_planes[3], Axis::Y,
                              cfg.room_pair_info}));
    }
    rooms.push_back(std::move(record));
    result.room = id;
    result.created = true;
    return result;
  }

  MappedRoom* record = find_room(rooms, match);
  result.room = match;

  if (upgrade) {
    RoomVar room = graph.room(match);
    const Axis existing_axis = room.axis;
    const Axis missing_axis = existing_axis == Axis::X ? Axis::Y : Axis::X;
    const int mk = static_cast<int>(missing_axis);
    room.infinite = false;
    room.position[mk] = candidate.center[mk];
    graph.set_variable(match, room);

    // The weak prior anchored the formerly free coordinate; the new pair
    // factor replaces it.
    if (record->prior_factor) {
      graph.remove_factor(*record->prior_factor);
      record->prior_factor.reset();
    }
    const std::size_t off = missing_axis == Axis::X ? 0 : 2;
    record->pair_factors.push_back(graph.add_factor(RoomPlanePairFactor{
        match, candidate.side_planes[off], candidate.side_planes[off + 1],
        missing_axis, cfg.room_pair_info}));

    // Reconcile the shared axis sides below by rewriting the stored layout
    // to the finite ordering.
    std::vector<VariableId> sides(4);
    const std::size_t eoff = existing_axis == Axis::X ? 0 : 2;
    sides[eoff] = record->side_planes[0];
    sides[eoff + 1] = record->side_planes[1];
    sides[off] = candidate.side_planes[off];
    sides[off + 1] = candidate.side_planes[off + 1];
    record->side_planes = sides;
    result.upgraded = true;
  }

  // Candidate-side versus stored-side index pairs. A partial (infinite over
  // finite) match only reconciles the candidate's single axis.
  std::vector<std::pair<std::size_t, std::size_t>> side_map;
  if (partial) {
    const std::size_t off = candidate.axis == Axis::X ? 0 : 2;
    side_map = {{0, off}, {1, off + 1}};
  } else {
    for (std::size_t i = 0; i < candidate.side_planes.size(); ++i) {
      side_map.emplace_back(i, i);
    }
  }
  for (const auto& [ci, si] : side_map) {
    const VariableId incoming = candidate.side_planes[ci];
    const VariableId stored = record->side_planes[si];
    if (incoming == stored || !incoming.valid() || !stored.valid()) continue;
    const VariableId survivor = std::min(incoming, stored);
    const VariableId dup = std::max(incoming, stored);
    merge_planes(graph, rooms, planes, survivor, dup);
    result.merged_planes.push_back(dup);
  }
  return result;
}

FloorEstimate update_floor(FactorGraph& graph, FloorBook& floors, int floor_id,
                           const SceneConfig& cfg) {
  std::vector<double> xs, ys;
  for (const auto& [id, v] : graph.variables()) {
    if (id.kind != VarKind::Plane) continue;
    const auto& plane = std::get<PlaneVar>(v);
    if (plane.floor_id != floor_id) continue;
    if (plane.category == PlaneCategory::XVertical) {
      xs.push_back(plane.coeffs.closest_point().x());
    } else if (plane.category == PlaneCategory::YVertical) {
      ys.push_back(plane.coeffs.closest_point().y());
    }
  }
  if (xs.size() < 2 || ys.size() < 2) {
    throw Error(ErrorCode::InsufficientWalls,
                "floor " + std::to_string(floor_id) + " has " +
                    std::to_string(xs.size()) + " x-walls and " +
                    std::to_string(ys.size()) + " y-walls");
  }
  const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  const Vec2 center(0.5 * (*xmin + *xmax), 0.5 * (*ymin + *ymax));

  FloorRecord* record = nullptr;
  for (FloorRecord& f : floors) {
    if (f.floor_id == floor_id) record = &f;
  }
  if (record == nullptr) {
    throw Error(ErrorCode::UnknownVariable,
                "floor id " + std::to_string(floor_id) + " was never detected");
  }

  bool reanchor = false;
  if (!record->var.valid()) {
    FloorVar var;
    var.position = center;
    var.floor_id = floor_id;
    record->var = graph.add_variable(var);
    record->last_center = center;
  } else if ((center - record->last_center).norm() > cfg.floor_reanchor_dist) {
    graph.floor(record->var).position = center;
    record->last_center = center;
    reanchor = true;
  }

  // One position-position edge per room of this floor.
  for (const auto& [id, v] : graph.variables()) {
    if (id.kind != VarKind::Room) continue;
    const auto& room = std::get<RoomVar>(v);
    if (room.floor_id != floor_id) continue;
    auto it = record->room_edges.find(id);
    if (it == record->room_edges.end()) {
      FloorRoomFactor f;
      f.floor = record->var;
      f.room = id;
      f.measurement = room.position - graph.floor(record->var).position;
      f.information = cfg.floor_room_info * Mat2::Identity();
      record->room_edges.emplace(id, graph.add_factor(f));
    } else if (reanchor) {
      auto& f = std::get<FloorRoomFactor>(graph.factor_mut(it->second));
      f.measurement = room.position - graph.floor(record->var).position;
    }
  }

  return FloorEstimate{floor_id, center, record->ref_z};
}

int detect_floor_change(const Pose& keyframe_pose, FloorBook& floors,
                        const SceneConfig& cfg) {
  const double z = keyframe_pose.translation.z();
  int best_id = -1;
  double best_dz = cfg.floor_height_tol;
  for (const FloorRecord& f : floors) {
    const double dz = std::abs(z - f.ref_z);
    if (dz < best_dz) {
      best_dz = dz;
      best_id = f.floor_id;
    }
  }
  if (best_id >= 0) return best_id;

  int next_id = 0;
  for (const FloorRecord& f : floors) next_id = std::max(next_id, f.floor_id + 1);
  FloorRecord record;
  record.floor_id = next_id;
  record.ref_z = z;
  floors.push_back(std::move(record));
  return next_id;
}

}  // namespace sgraphs
