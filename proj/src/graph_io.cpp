#include "sgraphs/graph_io.hpp"

#include <nlohmann/json.hpp>

namespace sgraphs {

namespace {

using nlohmann::json;

json pose_to_json(const Pose& p) {
  return json{{"q",
               {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}},
              {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

Pose pose_from_json(const json& j) {
  const auto& q = j.at("q");
  const auto& t = j.at("t");
  Pose p;
  p.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                  q[2].get<double>(), q[3].get<double>());
  p.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  return p;
}

json coeffs_to_json(const PlaneCoeffs& c) {
  return json{{"n", {c.normal.x(), c.normal.y(), c.normal.z()}},
              {"d", c.d},
              {"frame", c.frame == Frame::Map ? "map" : "sensor"}};
}

PlaneCoeffs coeffs_from_json(const json& j) {
  PlaneCoeffs c;
  const auto& n = j.at("n");
  c.normal = Vec3(n[0].get<double>(), n[1].get<double>(), n[2].get<double>());
  c.d = j.at("d").get<double>();
  c.frame = j.at("frame").get<std::string>() == "map" ? Frame::Map : Frame::Sensor;
  return c;
}

template <typename M>
json matrix_to_json(const M& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

template <typename M>
M matrix_from_json(const json& j) {
  M m;
  int k = 0;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = j[k++].get<double>();
  }
  return m;
}

const char* category_name(PlaneCategory c) {
  switch (c) {
    case PlaneCategory::XVertical: return "x_vertical";
    case PlaneCategory::YVertical: return "y_vertical";
    case PlaneCategory::Horizontal: return "horizontal";
  }
  return "?";
}

PlaneCategory category_from(const std::string& s) {
  if (s == "x_vertical") return PlaneCategory::XVertical;
  if (s == "y_vertical") return PlaneCategory::YVertical;
  return PlaneCategory::Horizontal;
}

const char* kind_name(VarKind k) { return var_kind_name(k); }

VarKind kind_from(const std::string& s) {
  if (s == "keyframe") return VarKind::Keyframe;
  if (s == "plane") return VarKind::Plane;
  if (s == "room") return VarKind::Room;
  return VarKind::Floor;
}

json variable_to_json(VariableId id, const Variable& v) {
  json out{{"kind", kind_name(id.kind)}, {"index", id.index}};
  if (const auto* kf = std::get_if<KeyframeVar>(&v)) {
    out["pose"] = pose_to_json(kf->pose);
    out["timestamp"] = kf->timestamp;
  } else if (const auto* pl = std::get_if<PlaneVar>(&v)) {
    out["coeffs"] = coeffs_to_json(pl->coeffs);
    out["category"] = category_name(pl->category);
    out["floor"] = pl->floor_id;
  } else if (const auto* rm = std::get_if<RoomVar>(&v)) {
    out["position"] = {rm->position.x(), rm->position.y()};
    out["infinite"] = rm->infinite;
    out["axis"] = rm->axis == Axis::X ? "x" : "y";
    out["floor"] = rm->floor_id;
  } else {
    const auto& fl = std::get<FloorVar>(v);
    out["position"] = {fl.position.x(), fl.position.y()};
    out["floor"] = fl.floor_id;
  }
  return out;
}

json factor_to_json(FactorId id, const Factor& f) {
  json out{{"id", id}};
  std::visit(
      [&](const auto& ff) {
        using T = std::decay_t<decltype(ff)>;
        if constexpr (std::is_same_v<T, OdometryFactor>) {
          out["type"] = "odometry";
          out["keyframes"] = {ff.keyframe_a.index, ff.keyframe_b.index};
          out["measurement"] = pose_to_json(ff.measurement);
          out["information"] = matrix_to_json(ff.information);
        } else if constexpr (std::is_same_v<T, LoopFactor>) {
          out["type"] = "loop";
          out["keyframes"] = {ff.keyframe_a.index, ff.keyframe_b.index};
          out["measurement"] = pose_to_json(ff.measurement);
          out["information"] = matrix_to_json(ff.information);
        } else if constexpr (std::is_same_v<T, PoseAnchorFactor>) {
          out["type"] = "anchor";
          out["keyframe"] = ff.keyframe.index;
          out["prior"] = pose_to_json(ff.prior);
          out["information"] = matrix_to_json(ff.information);
        } else if constexpr (std::is_same_v<T, PosePlaneFactor>) {
          out["type"] = "pose_plane";
          out["keyframe"] = ff.keyframe.index;
          out["plane"] = ff.plane.index;
          out["observation"] = coeffs_to_json(ff.observation);
          out["information"] = matrix_to_json(ff.information);
        } else if constexpr (std::is_same_v<T, RoomPlanePairFactor>) {
          out["type"] = "room_plane_pair";
          out["room"] = ff.room.index;
          out["planes"] = {ff.plane_a.index, ff.plane_b.index};
          out["axis"] = ff.axis == Axis::X ? "x" : "y";
          out["information"] = ff.information;
        } else if constexpr (std::is_same_v<T, RoomPriorFactor>) {
          out["type"] = "room_prior";
          out["room"] = ff.room.index;
          out["axis"] = ff.axis == Axis::X ? "x" : "y";
          out["measurement"] = ff.measurement;
          out["information"] = ff.information;
        } else {
          out["type"] = "floor_room";
          out["floor"] = ff.floor.index;
          out["room"] = ff.room.index;
          out["measurement"] = {ff.measurement.x(), ff.measurement.y()};
          out["information"] = matrix_to_json(ff.information);
        }
      },
      f);
  return out;
}

Factor factor_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  auto kf_id = [](int i) { return VariableId{VarKind::Keyframe, i}; };
  auto plane_id = [](int i) { return VariableId{VarKind::Plane, i}; };
  auto room_id = [](int i) { return VariableId{VarKind::Room, i}; };
  auto axis_from = [&](const json& a) {
    return a.get<std::string>() == "x" ? Axis::X : Axis::Y;
  };
  if (type == "odometry" || type == "loop") {
    const auto& ks = j.at("keyframes");
    const Pose m = pose_from_json(j.at("measurement"));
    const Mat6 info = matrix_from_json<Mat6>(j.at("information"));
    if (type == "odometry") {
      return OdometryFactor{kf_id(ks[0]), kf_id(ks[1]), m, info};
    }
    return LoopFactor{kf_id(ks[0]), kf_id(ks[1]), m, info};
  }
  if (type == "anchor") {
    return PoseAnchorFactor{kf_id(j.at("keyframe")), pose_from_json(j.at("prior")),
                            matrix_from_json<Mat6>(j.at("information"))};
  }
  if (type == "pose_plane") {
    return PosePlaneFactor{kf_id(j.at("keyframe")), plane_id(j.at("plane")),
                           coeffs_from_json(j.at("observation")),
                           matrix_from_json<Mat4>(j.at("information"))};
  }
  if (type == "room_plane_pair") {
    const auto& ps = j.at("planes");
    return RoomPlanePairFactor{room_id(j.at("room")), plane_id(ps[0]),
                               plane_id(ps[1]), axis_from(j.at("axis")),
                               j.at("information").get<double>()};
  }
  if (type == "room_prior") {
    return RoomPriorFactor{room_id(j.at("room")), axis_from(j.at("axis")),
                           j.at("measurement").get<double>(),
                           j.at("information").get<double>()};
  }
  if (type == "floor_room") {
    const auto& m = j.at("measurement");
    return FloorRoomFactor{VariableId{VarKind::Floor, j.at("floor")},
                           room_id(j.at("room")),
                           Vec2(m[0].get<double>(), m[1].get<double>()),
                           matrix_from_json<Mat2>(j.at("information"))};
  }
  throw Error(ErrorCode::IoError, "unknown factor type '" + type + "'");
}

Variable variable_from_json(const json& j, VarKind kind) {
  switch (kind) {
    case VarKind::Keyframe: {
      KeyframeVar kf;
      kf.pose = pose_from_json(j.at("pose"));
      kf.timestamp = j.at("timestamp").get<double>();
      return kf;
    }
    case VarKind::Plane: {
      PlaneVar pl;
      pl.coeffs = coeffs_from_json(j.at("coeffs"));
      pl.category = category_from(j.at("category").get<std::string>());
      pl.floor_id = j.at("floor").get<int>();
      return pl;
    }
    case VarKind::Room: {
      RoomVar rm;
      const auto& p = j.at("position");
      rm.position = Vec2(p[0].get<double>(), p[1].get<double>());
      rm.infinite = j.at("infinite").get<bool>();
      rm.axis = j.at("axis").get<std::string>() == "x" ? Axis::X : Axis::Y;
      rm.floor_id = j.at("floor").get<int>();
      return rm;
    }
    default: {
      FloorVar fl;
      const auto& p = j.at("position");
      fl.position = Vec2(p[0].get<double>(), p[1].get<double>());
      fl.floor_id = j.at("floor").get<int>();
      return fl;
    }
  }
}

}  // namespace

nlohmann::json graph_to_json(const FactorGraph& graph) {
  json doc;
  doc["variables"] = json::array();
  for (const auto& [id, v] : graph.variables()) {
    doc["variables"].push_back(variable_to_json(id, v));
  }
  doc["factors"] = json::array();
  for (const auto& [id, f] : graph.factors()) {
    doc["factors"].push_back(factor_to_json(id, f));
  }
  doc["next"] = {{"keyframe", graph.next_index(VarKind::Keyframe)},
                 {"plane", graph.next_index(VarKind::Plane)},
                 {"room", graph.next_index(VarKind::Room)},
                 {"floor", graph.next_index(VarKind::Floor)},
                 {"factor", graph.next_factor_id()}};
  return doc;
}

FactorGraph graph_from_json(const nlohmann::json& doc) {
  FactorGraph g;
  // Rebuild ids exactly as exported: insert variables in document order and
  // restore the id counters afterwards.
  std::map<VariableId, Variable> pending;
  for (const auto& jv : doc.at("variables")) {
    const VarKind kind = kind_from(jv.at("kind").get<std::string>());
    const int index = jv.at("index").get<int>();
    pending.emplace(VariableId{kind, index}, variable_from_json(jv, kind));
  }
  // add_variable assigns sequential indices per kind; exported graphs may
  // have gaps after merges. Insert in index order per kind and skip gaps.
  for (const auto& [id, v] : pending) {
    g.set_next_index(id.kind, id.index);
    const VariableId assigned = g.add_variable(v);
    (void)assigned;
  }
  for (const auto& jf : doc.at("factors")) {
    g.set_next_factor_id(jf.at("id").get<int>());
    g.add_factor(factor_from_json(jf));
  }
  const auto& next = doc.at("next");
  g.set_next_index(VarKind::Keyframe, next.at("keyframe").get<int>());
  g.set_next_index(VarKind::Plane, next.at("plane").get<int>());
  g.set_next_index(VarKind::Room, next.at("room").get<int>());
  g.set_next_index(VarKind::Floor, next.at("floor").get<int>());
  g.set_next_factor_id(next.at("factor").get<int>());
  return g;
}

std::string graph_to_json_string(const FactorGraph& graph) {
  return graph_to_json(graph).dump(2) + "\n";
}

FactorGraph graph_from_json_string(const std::string& text) {
  return graph_from_json(nlohmann::json::parse(text));
}

}  // namespace sgraphs
