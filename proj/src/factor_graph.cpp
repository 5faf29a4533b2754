#include "sgraphs/factor_graph.hpp"

#include <cmath>

namespace sgraphs {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::NotOpposed: return "NotOpposed";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InsufficientWalls: return "InsufficientWalls";
    case ErrorCode::UnknownKeyframe: return "UnknownKeyframe";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::PoseInWall: return "PoseInWall";
    case ErrorCode::WaypointInWall: return "WaypointInWall";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadDataset: return "BadDataset";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

const char* var_kind_name(VarKind k) {
  switch (k) {
    case VarKind::Keyframe: return "keyframe";
    case VarKind::Plane: return "plane";
    case VarKind::Room: return "room";
    case VarKind::Floor: return "floor";
  }
  return "?";
}

VarKind variable_kind(const Variable& v) {
  if (std::holds_alternative<KeyframeVar>(v)) return VarKind::Keyframe;
  if (std::holds_alternative<PlaneVar>(v)) return VarKind::Plane;
  if (std::holds_alternative<RoomVar>(v)) return VarKind::Room;
  return VarKind::Floor;
}

int variable_local_dim(const Variable& v) {
  switch (variable_kind(v)) {
    case VarKind::Keyframe: return 6;
    case VarKind::Plane: return 4;
    default: return 2;
  }
}

Variable variable_retract(const Variable& v, const Eigen::VectorXd& delta) {
  if (const auto* kf = std::get_if<KeyframeVar>(&v)) {
    KeyframeVar out = *kf;
    out.pose = pose_retract(kf->pose, Vec6(delta));
    return out;
  }
  if (const auto* pl = std::get_if<PlaneVar>(&v)) {
    PlaneVar out = *pl;
    out.coeffs.normal = (pl->coeffs.normal + delta.head<3>()).normalized();
    out.coeffs.d = pl->coeffs.d + delta(3);
    return out;
  }
  if (const auto* rm = std::get_if<RoomVar>(&v)) {
    RoomVar out = *rm;
    out.position += delta.head<2>();
    return out;
  }
  FloorVar out = std::get<FloorVar>(v);
  out.position += delta.head<2>();
  return out;
}

Vec6 residual_odometry(const Pose& measurement, const Pose& x_a, const Pose& x_b) {
  const Pose error = pose_compose(measurement.inverse(), pose_between(x_a, x_b));
  Vec6 r;
  r.head<3>() = so3_log(error.rotation);
  r.tail<3>() = error.translation;
  return r;
}

Vec4 residual_pose_plane(const PlaneCoeffs& observation, const Pose& x,
                         const PlaneCoeffs& plane_map) {
  Vec3 n_local = x.rotation.conjugate() * plane_map.normal;
  double d_local = plane_map.d + plane_map.normal.dot(x.translation);
  if (n_local.dot(observation.normal) < 0.0) {
    n_local = -n_local;
    d_local = -d_local;
  }
  Vec4 r;
  r.head<3>() = n_local - observation.normal;
  r(3) = d_local - observation.d;
  return r;
}

double residual_room_plane_pair(Axis axis, const Vec2& room,
                                const PlaneCoeffs& plane_a,
                                const PlaneCoeffs& plane_b) {
  const int k = static_cast<int>(axis);
  const double mid =
      0.5 * (plane_a.closest_point()[k] + plane_b.closest_point()[k]);
  return room[k] - mid;
}

double residual_room_prior(Axis axis, const Vec2& room, double measurement) {
  return room[static_cast<int>(axis)] - measurement;
}

Vec2 residual_floor_room(const Vec2& measurement, const Vec2& floor,
                         const Vec2& room) {
  return (room - floor) - measurement;
}

Vec6 residual_anchor(const Pose& prior, const Pose& x) {
  return residual_odometry(prior, Pose::identity(), x);
}

bool planes_opposed(const PlaneCoeffs& a, const PlaneCoeffs& b,
                    double max_angle_rad) {
  const double c = std::abs(a.normal.dot(b.normal));
  return c >= std::cos(max_angle_rad);
}

VariableId FactorGraph::add_variable(const Variable& v) {
  const VarKind kind = variable_kind(v);
  VariableId id{kind, next_index_[static_cast<int>(kind)]++};
  variables_.emplace(id, v);
  return id;
}

void FactorGraph::check_reference(VariableId id, VarKind expected) const {
  if (id.kind != expected) {
    throw Error(ErrorCode::KindMismatch,
                std::string("expected a ") + var_kind_name(expected) +
                    " but got a " + var_kind_name(id.kind));
  }
  if (variables_.find(id) == variables_.end()) {
    throw Error(ErrorCode::UnknownVariable,
                std::string(var_kind_name(id.kind)) + " #" +
                    std::to_string(id.index) + " is not in the graph");
  }
}

FactorId FactorGraph::add_factor(const Factor& f) {
  std::visit(
      [&](const auto& ff) {
        using T = std::decay_t<decltype(ff)>;
        if constexpr (std::is_same_v<T, OdometryFactor> ||
                      std::is_same_v<T, LoopFactor>) {
          check_reference(ff.keyframe_a, VarKind::Keyframe);
          check_reference(ff.keyframe_b, VarKind::Keyframe);
        } else if constexpr (std::is_same_v<T, PoseAnchorFactor>) {
          check_reference(ff.keyframe, VarKind::Keyframe);
        } else if constexpr (std::is_same_v<T, PosePlaneFactor>) {
          check_reference(ff.keyframe, VarKind::Keyframe);
          check_reference(ff.plane, VarKind::Plane);
        } else if constexpr (std::is_same_v<T, RoomPlanePairFactor>) {
          check_reference(ff.room, VarKind::Room);
          check_reference(ff.plane_a, VarKind::Plane);
          check_reference(ff.plane_b, VarKind::Plane);
        } else if constexpr (std::is_same_v<T, RoomPriorFactor>) {
          check_reference(ff.room, VarKind::Room);
        } else if constexpr (std::is_same_v<T, FloorRoomFactor>) {
          check_reference(ff.floor, VarKind::Floor);
          check_reference(ff.room, VarKind::Room);
        }
      },
      f);
  const FactorId id = next_factor_id_++;
  factors_.emplace(id, f);
  return id;
}

const Variable& FactorGraph::variable(VariableId id) const {
  auto it = variables_.find(id);
  if (it == variables_.end()) {
    throw Error(ErrorCode::UnknownVariable,
                std::string(var_kind_name(id.kind)) + " #" +
                    std::to_string(id.index));
  }
  return it->second;
}

void FactorGraph::set_variable(VariableId id, const Variable& v) {
  if (variable_kind(v) != id.kind) {
    throw Error(ErrorCode::KindMismatch, "set_variable kind");
  }
  auto it = variables_.find(id);
  if (it == variables_.end()) {
    throw Error(ErrorCode::UnknownVariable, "set_variable");
  }
  it->second = v;
}

const KeyframeVar& FactorGraph::keyframe(VariableId id) const {
  return std::get<KeyframeVar>(variable(id));
}
const PlaneVar& FactorGraph::plane(VariableId id) const {
  return std::get<PlaneVar>(variable(id));
}
const RoomVar& FactorGraph::room(VariableId id) const {
  return std::get<RoomVar>(variable(id));
}
const FloorVar& FactorGraph::floor(VariableId id) const {
  return std::get<FloorVar>(variable(id));
}

KeyframeVar& FactorGraph::keyframe(VariableId id) {
  return std::get<KeyframeVar>(const_cast<Variable&>(variable(id)));
}
PlaneVar& FactorGraph::plane(VariableId id) {
  return std::get<PlaneVar>(const_cast<Variable&>(variable(id)));
}
RoomVar& FactorGraph::room(VariableId id) {
  return std::get<RoomVar>(const_cast<Variable&>(variable(id)));
}
FloorVar& FactorGraph::floor(VariableId id) {
  return std::get<FloorVar>(const_cast<Variable&>(variable(id)));
}

const Factor& FactorGraph::factor(FactorId id) const {
  auto it = factors_.find(id);
  if (it == factors_.end()) {
    throw Error(ErrorCode::UnknownVariable, "factor #" + std::to_string(id));
  }
  return it->second;
}

Factor& FactorGraph::factor_mut(FactorId id) {
  return const_cast<Factor&>(factor(id));
}

void FactorGraph::remove_factor(FactorId id) { factors_.erase(id); }

void FactorGraph::remove_variable(VariableId id) { variables_.erase(id); }

void FactorGraph::replace_plane(VariableId from, VariableId to) {
  check_reference(from, VarKind::Plane);
  check_reference(to, VarKind::Plane);
  for (auto& [fid, f] : factors_) {
    std::visit(
        [&](auto& ff) {
          using T = std::decay_t<decltype(ff)>;
          if constexpr (std::is_same_v<T, PosePlaneFactor>) {
            if (ff.plane == from) ff.plane = to;
          } else if constexpr (std::is_same_v<T, RoomPlanePairFactor>) {
            if (ff.plane_a == from) ff.plane_a = to;
            if (ff.plane_b == from) ff.plane_b = to;
          }
        },
        f);
  }
  variables_.erase(from);
}

std::size_t FactorGraph::variable_count(VarKind kind) const {
  std::size_t n = 0;
  for (const auto& [id, v] : variables_) {
    if (id.kind == kind) ++n;
  }
  return n;
}

int FactorGraph::next_index(VarKind kind) const {
  return next_index_[static_cast<int>(kind)];
}

void FactorGraph::set_next_index(VarKind kind, int value) {
  next_index_[static_cast<int>(kind)] = value;
}

Eigen::VectorXd FactorGraph::factor_residual(const Factor& f) const {
  return std::visit(
      [&](const auto& ff) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(ff)>;
        if constexpr (std::is_same_v<T, OdometryFactor> ||
                      std::is_same_v<T, LoopFactor>) {
          return residual_odometry(ff.measurement, keyframe(ff.keyframe_a).pose,
                                   keyframe(ff.keyframe_b).pose);
        } else if constexpr (std::is_same_v<T, PoseAnchorFactor>) {
          return residual_anchor(ff.prior, keyframe(ff.keyframe).pose);
        } else if constexpr (std::is_same_v<T, PosePlaneFactor>) {
          return residual_pose_plane(ff.observation, keyframe(ff.keyframe).pose,
                                     plane(ff.plane).coeffs);
        } else if constexpr (std::is_same_v<T, RoomPlanePairFactor>) {
          Eigen::VectorXd r(1);
          r(0) = residual_room_plane_pair(ff.axis, room(ff.room).position,
                                          plane(ff.plane_a).coeffs,
                                          plane(ff.plane_b).coeffs);
          return r;
        } else if constexpr (std::is_same_v<T, RoomPriorFactor>) {
          Eigen::VectorXd r(1);
          r(0) = residual_room_prior(ff.axis, room(ff.room).position,
                                     ff.measurement);
          return r;
        } else {
          return residual_floor_room(ff.measurement, floor(ff.floor).position,
                                     room(ff.room).position);
        }
      },
      f);
}

namespace {

// d(normalize(n + delta))/d(delta) at delta = 0, for unit n.
Mat3 normal_projector(const Vec3& n) { return Mat3::Identity() - n * n.transpose(); }

void blocks_odometry(const Pose& measurement, const Pose& x_a, const Pose& x_b,
                     FactorBlocks& out) {
  const Mat3 R_m = measurement.rotation.toRotationMatrix();
  const Mat3 R_a = x_a.rotation.toRotationMatrix();
  const Mat3 R_b = x_b.rotation.toRotationMatrix();
  const Vec3 v = R_a.transpose() * (x_b.translation - x_a.translation);

  out.residual = residual_odometry(measurement, x_a, x_b);
  const Mat3 jr_inv = so3_right_jacobian_inv(out.residual.head<3>());
  const Mat3 C = R_a.transpose() * R_b;

  Eigen::MatrixXd J_a = Eigen::MatrixXd::Zero(6, 6);
  J_a.block<3, 3>(0, 0) = -jr_inv * C.transpose();
  J_a.block<3, 3>(3, 0) = R_m.transpose() * skew(v);
  J_a.block<3, 3>(3, 3) = -R_m.transpose() * R_a.transpose();

  Eigen::MatrixXd J_b = Eigen::MatrixXd::Zero(6, 6);
  J_b.block<3, 3>(0, 0) = jr_inv;
  J_b.block<3, 3>(3, 3) = R_m.transpose() * R_a.transpose();

  out.jacobians.push_back(std::move(J_a));
  out.jacobians.push_back(std::move(J_b));
}

}  // namespace

FactorBlocks FactorGraph::evaluate_factor(FactorId id) const {
  const Factor& f = factor(id);
  FactorBlocks out;
  std::visit(
      [&](const auto& ff) {
        using T = std::decay_t<decltype(ff)>;
        if constexpr (std::is_same_v<T, OdometryFactor> ||
                      std::is_same_v<T, LoopFactor>) {
          out.variables = {ff.keyframe_a, ff.keyframe_b};
          blocks_odometry(ff.measurement, keyframe(ff.keyframe_a).pose,
                          keyframe(ff.keyframe_b).pose, out);
          out.information = ff.information;
        } else if constexpr (std::is_same_v<T, PoseAnchorFactor>) {
          out.variables = {ff.keyframe};
          const Pose& x = keyframe(ff.keyframe).pose;
          out.residual = residual_anchor(ff.prior, x);
          const Mat3 R_p = ff.prior.rotation.toRotationMatrix();
          Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, 6);
          J.block<3, 3>(0, 0) = so3_right_jacobian_inv(out.residual.head<3>());
          J.block<3, 3>(3, 3) = R_p.transpose();
          out.jacobians.push_back(std::move(J));
          out.information = ff.information;
        } else if constexpr (std::is_same_v<T, PosePlaneFactor>) {
          out.variables = {ff.keyframe, ff.plane};
          const Pose& x = keyframe(ff.keyframe).pose;
          const PlaneCoeffs& pl = plane(ff.plane).coeffs;
          const Vec3 n_local = x.rotation.conjugate() * pl.normal;
          const double s = n_local.dot(ff.observation.normal) < 0.0 ? -1.0 : 1.0;
          out.residual = residual_pose_plane(ff.observation, x, pl);

          const Mat3 Rt = x.rotation.toRotationMatrix().transpose();
          Eigen::MatrixXd J_x = Eigen::MatrixXd::Zero(4, 6);
          J_x.block<3, 3>(0, 0) = s * skew(Rt * pl.normal);
          J_x.block<1, 3>(3, 3) = s * pl.normal.transpose();

          const Mat3 P = normal_projector(pl.normal);
          Eigen::MatrixXd J_p = Eigen::MatrixXd::Zero(4, 4);
          J_p.block<3, 3>(0, 0) = s * Rt * P;
          J_p.block<1, 3>(3, 0) = s * x.translation.transpose() * P;
          J_p(3, 3) = s;

          out.jacobians.push_back(std::move(J_x));
          out.jacobians.push_back(std::move(J_p));
          out.information = ff.information;
        } else if constexpr (std::is_same_v<T, RoomPlanePairFactor>) {
          out.variables = {ff.room, ff.plane_a, ff.plane_b};
          const PlaneCoeffs& pa = plane(ff.plane_a).coeffs;
          const PlaneCoeffs& pb = plane(ff.plane_b).coeffs;
          const int k = static_cast<int>(ff.axis);
          out.residual.resize(1);
          out.residual(0) = residual_room_plane_pair(ff.axis, room(ff.room).position, pa, pb);

          Eigen::MatrixXd J_room = Eigen::MatrixXd::Zero(1, 2);
          J_room(0, k) = 1.0;
          auto plane_jac = [&](const PlaneCoeffs& p) {
            Eigen::MatrixXd J = Eigen::MatrixXd::Zero(1, 4);
            J.block<1, 3>(0, 0) =
                0.5 * p.d * normal_projector(p.normal).row(k);
            J(0, 3) = 0.5 * p.normal[k];
            return J;
          };
          out.jacobians.push_back(std::move(J_room));
          out.jacobians.push_back(plane_jac(pa));
          out.jacobians.push_back(plane_jac(pb));
          out.information = Eigen::MatrixXd::Constant(1, 1, ff.information);
        } else if constexpr (std::is_same_v<T, RoomPriorFactor>) {
          out.variables = {ff.room};
          const int k = static_cast<int>(ff.axis);
          out.residual.resize(1);
          out.residual(0) =
              residual_room_prior(ff.axis, room(ff.room).position, ff.measurement);
          Eigen::MatrixXd J = Eigen::MatrixXd::Zero(1, 2);
          J(0, k) = 1.0;
          out.jacobians.push_back(std::move(J));
          out.information = Eigen::MatrixXd::Constant(1, 1, ff.information);
        } else {
          out.variables = {ff.floor, ff.room};
          out.residual = residual_floor_room(ff.measurement, floor(ff.floor).position,
                                             room(ff.room).position);
          out.jacobians.push_back(-Eigen::MatrixXd::Identity(2, 2));
          out.jacobians.push_back(Eigen::MatrixXd::Identity(2, 2));
          out.information = ff.information;
        }
      },
      f);
  return out;
}

}  // namespace sgraphs
