#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "sgraphs/error.hpp"
#include "sgraphs/geometry.hpp"

namespace sgraphs {

enum class VarKind { Keyframe, Plane, Room, Floor };

const char* var_kind_name(VarKind k);

struct VariableId {
  VarKind kind = VarKind::Keyframe;
  int index = -1;

  bool valid() const { return index >= 0; }
  friend bool operator==(const VariableId&, const VariableId&) = default;
  friend auto operator<=>(const VariableId&, const VariableId&) = default;
};

using FactorId = int;

struct KeyframeVar {
  Pose pose;
  double timestamp = 0.0;
};

struct PlaneVar {
  PlaneCoeffs coeffs;  // map frame
  PlaneCategory category = PlaneCategory::XVertical;
  int floor_id = 0;
};

struct RoomVar {
  Vec2 position{0.0, 0.0};
  bool infinite = false;
  Axis axis = Axis::X;  // constrained axis, meaningful for infinite rooms
  int floor_id = 0;
};

struct FloorVar {
  Vec2 position{0.0, 0.0};
  int floor_id = 0;
};

using Variable = std::variant<KeyframeVar, PlaneVar, RoomVar, FloorVar>;

VarKind variable_kind(const Variable& v);
int variable_local_dim(const Variable& v);
/// Apply a local increment: SE(3) step for keyframes (quaternion
/// renormalized), 4-vector step with normal renormalization for planes,
/// additive 2-DoF for rooms and floors.
Variable variable_retract(const Variable& v, const Eigen::VectorXd& delta);

struct OdometryFactor {
  VariableId keyframe_a, keyframe_b;
  Pose measurement;
  Mat6 information = Mat6::Identity();
};

struct LoopFactor {
  VariableId keyframe_a, keyframe_b;
  Pose measurement;
  Mat6 information = Mat6::Identity();
};

struct PoseAnchorFactor {
  VariableId keyframe;
  Pose prior;
  Mat6 information = Mat6::Identity();
};

struct PosePlaneFactor {
  VariableId keyframe, plane;
  PlaneCoeffs observation;  // sensor frame
  Mat4 information = Mat4::Identity();
};

struct RoomPlanePairFactor {
  VariableId room, plane_a, plane_b;
  Axis axis = Axis::X;
  double information = 1.0;
};

struct RoomPriorFactor {
  VariableId room;
  Axis axis = Axis::X;
  double measurement = 0.0;
  double information = 1.0;
};

struct FloorRoomFactor {
  VariableId floor, room;
  Vec2 measurement{0.0, 0.0};  // room position minus floor position
  Mat2 information = Mat2::Identity();
};

using Factor =
    std::variant<OdometryFactor, LoopFactor, PoseAnchorFactor, PosePlaneFactor,
                 RoomPlanePairFactor, RoomPriorFactor, FloorRoomFactor>;

// Residuals, exposed for tests and for the finite-difference checks.
Vec6 residual_odometry(const Pose& measurement, const Pose& x_a, const Pose& x_b);
Vec4 residual_pose_plane(const PlaneCoeffs& observation, const Pose& x,
                         const PlaneCoeffs& plane_map);
double residual_room_plane_pair(Axis axis, const Vec2& room,
                                const PlaneCoeffs& plane_a,
                                const PlaneCoeffs& plane_b);
double residual_room_prior(Axis axis, const Vec2& room, double measurement);
Vec2 residual_floor_room(const Vec2& measurement, const Vec2& floor,
                         const Vec2& room);
Vec6 residual_anchor(const Pose& prior, const Pose& x);

/// True when the (possibly canonicalized) normals are parallel or
/// anti-parallel within max_angle_rad.
bool planes_opposed(const PlaneCoeffs& a, const PlaneCoeffs& b,
                    double max_angle_rad);

struct OptimizerConfig {
  int max_iterations = 50;
  double initial_lambda = 1e-4;
  double lambda_max = 1e10;
  double relative_decrease_tol = 1e-8;
  double huber_delta = 1.0;
};

struct OptReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
};

/// Residual and per-variable Jacobians of one factor at the current
/// estimates, in the variable order stored in the factor.
struct FactorBlocks {
  Eigen::VectorXd residual;
  std::vector<VariableId> variables;
  std::vector<Eigen::MatrixXd> jacobians;
  Eigen::MatrixXd information;
};

class FactorGraph {
 public:
  VariableId add_variable(const Variable& v);
  FactorId add_factor(const Factor& f);

  bool has_variable(VariableId id) const { return variables_.count(id) > 0; }
  const Variable& variable(VariableId id) const;
  void set_variable(VariableId id, const Variable& v);

  const KeyframeVar& keyframe(VariableId id) const;
  const PlaneVar& plane(VariableId id) const;
  const RoomVar& room(VariableId id) const;
  const FloorVar& floor(VariableId id) const;

  KeyframeVar& keyframe(VariableId id);
  PlaneVar& plane(VariableId id);
  RoomVar& room(VariableId id);
  FloorVar& floor(VariableId id);

  const Factor& factor(FactorId id) const;
  Factor& factor_mut(FactorId id);
  void remove_factor(FactorId id);
  void remove_variable(VariableId id);

  /// Rewire every factor referencing `from` onto `to` and drop `from`.
  /// Both must be plane variables.
  void replace_plane(VariableId from, VariableId to);

  const std::map<VariableId, Variable>& variables() const { return variables_; }
  const std::map<FactorId, Factor>& factors() const { return factors_; }

  std::size_t variable_count(VarKind kind) const;
  std::size_t factor_count() const { return factors_.size(); }

  FactorBlocks evaluate_factor(FactorId id) const;
  Eigen::VectorXd factor_residual(const Factor& f) const;

  /// Robust Levenberg-Marquardt over all variables and factors.
  /// Throws Error(SingularSystem) when keyframes are present without any
  /// anchor factor, or when the damped normal equations cannot be solved.
  OptReport optimize(const OptimizerConfig& config = {});

  double total_cost(const OptimizerConfig& config = {}) const;

  // Counter state, exposed so that import can restore id allocation.
  int next_index(VarKind kind) const;
  void set_next_index(VarKind kind, int value);
  FactorId next_factor_id() const { return next_factor_id_; }
  void set_next_factor_id(FactorId id) { next_factor_id_ = id; }

 private:
  void check_reference(VariableId id, VarKind expected) const;

  std::map<VariableId, Variable> variables_;
  std::map<FactorId, Factor> factors_;
  int next_index_[4] = {0, 0, 0, 0};
  FactorId next_factor_id_ = 0;
};

}  // namespace sgraphs
