#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace sgraphs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Exponential map so(3) -> SO(3).
Eigen::Quaterniond so3_exp(const Vec3& omega);

/// Logarithm map SO(3) -> so(3), angle in [0, pi].
Vec3 so3_log(const Eigen::Quaterniond& q);

/// Inverse of the right Jacobian of SO(3) at theta.
Mat3 so3_right_jacobian_inv(const Vec3& theta);

/// Rigid transform in SE(3): rotation as a unit quaternion plus translation.
struct Pose {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Vec3& t)
      : rotation(q.normalized()), translation(t) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) {
    return {Eigen::Quaterniond::Identity(), t};
  }
  static Pose from_yaw(double yaw_rad) {
    return {Eigen::Quaterniond(Eigen::AngleAxisd(yaw_rad, Vec3::UnitZ())),
            Vec3::Zero()};
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Pose inverse() const {
    Eigen::Quaterniond qi = rotation.conjugate();
    return {qi, qi * (-translation)};
  }
};

Pose pose_compose(const Pose& a, const Pose& b);

/// Relative pose a^-1 * b, so that pose_compose(a, result) == b.
Pose pose_between(const Pose& a, const Pose& b);

/// Local SE(3) retraction used by the optimizer: rotation is right-multiplied
/// by exp(omega), translation is additive. delta = (omega, tau).
Pose pose_retract(const Pose& x, const Vec6& delta);

/// (rotation 3-vector, translation 3-vector) of the pose itself.
Vec6 pose_log(const Pose& x);

enum class Frame { Map, Sensor };
enum class Axis { X = 0, Y = 1 };
enum class PlaneCategory { XVertical, YVertical, Horizontal };

/// Infinite plane in Hessian normal form: normal . p + d = 0, |normal| = 1.
struct PlaneCoeffs {
  Vec3 normal{1.0, 0.0, 0.0};
  double d = 0.0;
  Frame frame = Frame::Sensor;

  PlaneCoeffs() = default;
  PlaneCoeffs(const Vec3& n, double d_, Frame f);

  Vec4 vec() const { return Vec4(normal.x(), normal.y(), normal.z(), d); }
  /// Closest point of the plane to the origin (-d * n); sign-invariant.
  Vec3 closest_point() const { return -d * normal; }
  double distance_to(const Vec3& p) const { return std::abs(normal.dot(p) + d); }
};

/// Fix the coefficient sign: the largest-magnitude normal component is made
/// positive, ties broken preferring x over y over z.
PlaneCoeffs plane_canonicalize(const PlaneCoeffs& p);

/// Transform a sensor-frame plane into the map frame given the
/// map-from-sensor pose. Result is canonicalized.
PlaneCoeffs plane_to_map(const Pose& pose, const PlaneCoeffs& local);

/// Inverse of plane_to_map (up to canonical sign).
PlaneCoeffs plane_to_local(const Pose& pose, const PlaneCoeffs& global);

}  // namespace sgraphs
