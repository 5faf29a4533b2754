#include "sgraphs/geometry.hpp"

#include <cmath>

namespace sgraphs {

Eigen::Quaterniond so3_exp(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(),
                         0.5 * omega.z());
    q.normalize();
    return q;
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle));
}

Vec3 so3_log(const Eigen::Quaterniond& q) {
  Eigen::AngleAxisd aa(q.normalized());
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  // Keep the angle in [0, pi].
  if (angle > M_PI) {
    angle = 2.0 * M_PI - angle;
    axis = -axis;
  }
  return angle * axis;
}

Mat3 so3_right_jacobian_inv(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 W = skew(theta);
  if (angle < 1e-9) {
    return Mat3::Identity() + 0.5 * W + W * W / 12.0;
  }
  const double c =
      1.0 / (angle * angle) - (1.0 + std::cos(angle)) / (2.0 * angle * std::sin(angle));
  return Mat3::Identity() + 0.5 * W + c * W * W;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  Eigen::Quaterniond q = a.rotation * b.rotation;
  q.normalize();
  return {q, a.translation + a.rotation * b.translation};
}

Pose pose_between(const Pose& a, const Pose& b) {
  return pose_compose(a.inverse(), b);
}

Pose pose_retract(const Pose& x, const Vec6& delta) {
  Eigen::Quaterniond q = x.rotation * so3_exp(delta.head<3>());
  q.normalize();
  return {q, x.translation + delta.tail<3>()};
}

Vec6 pose_log(const Pose& x) {
  Vec6 v;
  v.head<3>() = so3_log(x.rotation);
  v.tail<3>() = x.translation;
  return v;
}

PlaneCoeffs::PlaneCoeffs(const Vec3& n, double d_, Frame f)
    : normal(n.normalized()), d(d_), frame(f) {}

PlaneCoeffs plane_canonicalize(const PlaneCoeffs& p) {
  const Vec3 a = p.normal.cwiseAbs();
  int lead = 0;
  if (a[1] > a[lead]) lead = 1;
  if (a[2] > a[lead]) lead = 2;
  PlaneCoeffs out = p;
  if (out.normal[lead] < 0.0) {
    out.normal = -out.normal;
    out.d = -out.d;
  }
  return out;
}

PlaneCoeffs plane_to_map(const Pose& pose, const PlaneCoeffs& local) {
  PlaneCoeffs out;
  out.normal = pose.rotation * local.normal;
  out.d = local.d - out.normal.dot(pose.translation);
  out.frame = Frame::Map;
  return plane_canonicalize(out);
}

PlaneCoeffs plane_to_local(const Pose& pose, const PlaneCoeffs& global) {
  PlaneCoeffs out;
  out.normal = pose.rotation.conjugate() * global.normal;
  out.d = global.d + global.normal.dot(pose.translation);
  out.frame = Frame::Sensor;
  return plane_canonicalize(out);
}

}  // namespace sgraphs
