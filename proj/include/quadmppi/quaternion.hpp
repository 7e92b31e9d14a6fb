#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace quadmppi {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Hamilton quaternion, scalar first: (w, x, y, z).
using Quat = Eigen::Vector4d;

inline constexpr double kUnitQuatTolerance = 1e-6;

inline Quat quat_identity() { return Quat(1.0, 0.0, 0.0, 0.0); }

inline Quat quat_conjugate(const Quat& q) { return Quat(q(0), -q(1), -q(2), -q(3)); }

/// Hamilton product a ⊙ b. Unit norm is not required.
inline Quat quat_multiply(const Quat& a, const Quat& b) {
  return Quat(a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
              a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
              a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
              a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0));
}

/// Four-dimensional inner product, used by the orientation distances.
inline double quat_inner(const Quat& a, const Quat& b) { return a.dot(b); }

inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 n = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return Quat(std::cos(0.5 * angle), s * n.x(), s * n.y(), s * n.z());
}

inline Quat quat_from_yaw(double yaw) {
  return Quat(std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw));
}

/// Rotation matrix of a unit quaternion, no norm check. Every entry is a
/// product of two components, so R(q) == R(-q) bit for bit.
inline Mat3 rotation_matrix_unchecked(const Quat& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

/// Throws std::domain_error when |‖q‖ - 1| exceeds kUnitQuatTolerance.
inline Mat3 quat_to_rotation_matrix(const Quat& q) {
  if (!q.allFinite() || std::abs(q.norm() - 1.0) > kUnitQuatTolerance) {
    throw std::domain_error("quat_to_rotation_matrix: quaternion is not unit norm");
  }
  return rotation_matrix_unchecked(q);
}

/// Third column of R(q), i.e. the body z axis in world coordinates.
inline Vec3 body_z_axis(const Quat& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  return Vec3(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y));
}

}  // namespace quadmppi
