#pragma once

// Camera-space geometry: points, rotations, rigid point transforms and the
// pinhole projection.
//
// Conventions: x right, y down, z forward along the optical axis. Pixel (row i,
// column j) has its center at (u, v) = (j, i).

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "camctl/error.hpp"

namespace camctl {

using Vec3 = Eigen::Vector3d;
using Pixel2 = Eigen::Vector2d;
using Rotation3 = Eigen::Matrix3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline constexpr double kDefaultZMin = 1e-6;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  bool operator==(const Intrinsics&) const = default;
};

inline void validate(const Intrinsics& k) {
  const bool ok = std::isfinite(k.fx) && std::isfinite(k.fy) && std::isfinite(k.cx) &&
                  std::isfinite(k.cy) && k.fx > 0.0 && k.fy > 0.0 && k.width > 0 &&
                  k.height > 0 && k.cx >= 0.0 && k.cx < k.width && k.cy >= 0.0 &&
                  k.cy < k.height;
  if (!ok) {
    std::ostringstream os;
    os << "invalid intrinsics (fx=" << k.fx << ", fy=" << k.fy << ", cx=" << k.cx
       << ", cy=" << k.cy << ", width=" << k.width << ", height=" << k.height << ")";
    fail(ErrorKind::kInvalidArgument, os.str());
  }
}

/// Point transform (R, t): p -> R p + t. Maps first-frame camera
/// coordinates to frame-lambda camera coordinates.
struct RigidMotion {
  Rotation3 rotation = Rotation3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidMotion identity() { return {}; }
};

inline Vec3 apply(const RigidMotion& m, const Vec3& p) {
  return m.rotation * p + m.translation;
}

/// a after b.
inline RigidMotion compose(const RigidMotion& a, const RigidMotion& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline RigidMotion inverse(const RigidMotion& m) {
  const Rotation3 rt = m.rotation.transpose();
  return {rt, -(rt * m.translation)};
}

inline bool is_rotation(const Rotation3& r, double tol = 1e-9) {
  if (!r.allFinite()) return false;
  const Mat3 gram = r.transpose() * r;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

inline bool is_identity(const RigidMotion& m, double tol = 0.0) {
  return (m.rotation - Rotation3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         m.translation.cwiseAbs().maxCoeff() <= tol;
}

inline Mat3 hat(const Vec3& w) {
  Mat3 k;
  k << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return k;
}

inline Vec3 vee(const Mat3& k) { return {k(2, 1), k(0, 2), k(1, 0)}; }

/// Rodrigues formula. Exact for any angle; series branch near zero.
inline Rotation3 so3_exp(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = hat(axis_angle);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

/// Inverse of so3_exp on rotations with angle < pi.
inline Vec3 so3_log(const Rotation3& r) {
  const double trace = r.trace();
  if (!(trace > -1.0 + 1e-12)) fail(ErrorKind::kInvalidArgument, "log undefined at angle π");

  const Vec3 skew = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  const double s = skew.norm();
  const double c = std::clamp(0.5 * (trace - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (theta < 1e-4) {
    const double t2 = theta * theta;
    return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * skew;
  }
  if (theta < std::numbers::pi - 1e-3) return (theta / s) * skew;

  // Near pi the skew part vanishes; recover the axis from the symmetric part
  // B = (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
  const Mat3 sym = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  Eigen::Index col = 0;
  sym.diagonal().maxCoeff(&col);
  Vec3 axis = sym.col(col) / std::sqrt(std::max(sym(col, col), 1e-300));
  axis.normalize();
  if (axis.dot(skew) < 0.0) axis = -axis;
  return theta * axis;
}

/// Left Jacobian of SO(3): d/d(delta) so3_exp(w + delta) = hat(J_l(w) delta) so3_exp(w).
inline Mat3 so3_left_jacobian(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = hat(w);
  double b;  // (1 - cos) / theta^2
  double c;  // (theta - sin) / theta^3
  if (theta < 1e-4) {
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + b * k + c * k * k;
}

/// Rotation about the optical axis, turning +x toward +y.
inline Rotation3 rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

inline Pixel2 project(const Vec3& p, const Intrinsics& k, double z_min = kDefaultZMin) {
  if (!(p.z() >= z_min)) fail(ErrorKind::kInvalidArgument, "point at or behind camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

inline Vec3 unproject(const Pixel2& px, double depth, const Intrinsics& k) {
  if (!(depth > 0.0)) fail(ErrorKind::kInvalidArgument, "non-positive depth");
  return {(px.x() - k.cx) / k.fx * depth, (px.y() - k.cy) / k.fy * depth, depth};
}

/// Pixel-center coordinate of grid cell (row, col).
inline Pixel2 grid_pixel(int row, int col) {
  return {static_cast<double>(col), static_cast<double>(row)};
}

/// True when a projected pixel lies on the image plane (pixel footprints
/// extend half a pixel around each center).
inline bool in_image(const Pixel2& px, const Intrinsics& k) {
  return px.x() >= -0.5 && px.x() < k.width - 0.5 && px.y() >= -0.5 &&
         px.y() < k.height - 0.5;
}

/// Geodesic distance on SO(3), radians in [0, pi]. Equals
/// arccos((trace(a^T b) - 1) / 2); the atan2 form keeps precision near 0.
inline double geodesic_angle(const Rotation3& a, const Rotation3& b) {
  const Mat3 rel = a.transpose() * b;
  const double c = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
  const double s = 0.5 * vee(rel - rel.transpose()).norm();
  return std::atan2(s, c);
}

}  // namespace camctl
