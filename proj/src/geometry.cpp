#include "vokit/geometry.hpp"

#include <cmath>
#include <string>

#include "vokit/error.hpp"

namespace vokit {

double Flow2::norm() const { return std::hypot(u, v); }

Mat3 CameraIntrinsics::K() const {
  Mat3 k;
  k << f * s_x, f * s_theta, o_x,
       0.0, f * s_y, o_y,
       0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::K_inverse() const {
  validate();
  const double fx = f * s_x;
  const double fy = f * s_y;
  const double fs = f * s_theta;
  Mat3 ki;
  ki << 1.0 / fx, -fs / (fx * fy), (fs * o_y - fy * o_x) / (fx * fy),
        0.0, 1.0 / fy, -o_y / fy,
        0.0, 0.0, 1.0;
  return ki;
}

void CameraIntrinsics::validate() const {
  if (!(f * s_x > 0.0) || !(f * s_y > 0.0)) {
    fail(ErrorCode::InvalidArgument, "calibration matrix is not invertible");
  }
}

void Plane::validate() const {
  if (!(d > 0.0)) fail(ErrorCode::DegeneratePlane, "plane distance must be positive");
  if (std::abs(n.norm() - 1.0) > 1e-12) fail(ErrorCode::DegeneratePlane, "plane normal must be unit length");
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 exp_rotation(const Vec3& omega_dt) {
  const double theta = omega_dt.norm();
  const Mat3 W = skew(omega_dt);
  if (theta < 1e-8) {
    // Second-order series; the remainder is below machine precision here.
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * W + b * W * W;
}

double rotation_angle(const Mat3& R) {
  const Vec3 axis_sin(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double s = 0.5 * axis_sin.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  return std::atan2(s, c);
}

Vec3 log_rotation(const Mat3& R) {
  const double angle = rotation_angle(R);
  if (angle < 1e-8) {
    return 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  }
  const Eigen::AngleAxisd aa(R);
  return aa.axis() * angle;
}

Vec3 transform_point(const Pose& pose, const Vec3& X) { return pose.R * X + pose.T; }

Pose invert_pose(const Pose& pose) {
  Pose inv;
  inv.R = pose.R.transpose();
  inv.T = -(inv.R * pose.T);
  return inv;
}

Pose compose_pose(const Pose& a, const Pose& b) {
  Pose c;
  c.R = a.R * b.R;
  c.T = a.R * b.T + a.T;
  return c;
}

Pose exp_twist(const Twist& twist, double dt) {
  const Vec3 w = twist.omega * dt;
  const double theta = w.norm();
  const Mat3 W = skew(w);
  Mat3 V;
  if (theta < 1e-6) {
    V = Mat3::Identity() + 0.5 * W + W * W / 6.0;
  } else {
    const double t2 = theta * theta;
    V = Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * W + (theta - std::sin(theta)) / (t2 * theta) * W * W;
  }
  return {exp_rotation(w), V * (twist.nu * dt)};
}

double orthonormality_error(const Mat3& R) { return (R.transpose() * R - Mat3::Identity()).norm(); }

NormalizedPoint project(const Vec3& X) {
  if (!(X.z() >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "point is not in front of the camera");
  return {X.x() / X.z(), X.y() / X.z()};
}

PixelPoint pixel_from_normalized(const CameraIntrinsics& k, const NormalizedPoint& x) {
  return {k.f * k.s_x * x.x + k.f * k.s_theta * x.y + k.o_x, k.f * k.s_y * x.y + k.o_y};
}

NormalizedPoint normalized_from_pixel(const CameraIntrinsics& k, const PixelPoint& p) {
  k.validate();
  const double y = (p.y - k.o_y) / (k.f * k.s_y);
  const double x = (p.x - k.o_x - k.f * k.s_theta * y) / (k.f * k.s_x);
  return {x, y};
}

Flow2 continuous_flow(const Twist& twist, const NormalizedPoint& p, double Z) {
  if (!(Z >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "depth must be positive");
  const double x = p.x;
  const double y = p.y;
  const Vec3& w = twist.omega;
  const Vec3& n = twist.nu;
  // Rows one and two of  d/dt x = w^ x + nu / Z - (dZ/dt / Z) x  with dZ/dt
  // eliminated through the third row.
  const double u_t = (n.x() - x * n.z()) / Z;
  const double v_t = (n.y() - y * n.z()) / Z;
  const double u_r = w.y() * (1.0 + x * x) - w.z() * y - w.x() * x * y;
  const double v_r = -w.x() * (1.0 + y * y) + w.z() * x + w.y() * x * y;
  return {u_t + u_r, v_t + v_r};
}

Flow2 discrete_displacement(const Pose& delta, const NormalizedPoint& x, double Z_t, double Z_next) {
  if (!(Z_t >= kMinDepth) || !(Z_next >= kMinDepth)) {
    fail(ErrorCode::NonPositiveDepth, "depths must be positive");
  }
  const Vec3 xb = x.homogeneous();
  const Vec3 moved = delta.R * (Z_t * xb) + delta.T;
  if (std::abs(moved.z() - Z_next) > 1e-9 * std::max(1.0, std::abs(Z_next))) {
    fail(ErrorCode::InconsistentDepth, "Z_next does not match the transformed point");
  }
  const Vec3 dx = ((Z_t / Z_next) * delta.R - Mat3::Identity()) * xb + delta.T / Z_next;
  return {dx.x(), dx.y()};
}

Flow2 discrete_displacement(const Pose& delta, const NormalizedPoint& x, double Z_t) {
  if (!(Z_t >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "depth must be positive");
  const Vec3 moved = delta.R * (Z_t * x.homogeneous()) + delta.T;
  return discrete_displacement(delta, x, Z_t, moved.z());
}

double continuous_epipolar_residual(const Twist& twist, const NormalizedPoint& x, const Flow2& u) {
  const Vec3 xb = x.homogeneous();
  const Vec3 ub(u.u, u.v, 0.0);
  const Mat3 nu_hat = skew(twist.nu);
  return ub.dot(nu_hat * xb) + xb.dot(skew(twist.omega) * nu_hat * xb);
}

Mat3 essential_from_pose(const Pose& delta) { return skew(delta.T) * delta.R; }

double discrete_epipolar_residual(const Pose& delta, const NormalizedPoint& x_t, const NormalizedPoint& x_next) {
  return x_next.homogeneous().dot(essential_from_pose(delta) * x_t.homogeneous());
}

Mat3 plane_homography(const Plane& plane, const Pose& delta) {
  if (!(plane.d > 0.0)) fail(ErrorCode::DegeneratePlane, "plane distance must be positive");
  return delta.R + delta.T * plane.n.transpose() / plane.d;
}

NormalizedPoint apply_homography(const Mat3& H, const NormalizedPoint& x) {
  const Vec3 m = H * x.homogeneous();
  return {m.x() / m.z(), m.y() / m.z()};
}

Mat3 rotation_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rotation_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rotation_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

}  // namespace vokit
