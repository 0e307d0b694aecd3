#pragma once

// Rigid-body motion, perspective projection and epipolar primitives.
//
// Conventions used throughout vokit:
//  * camera frame: X right, Y down, Z forward; depths are positive ahead.
//  * a Pose maps coordinates of the source frame into the target frame,
//    X_target = R * X_source + T.
//  * a Twist (omega, nu) is the camera-frame velocity of a static point,
//    dX/dt = omega x X + nu.
//  * angles are radians; image coordinates are normalized unless the type
//    says PixelPoint.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vokit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Depths below this are treated as lying at (or behind) the optical center.
inline constexpr double kMinDepth = 1e-9;

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 T = Vec3::Zero();

  static Pose identity() { return {}; }
};

struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 nu = Vec3::Zero();
};

struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;

  /// Homogeneous form [x, y, 1].
  [[nodiscard]] Vec3 homogeneous() const { return {x, y, 1.0}; }
  [[nodiscard]] Vec2 vec() const { return {x, y}; }
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

struct Flow2 {
  double u = 0.0;
  double v = 0.0;

  [[nodiscard]] double norm() const;
};

/// Calibration matrix
///   [ f*s_x  f*s_theta  o_x ]
///   [ 0      f*s_y      o_y ]
///   [ 0      0          1   ]
struct CameraIntrinsics {
  double f = 1.0;
  double s_x = 500.0;
  double s_y = 500.0;
  double s_theta = 0.0;
  double o_x = 320.0;
  double o_y = 240.0;

  [[nodiscard]] Mat3 K() const;
  [[nodiscard]] Mat3 K_inverse() const;
  /// Mean focal length in pixels; converts pixel thresholds to normalized units.
  [[nodiscard]] double focal_px() const { return 0.5 * f * (s_x + s_y); }
  /// Throws InvalidArgument unless f*s_x > 0 and f*s_y > 0.
  void validate() const;
};

/// Plane n^T X = d in camera coordinates, n unit length, d > 0.
struct Plane {
  Vec3 n = Vec3::UnitY();
  double d = 1.0;

  /// Throws DegeneratePlane when the invariants do not hold.
  void validate() const;
  /// Signed distance of X measured from the plane towards the camera side.
  [[nodiscard]] double height_above(const Vec3& X) const { return d - n.dot(X); }
};

Mat3 skew(const Vec3& v);
/// Rodrigues map so(3) -> SO(3).
Mat3 exp_rotation(const Vec3& omega_dt);
/// Inverse of exp_rotation, angle in [0, pi].
Vec3 log_rotation(const Mat3& R);
/// Rotation angle of R in [0, pi].
double rotation_angle(const Mat3& R);

Vec3 transform_point(const Pose& pose, const Vec3& X);
Pose invert_pose(const Pose& pose);
/// Returns the pose that applies b first, then a.
Pose compose_pose(const Pose& a, const Pose& b);
/// Exact integration of a constant twist over dt (the SE(3) exponential).
Pose exp_twist(const Twist& twist, double dt);
/// Frobenius deviation of R from orthonormality.
double orthonormality_error(const Mat3& R);

/// Throws NonPositiveDepth if X.z < kMinDepth.
NormalizedPoint project(const Vec3& X);

PixelPoint pixel_from_normalized(const CameraIntrinsics& k, const NormalizedPoint& x);
NormalizedPoint normalized_from_pixel(const CameraIntrinsics& k, const PixelPoint& p);

/// Instantaneous image velocity of a static point at depth Z under a twist.
Flow2 continuous_flow(const Twist& twist, const NormalizedPoint& x, double Z);

/// Image displacement x(t+dt) - x(t) of a point at depth Z_t that lands at
/// depth Z_next after the discrete motion delta. Throws InconsistentDepth if
/// Z_next disagrees with delta applied to the back-projected point.
Flow2 discrete_displacement(const Pose& delta, const NormalizedPoint& x, double Z_t, double Z_next);
/// Same, with Z_next computed from delta.
Flow2 discrete_displacement(const Pose& delta, const NormalizedPoint& x, double Z_t);

/// u^T nu^ x + x^T omega^ nu^ x with u = [u, v, 0].
double continuous_epipolar_residual(const Twist& twist, const NormalizedPoint& x, const Flow2& u);
/// x_next^T T^ R x_t.
double discrete_epipolar_residual(const Pose& delta, const NormalizedPoint& x_t,
                                  const NormalizedPoint& x_next);
/// Essential matrix T^ R of a pose.
Mat3 essential_from_pose(const Pose& delta);

/// H = R + T n^T / d, mapping homogeneous normalized points of the plane
/// from the source frame into the target frame.
Mat3 plane_homography(const Plane& plane, const Pose& delta);
NormalizedPoint apply_homography(const Mat3& H, const NormalizedPoint& x);

/// Rotation about a coordinate axis.
Mat3 rotation_x(double angle);
Mat3 rotation_y(double angle);
Mat3 rotation_z(double angle);

}  // namespace vokit
