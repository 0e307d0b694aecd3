#pragma once

// Two-view ego-motion from point correspondences.
//
// Correspondences pair a point seen at x_t in one frame with x_next in the
// other. Every Pose named `delta` maps coordinates of the x_t frame into the
// x_next frame, so a static point obeys Z_next x_next = Z_t R x_t + T.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vokit/geometry.hpp"

namespace vokit::ego {

struct Correspondence {
  int id = 0;
  NormalizedPoint x_t;
  NormalizedPoint x_next;
  std::optional<double> depth_t;  ///< measured depth of x_t (stereo), if any
  double weight = 1.0;
};

struct EssentialMatrix {
  Mat3 E = Mat3::Zero();
};

struct EightPointConfig {
  double degen_ratio = 1e-3;   ///< sigma_8 / sigma_1 of the data matrix below this is degenerate
  double parallax_min = 1e-4;  ///< median pure-rotation residual (normalized units) below this lacks parallax
};

/// Linear 8-point estimate on Hartley-normalized coordinates, projected onto
/// the essential manifold with ||E||_F = sqrt(2). The sign is pinned so the
/// entry of largest magnitude is positive.
EssentialMatrix eight_point_discrete(std::span<const Correspondence> corrs, const EightPointConfig& cfg = {});

/// Closest essential matrix U diag(1, 1, 0) V^T.
Mat3 project_to_essential(const Mat3& E);

/// Rotation best aligning the x_t bearings with the x_next bearings,
/// ignoring translation.
Mat3 fit_rotation(std::span<const Correspondence> corrs);
/// Median image distance between x_next and x_t rotated by R.
double rotation_residual(const Mat3& R, std::span<const Correspondence> corrs);

/// Depths of one correspondence under delta, from the two-ray least-squares
/// solve Z_t R x_t + T = Z_next x_next. Rays that are parallel to within
/// 1e-9 rad are unobservable and return NaN depths.
struct PairDepths {
  double z_t = 0.0;
  double z_next = 0.0;
  double parallax = 0.0;  ///< sine of the angle between R x_t and x_next
  bool observable = false;
};
PairDepths triangulate_pair(const Pose& delta, const NormalizedPoint& x_t, const NormalizedPoint& x_next);

/// Of the four (R, +-T) candidates encoded by E, the one with the most points
/// in front of both cameras; ||T|| = 1. Throws AmbiguousCheirality without a
/// unique strict majority.
Pose decompose_essential(const EssentialMatrix& E, std::span<const Correspondence> corrs);

struct Triangulation {
  std::vector<double> depths;    ///< Z_t for delta.T as given (gamma = 1); NaN where unobservable
  std::vector<bool> observable;
  std::vector<bool> negative;    ///< observable but behind either camera (cheirality violation)
  double gamma = 1.0;
};

/// Joint homogeneous least squares for all depths and the common scale of T,
/// normalized to gamma = 1.
Triangulation triangulate_up_to_scale(const Pose& delta, std::span<const Correspondence> corrs);

/// || x_next - pi(R Z x_t + T) ||: the point with depth Z in the x_t frame
/// reprojected into the other frame. Throws NonPositiveDepth when the moved
/// point is not in front of that camera.
double reprojection_error(const Pose& delta, const Correspondence& corr, double Z);

struct FlowObservation {
  NormalizedPoint x;
  Flow2 u;
};

struct ContinuousResult {
  Twist twist;                       ///< ||nu|| = 1, or nu = 0 when unobservable
  bool translation_observable = true;
};

struct ContinuousConfig {
  double degen_ratio = 1e-3;
  double rotation_only_tol = 1e-9;  ///< relative RMS residual of a pure-rotation fit
};

/// Linear continuous 8-point: solves the flow epipolar constraint for nu and
/// the symmetric part of omega^ nu^, then recovers omega. Pure rotational
/// flow yields omega with nu = 0 and translation_observable = false.
ContinuousResult continuous_linear_solve(std::span<const FlowObservation> flows, const ContinuousConfig& cfg = {});

// ---------------------------------------------------------------------------
// Reduced motion models

enum class MotionKind { Full6, SmallRotation, ThreeParam, OneParam, Circular, GroundPlane };

/// Parameters by kind:
///   Full6, SmallRotation: (w1, w2, w3, nu1, nu2, nu3)
///   ThreeParam:           (nu3, w1, w2)
///   OneParam:             (nu3)
///   Circular:             (theta); w = (0, theta, 0), nu = (-sin(theta/2), 0, -cos(theta/2)),
///                         i.e. forward driving along an arc in the X-Z plane
///   GroundPlane:          (a = nu3 / d, w1, w2) with 1/Z taken from the plane
struct MotionModel {
  MotionKind kind = MotionKind::Full6;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(6);

  static int param_count(MotionKind kind);
  /// Throws InvalidArgument if params does not match kind.
  void validate() const;
  /// The twist the model restricts the general motion to. GroundPlane uses
  /// d = 1, so nu3 equals a.
  [[nodiscard]] Twist twist() const;
};

/// Flow (displacement for SmallRotation) predicted by the model at depth Z.
Flow2 predict_flow(const MotionModel& model, const NormalizedPoint& x, double Z);
/// Same with depth from the plane, 1/Z = n^T x / d. Throws DegeneratePlane for
/// invalid planes and NonPositiveDepth where the ray misses the plane.
Flow2 predict_flow(const MotionModel& model, const NormalizedPoint& x, const Plane& plane);

/// Discrete pose of the circular model: R = R_y(theta) and the unit chord
/// T = (-sin(theta/2), 0, -cos(theta/2)).
Pose circular_pose(double theta);

struct CircularEstimate {
  double theta = 0.0;
  std::size_t used = 0;  ///< correspondences that produced a vote
};

/// Per-correspondence closed-form theta from the circular-model epipolar
/// constraint, aggregated by the median. Throws NoCorrespondences.
CircularEstimate estimate_circular_one_point(std::span<const Correspondence> corrs);

// ---------------------------------------------------------------------------
// Monocular scale

struct GroundScaleConfig {
  double inlier_threshold = 0.01;   ///< plane distance, relative to the fitted d
  int max_iterations = 500;
  double confidence = 0.999;
  std::uint64_t seed = 7;
  std::optional<Vec3> normal_prior;  ///< reject hypotheses whose normal is far from this
  double max_normal_angle = 0.5;     ///< radians, used with normal_prior
};

struct GroundScale {
  double gamma = 1.0;   ///< metric units per reconstruction unit
  Plane plane;          ///< fitted plane in reconstruction units
  std::vector<bool> inliers;
};

/// Fits the ground plane robustly to up-to-scale points and returns
/// gamma = h / d_fit. Throws DegeneratePlane for collinear input and
/// NoConsensus when no plane gathers three supporting points.
GroundScale scale_from_ground_plane(std::span<const Vec3> points, double height, const GroundScaleConfig& cfg = {});

}  // namespace vokit::ego
