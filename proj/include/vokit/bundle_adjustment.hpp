#pragma once

// Two-frame bundle adjustment and the direct (photometric) pose refinement.
//
// Residual of correspondence j:  x~_next - pi(R x_j + rho_j T), rho_j = 1 / Z_j,
// plus the measurement prior x~_t - x_j whenever x_j is a free variable.
// Pose increments act on the left: R <- exp(dw) R, T <- exp(dw) T + dt.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "vokit/egomotion.hpp"
#include "vokit/flow.hpp"
#include "vokit/image.hpp"

namespace vokit::ego {

enum class BAMode { MotionOnly, StructureOnly, Full };

struct BAProblem {
  std::vector<Correspondence> corrs;
  Pose pose;
  std::vector<double> depths;  ///< Z_t per correspondence, > 0
  BAMode mode = BAMode::MotionOnly;
  double damping = 1e-3;       ///< initial Levenberg-Marquardt lambda
  int max_iters = 50;
  double tolerance = 1e-10;    ///< relative objective change that stops the solve
};

/// Free variables of a problem: the pose, inverse depths and refined x_t.
struct BAState {
  Pose pose;
  std::vector<double> inv_depths;
  std::vector<NormalizedPoint> points;
};

struct BAResult {
  Pose pose;
  std::vector<double> depths;
  std::vector<NormalizedPoint> points;
  std::vector<double> trace;  ///< objective after each accepted step; first entry is the initial value
  int iterations = 0;         ///< accepted steps
  bool converged = false;
};

/// Throws InvalidArgument / NonPositiveDepth for malformed problems.
BAState ba_initial_state(const BAProblem& problem);
/// Stacked residuals: per correspondence the reprojection pair, followed by
/// the prior pair when points are free.
Eigen::VectorXd ba_residuals(const BAProblem& problem, const BAState& state);
/// Dense Jacobian of ba_residuals with respect to the mode's increment vector:
/// [dw, dt] for the pose (dt restricted to the plane orthogonal to T in Full
/// mode), then (dx, dy, drho) per point.
Eigen::MatrixXd ba_jacobian(const BAProblem& problem, const BAState& state);
/// Applies an increment laid out as in ba_jacobian.
BAState ba_retract(const BAProblem& problem, const BAState& state, const Eigen::VectorXd& delta);
/// Sum of squared residuals.
double ba_objective(const BAProblem& problem, const BAState& state);

/// Levenberg-Marquardt on the mode's variables. Full mode keeps ||T|| fixed
/// (the scale gauge). Throws DivergedBA when no step is accepted at maximum
/// damping although the model predicts a decrease, and
/// RankDeficientNormalEquations when a variable has no influence.
BAResult bundle_adjust(const BAProblem& problem);

/// Mean reprojection error over the problem's correspondences.
double mean_reprojection_error(const Pose& pose, std::span<const Correspondence> corrs,
                               std::span<const double> depths);

// ---------------------------------------------------------------------------

struct DirectConfig {
  int max_iters = 50;
  double tolerance = 1e-12;
  double damping = 1e-4;
};

struct DirectResult {
  Pose pose;
  std::vector<double> trace;
  int iterations = 0;
  std::size_t dropped = 0;  ///< features whose warp left the image
  bool converged = false;
};

/// Minimizes sum_i [I2(pi_K(R Z_i x_i + T)) - I1(p_i)]^2 over the pose by
/// damped Gauss-Newton; features are pixel positions in I1 with known depths.
DirectResult direct_method_refine(const Image& I1, const Image& I2, std::span<const PixelPoint> features,
                                  const CameraIntrinsics& k, const Pose& init, std::span<const double> depths,
                                  const DirectConfig& cfg = {});

}  // namespace vokit::ego
