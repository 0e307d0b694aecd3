#pragma once

// Sparse pyramidal Lucas-Kanade tracking.
//
// Two solvers minimize the same Gaussian-weighted patch objective
//   J(p) = sum_w g(w) [I2(W(w; p)) - I1(c + w)]^2
// over a window centred on c:
//  * forward-additive linearizes I2 at the current warp and re-assembles the
//    Gauss-Newton Hessian every iteration;
//  * inverse-compositional linearizes the template I1 at the identity warp,
//    assembles the Hessian once, and updates W(p) <- W(p) o W(dp)^-1.
//
// Pyramid levels are related by x_coarse = (x_fine + 0.5) / 2 - 0.5, i.e.
// pixel centres are aligned across levels.

#include <Eigen/Core>
#include <vector>

#include "vokit/geometry.hpp"
#include "vokit/image.hpp"

namespace vokit::flow {

enum class WarpKind { Translation, Affine };

/// Warp parameters. Translation: p = (u, v). Affine: p = (a11 - 1, a12, a21,
/// a22 - 1, tx, ty) so that p = 0 is the identity; the linear part acts on the
/// offset from the patch centre.
struct WarpParams {
  WarpKind kind = WarpKind::Translation;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);

  static WarpParams translation(double u = 0.0, double v = 0.0);
  static WarpParams affine();

  [[nodiscard]] int size() const { return kind == WarpKind::Translation ? 2 : 6; }
  [[nodiscard]] Flow2 translation_part() const;
  void set_translation(const Flow2& t);
  /// Displacement of the window sample at offset (wx, wy).
  [[nodiscard]] Vec2 displacement(double wx, double wy) const;
  /// Throws InvalidArgument if p does not match the kind.
  void validate() const;
};

class Pyramid {
 public:
  Pyramid() = default;
  explicit Pyramid(std::vector<Image> levels) : levels_(std::move(levels)) {}

  [[nodiscard]] int levels() const noexcept { return static_cast<int>(levels_.size()); }
  [[nodiscard]] const Image& level(int i) const { return levels_.at(static_cast<std::size_t>(i)); }
  /// Ratio between level-0 and level-i pixel sizes.
  [[nodiscard]] static double scale(int i) { return static_cast<double>(1 << i); }

 private:
  std::vector<Image> levels_;
};

struct LkConfig {
  int window = 15;                 ///< odd side length in pixels
  double sigma = 0.0;              ///< Gaussian weight sigma; <= 0 means window / 4
  double epsilon = 0.01;           ///< stop when ||dp|| < epsilon
  int max_iterations = 30;         ///< per level for single-level solves
  int coarse_iterations = 1;       ///< per coarse pyramid level
  int final_iterations = 5;        ///< at pyramid level 0
  double min_eigenvalue = 1e-9;    ///< per weighted pixel; below is an aperture problem
  double max_residual = 5e-3;      ///< converged tracks must end below this mean squared error
  double fb_threshold = 0.5;       ///< forward-backward acceptance, pixels
  bool inverse_compositional = false;  ///< solver used by the pyramidal driver
};

struct TrackResult {
  Flow2 displacement;              ///< pixels
  WarpParams warp;
  int iterations = 0;
  double residual = 0.0;           ///< final objective per unit weight
  bool converged = false;
  int hessian_assemblies = 0;
  int levels_run = 0;              ///< pyramid levels actually solved; coarse levels leaving the image are skipped
  std::vector<double> objective_trace;  ///< objective after each accepted step (first entry: initial)
};

/// Level i is a [1 4 6 4 1]/16 binomial low-pass of level i-1 decimated by
/// two. Throws TooManyLevels unless min(width, height) >= 2^(levels-1) * min_size.
Pyramid build_pyramid(const Image& img, int levels, int min_size = 15);

/// Central-difference gradient with bilinear sub-pixel sampling.
Flow2 gradient(const Image& img, const PixelPoint& at);

TrackResult lk_forward_additive(const Image& I1, const Image& I2, const PixelPoint& center,
                                const WarpParams& init, const LkConfig& cfg = {});
TrackResult lk_inverse_compositional(const Image& I1, const Image& I2, const PixelPoint& center,
                                     const WarpParams& init, const LkConfig& cfg = {});

/// Patch objective J(p) as minimized by both solvers (weighted sum).
double lk_objective(const Image& I1, const Image& I2, const PixelPoint& center, const WarpParams& warp,
                    const LkConfig& cfg = {});
/// Gauss-Newton Hessian the forward-additive solver assembles at `warp`.
Eigen::MatrixXd lk_gauss_newton_hessian(const Image& I2, const PixelPoint& center, const WarpParams& warp,
                                        const LkConfig& cfg = {});

/// Coarse-to-fine translation tracking; one solver pass per coarse level and
/// cfg.final_iterations at level 0.
TrackResult track_pyramidal(const Pyramid& p1, const Pyramid& p2, const PixelPoint& center,
                            const LkConfig& cfg = {}, const WarpParams& init = WarpParams::translation());

/// Smaller eigenvalue of the mean gradient outer product over a square window.
double structure_tensor_score(const Image& img, const PixelPoint& at, int window = 7);

struct ForwardBackwardResult {
  bool accepted = false;
  double discrepancy = 0.0;  ///< pixels
  TrackResult forward;
  TrackResult backward;
};

ForwardBackwardResult forward_backward_check(const Pyramid& p1, const Pyramid& p2, const PixelPoint& center,
                                             const LkConfig& cfg = {});

struct Feature {
  PixelPoint at;
  double score = 0.0;
};

/// Strongest structure-tensor responses, at least min_distance apart and
/// `border` pixels from the image edge, sorted by decreasing score.
std::vector<Feature> detect_features(const Image& img, int max_count, int window = 7, int min_distance = 10,
                                     int border = 16, double min_score = 1e-6);

}  // namespace vokit::flow
