#pragma once

// Deterministic synthetic scenes: point clouds, independently moving rigid
// bodies, camera trajectories from twists, exact correspondences and flows,
// and analytic-texture images.
//
// The world frame coincides with camera 0 unless a trajectory says otherwise;
// with the default presets the ground is the plane Y = 1.5 (Y points down).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vokit/egomotion.hpp"
#include "vokit/image.hpp"

namespace vokit::sim {

inline constexpr int kDefaultWidth = 640;
inline constexpr int kDefaultHeight = 480;
inline constexpr double kCameraHeight = 1.5;

struct MovingBody {
  std::vector<Vec3> points;        ///< body frame
  std::vector<Pose> body_to_world; ///< one pose per frame
};

struct Scene {
  std::vector<Vec3> static_points;  ///< world frame
  std::vector<MovingBody> movers;
  std::optional<Plane> ground;      ///< world frame
  std::uint64_t seed = 0;
};

struct Trajectory {
  std::vector<Pose> world_to_camera;
  double dt = 1.0;

  [[nodiscard]] std::size_t frames() const { return world_to_camera.size(); }
  /// Motion mapping camera-k coordinates into camera-(k+1) coordinates.
  [[nodiscard]] Pose delta(std::size_t k) const;
  [[nodiscard]] Pose camera_to_world(std::size_t k) const;
};

/// pose_{k+1} = exp_twist(twist_k, dt) o pose_k, starting from `start`.
Trajectory integrate_trajectory(std::span<const Twist> twists, double dt, const Pose& start = Pose::identity());

struct NoiseSpec {
  double pixel_sigma = 0.0;
  double outlier_fraction = 0.0;  ///< in [0, 1)
  double outlier_box_px = 20.0;   ///< planted outliers move x_next uniformly within +-box
  std::uint64_t seed = 1;
};

enum class Label { Static, Mover, Outlier };

struct TrackSet {
  std::vector<ego::Correspondence> corrs;  ///< depth_t holds the true depth
  std::vector<Label> labels;
  std::vector<int> mover_ids;              ///< -1 for static points
  std::vector<double> depth_next;
  Pose delta;                              ///< true camera motion k -> k+1
  std::size_t culled = 0;                  ///< points behind either camera or outside either image
  std::size_t planted = 0;
};

/// Correspondences between frames k and k+1. Gaussian noise is added in
/// pixels to both observations; then floor(fraction * N) features chosen at
/// random get a uniform mismatch. Throws EmptyView if nothing is visible.
TrackSet render_correspondences(const Scene& scene, const Trajectory& traj, std::size_t k,
                                const CameraIntrinsics& intrinsics, const NoiseSpec& noise = {},
                                int width = kDefaultWidth, int height = kDefaultHeight);

struct FlowSample {
  NormalizedPoint x;
  Flow2 u;
  double Z = 0.0;
};

/// Exact continuous flow of the visible static points.
std::vector<FlowSample> render_flow_field(const Scene& scene, const Pose& world_to_camera, const Twist& twist,
                                          const CameraIntrinsics& intrinsics, int width = kDefaultWidth,
                                          int height = kDefaultHeight);

// ---------------------------------------------------------------------------
// Analytic textures and images

struct Wave {
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
  double amplitude = 0.0;
};

/// offset + sum_i a_i sin(kx_i u + ky_i v + phase_i).
struct Texture {
  std::vector<Wave> waves;
  double offset = 0.5;

  [[nodiscard]] double operator()(double u, double v) const;

  /// `terms` waves with frequencies in [k_min, k_max] (radians per texture
  /// unit) in random directions; amplitudes sum to total_amplitude.
  static Texture random(std::uint64_t seed, int terms = 6, double k_min = 0.02, double k_max = 0.15,
                        double total_amplitude = 0.45);
  static Texture constant(double value);
};

/// Plane n^T X = d in world coordinates, textured in the (axis_u, axis_v)
/// chart anchored at origin.
struct TexturedPlane {
  Plane plane;
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitZ();
  Texture texture;
};

/// Intensity of the nearest plane hit by each pixel ray; `background` where
/// no plane is hit in front of the camera.
Image render_image(std::span<const TexturedPlane> planes, const Pose& world_to_camera,
                   const CameraIntrinsics& intrinsics, int width = kDefaultWidth, int height = kDefaultHeight,
                   double background = 0.5);
/// Camera-frame depth of the nearest plane hit per pixel (0 where none).
Image render_depth(std::span<const TexturedPlane> planes, const Pose& world_to_camera,
                   const CameraIntrinsics& intrinsics, int width = kDefaultWidth, int height = kDefaultHeight);

/// I(x, y) = texture(x - shift_x, y - shift_y) in pixel units, so content at
/// p in the unshifted image appears at p + shift.
Image render_shifted_texture(const Texture& texture, int width, int height, double shift_x = 0.0,
                             double shift_y = 0.0);

// ---------------------------------------------------------------------------
// Preset scenes

namespace presets {

/// Ground points on Y = 1.5 and free-standing structure ahead of camera 0.
Scene street(std::uint64_t seed, std::size_t ground_points = 250, std::size_t structure_points = 250);

/// Forward driving at `speed` per frame with a gentle weave in yaw and a small
/// lateral drift. The motion stays in the ground-parallel plane, so the camera
/// height remains kCameraHeight.
std::vector<Twist> forward_drive_twists(std::size_t frames, double speed = 1.0);

/// Constant yaw rate along an arc: per-frame turn angle theta, unit chord scale.
std::vector<Twist> circular_twists(std::size_t frames, double theta, double speed = 1.0);

/// Overtaking vehicle: the camera drives forward 1 per frame, the mover 2.
struct ScenarioData {
  Scene scene;
  Trajectory trajectory;
  Plane road;  ///< in camera-0 coordinates
};
ScenarioData overtaking(std::uint64_t seed);
/// Preceding vehicle near road level: the camera drives 1 per frame, the mover 0.5.
ScenarioData preceding(std::uint64_t seed);

/// Static street plus `bodies` rigid movers, each with its own motion that is
/// clearly distinct from the camera's.
ScenarioData multi_body(std::uint64_t seed, int bodies, std::size_t points_per_body = 120);

}  // namespace presets

}  // namespace vokit::sim
