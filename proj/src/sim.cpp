#include "vokit/sim.hpp"

#include <cmath>
#include <numbers>

#include "vokit/error.hpp"
#include "vokit/rng.hpp"

namespace vokit::sim {

Pose Trajectory::delta(std::size_t k) const {
  return compose_pose(world_to_camera.at(k + 1), invert_pose(world_to_camera.at(k)));
}

Pose Trajectory::camera_to_world(std::size_t k) const { return invert_pose(world_to_camera.at(k)); }

Trajectory integrate_trajectory(std::span<const Twist> twists, double dt, const Pose& start) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
  Trajectory traj;
  traj.dt = dt;
  traj.world_to_camera.reserve(twists.size() + 1);
  traj.world_to_camera.push_back(start);
  for (const Twist& tw : twists) {
    traj.world_to_camera.push_back(compose_pose(exp_twist(tw, dt), traj.world_to_camera.back()));
  }
  return traj;
}

namespace {

bool in_image(const PixelPoint& p, int width, int height) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1;
}

struct WorldPair {
  Vec3 now;
  Vec3 next;
  Label label;
  int mover;
};

}  // namespace

TrackSet render_correspondences(const Scene& scene, const Trajectory& traj, std::size_t k,
                                const CameraIntrinsics& intrinsics, const NoiseSpec& noise, int width,
                                int height) {
  if (k + 1 >= traj.frames()) fail(ErrorCode::InvalidArgument, "frame pair outside the trajectory");
  if (!(noise.outlier_fraction >= 0.0 && noise.outlier_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "outlier fraction must lie in [0, 1)");
  }
  intrinsics.validate();

  std::vector<WorldPair> world;
  world.reserve(scene.static_points.size());
  for (const Vec3& X : scene.static_points) world.push_back({X, X, Label::Static, -1});
  for (std::size_t m = 0; m < scene.movers.size(); ++m) {
    const MovingBody& body = scene.movers[m];
    if (body.body_to_world.size() < traj.frames()) {
      fail(ErrorCode::InvalidArgument, "mover trajectory is shorter than the camera trajectory");
    }
    for (const Vec3& P : body.points) {
      world.push_back({transform_point(body.body_to_world[k], P), transform_point(body.body_to_world[k + 1], P),
                       Label::Mover, static_cast<int>(m)});
    }
  }

  const Pose& cam_now = traj.world_to_camera[k];
  const Pose& cam_next = traj.world_to_camera[k + 1];
  TrackSet out;
  out.delta = traj.delta(k);
  std::vector<PixelPoint> px_now, px_next;
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Vec3 a = transform_point(cam_now, world[i].now);
    const Vec3 b = transform_point(cam_next, world[i].next);
    if (!(a.z() >= kMinDepth) || !(b.z() >= kMinDepth)) {
      ++out.culled;
      continue;
    }
    const PixelPoint pa = pixel_from_normalized(intrinsics, project(a));
    const PixelPoint pb = pixel_from_normalized(intrinsics, project(b));
    if (!in_image(pa, width, height) || !in_image(pb, width, height)) {
      ++out.culled;
      continue;
    }
    ego::Correspondence c;
    c.id = static_cast<int>(i);
    c.depth_t = a.z();
    out.corrs.push_back(c);
    out.labels.push_back(world[i].label);
    out.mover_ids.push_back(world[i].mover);
    out.depth_next.push_back(b.z());
    px_now.push_back(pa);
    px_next.push_back(pb);
  }
  if (out.corrs.empty()) fail(ErrorCode::EmptyView, "no point is visible in both frames");

  const std::size_t n = out.corrs.size();
  if (noise.pixel_sigma > 0.0) {
    Rng rng(noise.seed, 2 * k);
    for (std::size_t i = 0; i < n; ++i) {
      px_now[i].x += noise.pixel_sigma * rng.normal();
      px_now[i].y += noise.pixel_sigma * rng.normal();
      px_next[i].x += noise.pixel_sigma * rng.normal();
      px_next[i].y += noise.pixel_sigma * rng.normal();
    }
  }
  out.planted = static_cast<std::size_t>(std::floor(noise.outlier_fraction * static_cast<double>(n)));
  if (out.planted > 0) {
    Rng rng(noise.seed, 2 * k + 1);
    for (const std::size_t i : rng.sample(n, out.planted)) {
      px_next[i].x += rng.uniform(-noise.outlier_box_px, noise.outlier_box_px);
      px_next[i].y += rng.uniform(-noise.outlier_box_px, noise.outlier_box_px);
      out.labels[i] = Label::Outlier;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.corrs[i].x_t = normalized_from_pixel(intrinsics, px_now[i]);
    out.corrs[i].x_next = normalized_from_pixel(intrinsics, px_next[i]);
  }
  return out;
}

std::vector<FlowSample> render_flow_field(const Scene& scene, const Pose& world_to_camera, const Twist& twist,
                                          const CameraIntrinsics& intrinsics, int width, int height) {
  std::vector<FlowSample> out;
  for (const Vec3& Xw : scene.static_points) {
    const Vec3 X = transform_point(world_to_camera, Xw);
    if (!(X.z() >= kMinDepth)) continue;
    const NormalizedPoint x = project(X);
    if (!in_image(pixel_from_normalized(intrinsics, x), width, height)) continue;
    out.push_back({x, continuous_flow(twist, x, X.z()), X.z()});
  }
  if (out.empty()) fail(ErrorCode::EmptyView, "no static point is visible");
  return out;
}

// ---------------------------------------------------------------------------

double Texture::operator()(double u, double v) const {
  double s = offset;
  for (const Wave& w : waves) s += w.amplitude * std::sin(w.kx * u + w.ky * v + w.phase);
  return s;
}

Texture Texture::random(std::uint64_t seed, int terms, double k_min, double k_max, double total_amplitude) {
  if (terms < 1) fail(ErrorCode::InvalidArgument, "texture needs at least one wave");
  Rng rng(seed, 0x7e47u);
  Texture t;
  double sum = 0.0;
  for (int i = 0; i < terms; ++i) {
    // Stratified directions keep the texture two-dimensional everywhere.
    const double angle = std::numbers::pi * (i + rng.uniform()) / terms;
    const double k = rng.uniform(k_min, k_max);
    Wave w;
    w.kx = k * std::cos(angle);
    w.ky = k * std::sin(angle);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w.amplitude = rng.uniform(0.5, 1.0);
    sum += w.amplitude;
    t.waves.push_back(w);
  }
  for (Wave& w : t.waves) w.amplitude *= total_amplitude / sum;
  return t;
}

Texture Texture::constant(double value) {
  Texture t;
  t.offset = value;
  return t;
}

namespace {

struct Hit {
  double depth = 0.0;
  const TexturedPlane* plane = nullptr;
  Vec3 X;
};

Hit cast(std::span<const TexturedPlane> planes, const Vec3& center, const Vec3& dir) {
  Hit best;
  for (const TexturedPlane& p : planes) {
    const double denom = p.plane.n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double s = (p.plane.d - p.plane.n.dot(center)) / denom;
    if (!(s >= kMinDepth)) continue;
    if (best.plane == nullptr || s < best.depth) {
      best.depth = s;
      best.plane = &p;
      best.X = center + s * dir;
    }
  }
  return best;
}

template <class F>
Image render_with(std::span<const TexturedPlane> planes, const Pose& world_to_camera,
                  const CameraIntrinsics& intrinsics, int width, int height, double fallback, F&& value) {
  const Mat3 Rt = world_to_camera.R.transpose();
  const Vec3 center = -(Rt * world_to_camera.T);
  Image img(width, height, fallback);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 xbar = normalized_from_pixel(intrinsics, {static_cast<double>(x), static_cast<double>(y)}).homogeneous();
      // The ray parameter equals the camera-frame depth because xbar.z = 1.
      const Hit h = cast(planes, center, Rt * xbar);
      if (h.plane != nullptr) img(x, y) = value(h);
    }
  }
  return img;
}

}  // namespace

Image render_image(std::span<const TexturedPlane> planes, const Pose& world_to_camera,
                   const CameraIntrinsics& intrinsics, int width, int height, double background) {
  return render_with(planes, world_to_camera, intrinsics, width, height, background, [](const Hit& h) {
    const Vec3 rel = h.X - h.plane->origin;
    return h.plane->texture(rel.dot(h.plane->axis_u), rel.dot(h.plane->axis_v));
  });
}

Image render_depth(std::span<const TexturedPlane> planes, const Pose& world_to_camera,
                   const CameraIntrinsics& intrinsics, int width, int height) {
  return render_with(planes, world_to_camera, intrinsics, width, height, 0.0,
                     [](const Hit& h) { return h.depth; });
}

Image render_shifted_texture(const Texture& texture, int width, int height, double shift_x, double shift_y) {
  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img(x, y) = texture(x - shift_x, y - shift_y);
  }
  return img;
}

// ---------------------------------------------------------------------------

namespace presets {

Scene street(std::uint64_t seed, std::size_t ground_points, std::size_t structure_points) {
  Rng rng(seed, 0x5ce7e);
  Scene s;
  s.seed = seed;
  s.ground = Plane{Vec3::UnitY(), kCameraHeight};
  for (std::size_t i = 0; i < ground_points; ++i) {
    s.static_points.emplace_back(rng.uniform(-12.0, 12.0), kCameraHeight, rng.uniform(4.0, 60.0));
  }
  for (std::size_t i = 0; i < structure_points; ++i) {
    s.static_points.emplace_back(rng.uniform(-15.0, 15.0), rng.uniform(-5.0, 1.2), rng.uniform(6.0, 70.0));
  }
  return s;
}

std::vector<Twist> forward_drive_twists(std::size_t frames, double speed) {
  std::vector<Twist> tw;
  for (std::size_t k = 0; k + 1 < frames; ++k) {
    const double t = static_cast<double>(k);
    Twist w;
    w.omega = Vec3(0.0, 0.01 * std::cos(0.3 * t), 0.0);
    w.nu = Vec3(0.02 * std::sin(0.4 * t), 0.0, -speed);  // static points approach the camera
    tw.push_back(w);
  }
  return tw;
}

std::vector<Twist> circular_twists(std::size_t frames, double theta, double speed) {
  std::vector<Twist> tw(frames > 0 ? frames - 1 : 0, Twist{Vec3(0.0, theta, 0.0), Vec3(0.0, 0.0, -speed)});
  return tw;
}

namespace {

ScenarioData straight_with_mover(std::uint64_t seed, const Vec3& box_min, const Vec3& box_max, double start_z,
                                 double mover_speed, std::size_t points) {
  ScenarioData d;
  d.scene = street(seed, 150, 150);
  d.road = *d.scene.ground;
  const std::vector<Twist> twists(1, Twist{Vec3::Zero(), Vec3(0.0, 0.0, -1.0)});
  d.trajectory = integrate_trajectory(twists, 1.0);
  Rng rng(seed, 0xb0d1);
  MovingBody body;
  for (std::size_t i = 0; i < points; ++i) {
    body.points.emplace_back(rng.uniform(box_min.x(), box_max.x()), rng.uniform(box_min.y(), box_max.y()),
                             rng.uniform(box_min.z(), box_max.z()));
  }
  for (std::size_t f = 0; f < d.trajectory.frames(); ++f) {
    body.body_to_world.push_back({Mat3::Identity(), Vec3(0.0, 0.0, start_z + mover_speed * static_cast<double>(f))});
  }
  d.scene.movers.push_back(std::move(body));
  return d;
}

}  // namespace

ScenarioData overtaking(std::uint64_t seed) {
  return straight_with_mover(seed, Vec3(2.5, -0.5, -2.0), Vec3(4.0, 1.2, 2.0), 10.0, 2.0, 80);
}

ScenarioData preceding(std::uint64_t seed) {
  return straight_with_mover(seed, Vec3(-1.0, kCameraHeight - 0.4, -1.5), Vec3(1.0, kCameraHeight, 1.5), 10.0, 0.5,
                             80);
}

ScenarioData multi_body(std::uint64_t seed, int bodies, std::size_t points_per_body) {
  ScenarioData d;
  d.scene = street(seed, 150, 150);
  d.road = *d.scene.ground;
  const std::vector<Twist> twists(1, Twist{Vec3(0.0, 0.01, 0.0), Vec3(0.0, 0.0, -1.0)});
  d.trajectory = integrate_trajectory(twists, 1.0);
  Rng rng(seed, 0xb0d2);
  for (int b = 0; b < bodies; ++b) {
    const double side = b % 2 == 0 ? -1.0 : 1.0;
    const Vec3 center(side * (2.0 + 1.5 * b), -0.3, 12.0 + 4.0 * b);
    MovingBody body;
    for (std::size_t i = 0; i < points_per_body; ++i) {
      body.points.emplace_back(rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0));
    }
    const double yaw_rate = 0.04 * (b + 1) * side;
    const Vec3 velocity(-side * 0.6, 0.05 * (b + 1), 0.8 + 0.7 * b);
    for (std::size_t f = 0; f < d.trajectory.frames(); ++f) {
      const double t = static_cast<double>(f);
      body.body_to_world.push_back({rotation_y(yaw_rate * t), center + t * velocity});
    }
    d.scene.movers.push_back(std::move(body));
  }
  return d;
}

}  // namespace presets

}  // namespace vokit::sim
