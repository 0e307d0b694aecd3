#pragma once

// Fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <vector>

#include "vokit/egomotion.hpp"
#include "vokit/geometry.hpp"
#include "vokit/rng.hpp"

namespace vokit::testing {

struct TwoView {
  Pose delta;
  std::vector<Vec3> points;  // x_t camera frame
  std::vector<ego::Correspondence> corrs;  // depth_t holds the true depth
};

inline Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

inline Pose random_motion(Rng& rng, double max_angle = 0.15, double t_norm = 1.0) {
  Pose p;
  p.R = exp_rotation(random_unit(rng) * rng.uniform(0.02, max_angle));
  p.T = random_unit(rng) * t_norm;
  return p;
}

/// Points in general position in front of both cameras, observed with
/// `noise` (normalized units) added to both views.
inline TwoView random_two_view(std::uint64_t seed, std::size_t n, double noise = 0.0, double t_norm = 1.0) {
  Rng rng(seed, 17);
  TwoView tv;
  tv.delta = random_motion(rng, 0.15, t_norm);
  while (tv.corrs.size() < n) {
    const double z = rng.uniform(4.0, 20.0);
    const Vec3 X(rng.uniform(-0.5, 0.5) * z, rng.uniform(-0.4, 0.4) * z, z);
    const Vec3 Y = transform_point(tv.delta, X);
    if (Y.z() < 1.0) continue;
    ego::Correspondence c;
    c.id = static_cast<int>(tv.corrs.size());
    c.x_t = project(X);
    c.x_next = project(Y);
    c.x_t.x += noise * rng.normal();
    c.x_t.y += noise * rng.normal();
    c.x_next.x += noise * rng.normal();
    c.x_next.y += noise * rng.normal();
    c.depth_t = z;
    tv.points.push_back(X);
    tv.corrs.push_back(c);
  }
  return tv;
}

/// All points on one plane n^T X = d with a random tilt.
inline TwoView random_planar_two_view(std::uint64_t seed, std::size_t n) {
  Rng rng(seed, 23);
  TwoView tv;
  tv.delta = random_motion(rng);
  const Vec3 normal = (Vec3(0.0, 0.0, 1.0) + 0.4 * random_unit(rng)).normalized();
  const double d = rng.uniform(6.0, 15.0);
  while (tv.corrs.size() < n) {
    const Vec3 ray(rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4), 1.0);
    const double z = d / normal.dot(ray);
    if (!(z > 1.0)) continue;
    const Vec3 X = z * ray;
    const Vec3 Y = transform_point(tv.delta, X);
    if (Y.z() < 1.0) continue;
    ego::Correspondence c;
    c.id = static_cast<int>(tv.corrs.size());
    c.x_t = project(X);
    c.x_next = project(Y);
    c.depth_t = z;
    tv.points.push_back(X);
    tv.corrs.push_back(c);
  }
  return tv;
}

/// Angle between two vectors in [0, pi].
inline double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

inline double rotation_error(const Mat3& a, const Mat3& b) { return rotation_angle(a.transpose() * b); }

}  // namespace vokit::testing
