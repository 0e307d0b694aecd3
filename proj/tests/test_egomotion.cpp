#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "support.hpp"
#include "vokit/egomotion.hpp"
#include "vokit/error.hpp"
#include "vokit/sim.hpp"

using namespace vokit;
using namespace vokit::ego;
using vokit::testing::angle_between;
using vokit::testing::random_two_view;
using vokit::testing::rotation_error;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

const CameraIntrinsics kCam{};

}  // namespace

TEST_CASE("eight-point recovery") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto tv = random_two_view(seed, 100);
    const EssentialMatrix E = eight_point_discrete(tv.corrs);
    const Eigen::JacobiSVD<Mat3> svd(E.E);
    const Vec3 s = svd.singularValues();
    CHECK(std::abs(s(0) - s(1)) / s(0) < 1e-9);
    CHECK(s(2) < 1e-12);
    CHECK(E.E.norm() == doctest::Approx(std::sqrt(2.0)));
    for (const auto& c : tv.corrs) {
      CHECK(std::abs(c.x_next.homogeneous().dot(E.E * c.x_t.homogeneous())) < 1e-10);
    }
    const Pose p = decompose_essential(E, tv.corrs);
    CHECK(rotation_error(p.R, tv.delta.R) < 1e-6);
    CHECK(angle_between(p.T, tv.delta.T) < 1e-6);
    CHECK(p.T.norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("eight-point degeneracies") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto planar = vokit::testing::random_planar_two_view(seed, 60);
    CHECK(code_of([&] { (void)eight_point_discrete(planar.corrs); }) == ErrorCode::DegenerateConfiguration);
  }
  auto tv = random_two_view(3, 40);
  for (auto& c : tv.corrs) c.x_next = project(tv.delta.R * tv.points[static_cast<std::size_t>(c.id)]);
  CHECK(code_of([&] { (void)eight_point_discrete(tv.corrs); }) == ErrorCode::InsufficientParallax);
  CHECK(code_of([&] { (void)eight_point_discrete(std::span(tv.corrs).first(7)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("project_to_essential") {
  Rng rng(5);
  Mat3 M;
  for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = rng.normal();
  const Mat3 E = project_to_essential(M);
  const Eigen::JacobiSVD<Mat3> svd(E);
  CHECK(svd.singularValues()(0) == doctest::Approx(svd.singularValues()(1)).epsilon(1e-12));
  CHECK(svd.singularValues()(2) < 1e-12);
  CHECK((project_to_essential(E) - E).norm() < 1e-12);
}

TEST_CASE("decompose_essential") {
  const auto tv = random_two_view(11, 30);
  const EssentialMatrix E{essential_from_pose({tv.delta.R, tv.delta.T.normalized()})};
  const Pose one = decompose_essential(E, std::span(tv.corrs).first(1));
  CHECK(rotation_error(one.R, tv.delta.R) < 1e-9);
  CHECK(angle_between(one.T, tv.delta.T) < 1e-9);

  // Half the points seen under T, half under -T: (R, T) and (R, -T) tie.
  std::vector<Correspondence> mixed;
  for (std::size_t j = 0; j < 10; ++j) {
    const double sign = j % 2 == 0 ? 1.0 : -1.0;
    const Vec3 X = tv.points[j];
    Correspondence c;
    c.x_t = {X.x() / X.z(), X.y() / X.z()};
    const Vec3 Y = tv.delta.R * X + sign * tv.delta.T;
    c.x_next = {Y.x() / Y.z(), Y.y() / Y.z()};
    mixed.push_back(c);
  }
  CHECK(code_of([&] { (void)decompose_essential(E, mixed); }) == ErrorCode::AmbiguousCheirality);
}

TEST_CASE("triangulation") {
  const auto tv = random_two_view(12, 80, 0.0, 2.5);
  const Triangulation tri = triangulate_up_to_scale(tv.delta, tv.corrs);
  CHECK(tri.gamma == 1.0);
  double lo = 1e300, hi = 0.0;
  for (std::size_t j = 0; j < tv.corrs.size(); ++j) {
    CHECK(tri.observable[j]);
    CHECK_FALSE(tri.negative[j]);
    const double r = tri.depths[j] / *tv.corrs[j].depth_t;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK((hi - lo) / hi < 1e-8);

  // Doubling T and every depth leaves the data, and so the depths in units
  // of ||T||, unchanged.
  Pose doubled = tv.delta;
  doubled.T *= 2.0;
  const Triangulation tri2 = triangulate_up_to_scale(doubled, tv.corrs);
  for (std::size_t j = 0; j < tv.corrs.size(); ++j) {
    CHECK(tri2.depths[j] / doubled.T.norm() == doctest::Approx(tri.depths[j] / tv.delta.T.norm()).epsilon(1e-9));
  }

  // A point on the translation axis has no parallax.
  Pose fwd;
  fwd.T = Vec3(0, 0, -1);
  const PairDepths pd = triangulate_pair(fwd, {0.0, 0.0}, {0.0, 0.0});
  CHECK_FALSE(pd.observable);
  CHECK(std::isnan(pd.z_t));
}

TEST_CASE("triangulation flags points behind a camera") {
  const auto tv = random_two_view(13, 10);
  std::vector<Correspondence> corrs = tv.corrs;
  // Swap the observations of one point so that it can only triangulate behind.
  const Vec3 X = -tv.points[0];
  const Vec3 Y = tv.delta.R * X + tv.delta.T;
  corrs[0].x_t = {X.x() / X.z(), X.y() / X.z()};
  corrs[0].x_next = {Y.x() / Y.z(), Y.y() / Y.z()};
  const Triangulation tri = triangulate_up_to_scale(tv.delta, corrs);
  CHECK(tri.negative[0]);
  for (std::size_t j = 1; j < corrs.size(); ++j) CHECK_FALSE(tri.negative[j]);
}

TEST_CASE("reprojection error") {
  const auto tv = random_two_view(14, 20);
  for (const auto& c : tv.corrs) CHECK(reprojection_error(tv.delta, c, *c.depth_t) < 1e-12);
  Correspondence c = tv.corrs[0];
  c.x_next.x += 0.001;
  CHECK(reprojection_error(tv.delta, c, *c.depth_t) == doctest::Approx(0.001).epsilon(1e-9));

  Rng rng(14);
  for (int i = 0; i < 20; ++i) {
    const double gamma = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    Pose scaled = tv.delta;
    scaled.T *= gamma;
    for (const auto& k : tv.corrs) {
      CHECK(std::abs(reprojection_error(scaled, k, gamma * *k.depth_t) - reprojection_error(tv.delta, k, *k.depth_t)) <
            1e-12);
    }
  }
  Pose back;
  back.T = Vec3(0, 0, -50);
  CHECK(code_of([&] { (void)reprojection_error(back, tv.corrs[0], 5.0); }) == ErrorCode::NonPositiveDepth);

  // Noise sets the mean error: N(0, s^2) per axis gives a Rayleigh mean s sqrt(pi/2).
  const double s = 0.5 / kCam.focal_px();
  const auto noisy = random_two_view(15, 1000);
  Rng nr(15, 1);
  double mean = 0.0;
  for (auto k : noisy.corrs) {
    k.x_next.x += s * nr.normal();
    k.x_next.y += s * nr.normal();
    mean += reprojection_error(noisy.delta, k, *k.depth_t) / 1000.0;
  }
  const double want = s * std::sqrt(std::numbers::pi / 2.0);
  const double spread = s * std::sqrt(2.0 - std::numbers::pi / 2.0);
  CHECK(std::abs(mean - want) < 3.0 * spread / std::sqrt(1000.0));
}

TEST_CASE("continuous linear solve") {
  const sim::Scene scene = sim::presets::street(3);
  const Twist truth{Vec3(0.01, -0.02, 0.005), Vec3(0.1, -0.05, -1.0)};
  std::vector<FlowObservation> flows;
  for (const auto& s : sim::render_flow_field(scene, Pose::identity(), truth, kCam)) flows.push_back({s.x, s.u});
  const ContinuousResult r = continuous_linear_solve(flows);
  CHECK(r.translation_observable);
  CHECK((r.twist.omega - truth.omega).norm() < 1e-6);
  CHECK(angle_between(r.twist.nu, truth.nu) < 1e-6);

  // Flows do not depend on the depths' scale.
  std::vector<FlowObservation> far;
  for (const auto& s : sim::render_flow_field(scene, Pose::identity(), {truth.omega, truth.nu / 10.0}, kCam)) {
    far.push_back({s.x, s.u});
  }
  const ContinuousResult r10 = continuous_linear_solve(far);
  CHECK((r10.twist.omega - r.twist.omega).norm() < 1e-9);
  CHECK(angle_between(r10.twist.nu, r.twist.nu) < 1e-9);

  const Twist spin{Vec3(0.02, 0.01, -0.01), Vec3::Zero()};
  std::vector<FlowObservation> rot;
  for (const auto& s : sim::render_flow_field(scene, Pose::identity(), spin, kCam)) rot.push_back({s.x, s.u});
  const ContinuousResult rr = continuous_linear_solve(rot);
  CHECK_FALSE(rr.translation_observable);
  CHECK((rr.twist.omega - spin.omega).norm() < 1e-9);
}

TEST_CASE("reduced motion models") {
  const NormalizedPoint x{0.2, 0.15};
  MotionModel three{MotionKind::ThreeParam, Eigen::Vector3d(-1.2, 0.0, 0.0)};
  MotionModel one{MotionKind::OneParam, Eigen::VectorXd::Constant(1, -1.2)};
  const Flow2 a = predict_flow(three, x, 7.0), b = predict_flow(one, x, 7.0);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);

  MotionModel circ{MotionKind::Circular, Eigen::VectorXd::Zero(1)};
  const Twist straight = circ.twist();
  CHECK(straight.omega.isZero(0.0));
  CHECK((straight.nu - Vec3(0, 0, -1)).norm() < 1e-15);
  const Pose cp = circular_pose(0.0);
  CHECK(cp.R.isApprox(Mat3::Identity()));

  // Ground plane: u = -a y x + w2 (1 + x^2) - w1 x y for n = (0, 1, 0), d = 1.
  const double A = -0.8, w1 = 0.01, w2 = -0.02;
  MotionModel ground{MotionKind::GroundPlane, Eigen::Vector3d(A, w1, w2)};
  const Flow2 g = predict_flow(ground, x, Plane{Vec3::UnitY(), 1.0});
  CHECK(g.u == doctest::Approx(-A * x.y * x.x + w2 * (1 + x.x * x.x) - w1 * x.x * x.y).epsilon(1e-12));
  const Flow2 g_full = continuous_flow(ground.twist(), x, 1.0 / x.y);
  CHECK(g.u == doctest::Approx(g_full.u).epsilon(1e-12));
  CHECK(g.v == doctest::Approx(g_full.v).epsilon(1e-12));
  CHECK(code_of([&] { (void)predict_flow(ground, NormalizedPoint{0.1, -0.2}, Plane{Vec3::UnitY(), 1.0}); }) ==
        ErrorCode::NonPositiveDepth);

  MotionModel bad{MotionKind::OneParam, Eigen::VectorXd::Zero(2)};
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("circular one-point estimate") {
  const sim::Scene scene = sim::presets::street(5);
  for (double theta : {0.05, -0.03}) {
    const sim::Trajectory traj = sim::integrate_trajectory(sim::presets::circular_twists(2, theta), 1.0);
    const sim::TrackSet ts = sim::render_correspondences(scene, traj, 0, kCam);
    CHECK(rotation_error(circular_pose(theta).R, ts.delta.R) < 1e-12);
    CHECK(angle_between(circular_pose(theta).T, ts.delta.T) < 1e-12);
    CHECK(std::abs(estimate_circular_one_point(ts.corrs).theta - theta) < 1e-6);
  }
  const sim::Trajectory line = sim::integrate_trajectory(sim::presets::circular_twists(2, 0.0), 1.0);
  CHECK(std::abs(estimate_circular_one_point(sim::render_correspondences(scene, line, 0, kCam).corrs).theta) < 1e-9);
  CHECK(code_of([] { (void)estimate_circular_one_point({}); }) == ErrorCode::NoCorrespondences);
}

TEST_CASE("scale from the ground plane") {
  Rng rng(21);
  const double gamma = 3.7;
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(rng.uniform(-5, 5) / gamma, 1.5 / gamma, rng.uniform(4, 40) / gamma);
  const GroundScale clean = scale_from_ground_plane(pts, 1.5);
  CHECK(clean.gamma == doctest::Approx(gamma).epsilon(1e-9));

  for (int i = 0; i < 43; ++i) pts.emplace_back(rng.uniform(-5, 5) / gamma, rng.uniform(-3, 1) / gamma, rng.uniform(4, 40) / gamma);
  const GroundScale dirty = scale_from_ground_plane(pts, 1.5);
  CHECK(std::abs(dirty.gamma / gamma - 1.0) < 0.01);
  std::size_t kept = 0;
  for (bool b : dirty.inliers) kept += b ? 1 : 0;
  CHECK(kept >= 100);

  std::vector<Vec3> line;
  for (int i = 0; i < 20; ++i) line.emplace_back(0.0, 1.5, 4.0 + i);
  CHECK(code_of([&] { (void)scale_from_ground_plane(line, 1.5); }) == ErrorCode::DegeneratePlane);
}
