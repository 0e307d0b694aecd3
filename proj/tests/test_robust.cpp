#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vokit/error.hpp"
#include "vokit/robust.hpp"
#include "vokit/sim.hpp"

using namespace vokit;
using namespace vokit::robust;
using vokit::testing::angle_between;
using vokit::testing::random_two_view;
using vokit::testing::rotation_error;

namespace {

const CameraIntrinsics kCam{};

// Scalar location model for exercising the generic templates.
std::vector<double> samples_with_outliers(std::size_t n, std::size_t bad) {
  Rng rng(4);
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(i < bad ? rng.uniform(50.0, 100.0) : 10.0 + 0.01 * rng.normal());
  return v;
}

}  // namespace

TEST_CASE("generic ransac") {
  const std::vector<double> v = samples_with_outliers(100, 30);
  const auto solve = [&](std::span<const std::size_t> s) -> std::optional<double> { return v[s[0]]; };
  const auto residual = [&](const double& m, std::size_t i) { return std::abs(v[i] - m); };
  RansacConfig cfg;
  cfg.min_sample_size = 1;
  cfg.inlier_threshold = 0.1;
  const auto a = ransac<double>(v.size(), solve, residual, cfg);
  const auto b = ransac<double>(v.size(), solve, residual, cfg);
  CHECK(a.model == b.model);
  CHECK(a.inliers == b.inliers);
  CHECK(a.iterations == b.iterations);
  CHECK(a.support == 70);
  CHECK(a.support_fraction == doctest::Approx(0.7));
  CHECK(a.iterations < cfg.max_iterations);

  const auto never = [](std::span<const std::size_t>) -> std::optional<double> { return std::nullopt; };
  CHECK_THROWS_AS(ransac<double>(v.size(), never, residual, cfg), Error);
  cfg.min_sample_size = 200;
  CHECK_THROWS_AS(ransac<double>(v.size(), solve, residual, cfg), Error);
}

TEST_CASE("sampson distance") {
  const auto tv = random_two_view(1, 20);
  const Mat3 E = skew(tv.delta.T) * tv.delta.R;
  for (const auto& c : tv.corrs) CHECK(sampson_distance(E, c) < 1e-12);
  ego::Correspondence moved = tv.corrs[0];
  moved.x_next.x += 0.01;
  const double d = sampson_distance(E, moved);
  CHECK(d > 0.0);
  CHECK(d <= 0.01 + 1e-12);
}

TEST_CASE("ransac_essential") {
  SUBCASE("clean data keeps every feature") {
    const auto tv = random_two_view(2, 80);
    const auto r = ransac_essential(tv.corrs);
    CHECK(r.support == tv.corrs.size());
    CHECK(r.iterations == 1);
    CHECK(rotation_error(r.model.pose.R, tv.delta.R) < 1e-6);
    CHECK(angle_between(r.model.pose.T, tv.delta.T) < 1e-6);
  }

  SUBCASE("independently moving object") {
    std::size_t movers = 0, kept_movers = 0, statics = 0, lost = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto data = sim::presets::multi_body(seed, 1);
      const sim::TrackSet ts = sim::render_correspondences(data.scene, data.trajectory, 0, kCam);
      // At zero noise a tight threshold; at 1 px forward motion lets hybrid
      // models gather mover support.
      RansacConfig cfg;
      cfg.seed = seed;
      cfg.inlier_threshold = 1e-6;
      const auto r = ransac_essential(ts.corrs, cfg);
      for (std::size_t i = 0; i < ts.corrs.size(); ++i) {
        if (ts.labels[i] == sim::Label::Mover) {
          ++movers;
          kept_movers += r.inliers[i] ? 1 : 0;
        } else {
          ++statics;
          lost += r.inliers[i] ? 0 : 1;
        }
      }
      CHECK(rotation_error(r.model.pose.R, ts.delta.R) < 1e-8);
    }
    REQUIRE(movers > 0);
    CHECK(static_cast<double>(movers) / static_cast<double>(movers + statics) > 0.25);
    CHECK(kept_movers <= movers / 100);
    CHECK(lost <= statics / 100);
  }

  SUBCASE("no common motion") {
    Rng rng(9);
    std::vector<ego::Correspondence> scrambled;
    for (int i = 0; i < 100; ++i) {
      ego::Correspondence c;
      c.x_t = {rng.uniform(-0.6, 0.6), rng.uniform(-0.4, 0.4)};
      c.x_next = {rng.uniform(-0.6, 0.6), rng.uniform(-0.4, 0.4)};
      scrambled.push_back(c);
    }
    try {
      const auto r = ransac_essential(scrambled);
      CHECK(r.support_fraction < 0.2);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoConsensus);
    }
  }

  SUBCASE("determinism") {
    auto tv = random_two_view(3, 60, 1e-3);
    // Push the first features off their epipolar lines.
    const Mat3 E = skew(tv.delta.T) * tv.delta.R;
    for (std::size_t i = 0; i < 12; ++i) {
      const Vec3 l = E * tv.corrs[i].x_t.homogeneous();
      const Eigen::Vector2d n = l.head<2>().normalized();
      tv.corrs[i].x_next.x += 0.05 * n.x();
      tv.corrs[i].x_next.y += 0.05 * n.y();
    }
    RansacConfig cfg;
    cfg.seed = 77;
    const auto a = ransac_essential(tv.corrs, cfg);
    const auto b = ransac_essential(tv.corrs, cfg);
    CHECK(a.inliers == b.inliers);
    CHECK(a.model.E == b.model.E);
    for (std::size_t i = 0; i < 12; ++i) CHECK_FALSE(a.inliers[i]);
  }
}

TEST_CASE("generic masor") {
  const std::vector<double> v = samples_with_outliers(100, 10);
  const auto fit = [&](const std::vector<bool>& mask, const double*) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (mask[i]) {
        s += v[i];
        ++n;
      }
    }
    return s / n;
  };
  const auto err = [&](const double& m, std::size_t i) { return std::abs(v[i] - m); };

  MasorConfig sigma;
  const auto a = masor<double>(v.size(), fit, err, sigma);
  for (std::size_t i = 0; i < 10; ++i) CHECK_FALSE(a.inliers[i]);
  CHECK(a.model == doctest::Approx(10.0).epsilon(1e-2));
  for (std::size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i].set_size <= a.trace[i - 1].set_size);

  MasorConfig mu;
  mu.criterion = MasorCriterion::Mu9x;
  CHECK(mu.iterations() == 20);
  CHECK(sigma.iterations() == 10);
  // The mean-based criterion only removes errors far above the mean, so it
  // needs a cleaner set.
  const std::vector<double> w = samples_with_outliers(100, 3);
  const auto fit_w = [&](const std::vector<bool>& mask, const double*) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (mask[i]) {
        s += w[i];
        ++n;
      }
    }
    return s / n;
  };
  const auto err_w = [&](const double& m, std::size_t i) { return std::abs(w[i] - m); };
  const auto b = masor<double>(w.size(), fit_w, err_w, mu);
  for (std::size_t i = 0; i < 3; ++i) CHECK_FALSE(b.inliers[i]);
  const auto loose = masor<double>(v.size(), fit, err, mu);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < 10; ++i) kept += loose.inliers[i] ? 1 : 0;
  CHECK(kept > 0);

  const std::vector<double> exact(50, 3.0);
  const auto fit_exact = [&](const std::vector<bool>&, const double*) { return 3.0; };
  const auto err_exact = [&](const double& m, std::size_t i) { return std::abs(exact[i] - m); };
  const auto c = masor<double>(exact.size(), fit_exact, err_exact, sigma);
  REQUIRE(c.trace.size() == 1);
  CHECK(c.trace[0].removed == 0);

  // A spread that always trims the upper tail eventually collapses the set.
  std::vector<double> ramp;
  for (int i = 0; i < 20; ++i) ramp.push_back(std::exp(i));
  const auto fit_zero = [](const std::vector<bool>&, const double*) { return 0.0; };
  const auto err_ramp = [&](const double&, std::size_t i) { return ramp[i]; };
  MasorConfig tight;
  tight.sigma_factor = 0.0;
  tight.min_features = 15;
  CHECK_THROWS_AS(masor<double>(ramp.size(), fit_zero, err_ramp, tight), Error);
}

TEST_CASE("masor_stereo") {
  SUBCASE("noiseless data trims nothing") {
    const auto tv = random_two_view(5, 60);
    const auto r = masor_stereo(tv.corrs);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].removed == 0);
    CHECK(rotation_error(r.model.R, tv.delta.R) < 1e-8);
    CHECK((r.model.T - tv.delta.T).norm() < 1e-8);
  }

  SUBCASE("gross mismatches are trimmed") {
    const sim::Scene scene = sim::presets::street(6);
    const sim::Trajectory traj = sim::integrate_trajectory(sim::presets::forward_drive_twists(2), 1.0);
    sim::NoiseSpec ns;
    ns.pixel_sigma = 0.3;
    ns.outlier_fraction = 0.1;
    ns.seed = 6;
    const sim::TrackSet ts = sim::render_correspondences(scene, traj, 0, kCam, ns);
    MasorConfig sigma;
    MasorConfig mu;
    mu.criterion = MasorCriterion::Mu9x;
    const auto a = masor_stereo(ts.corrs, sigma);
    const auto b = masor_stereo(ts.corrs, mu);
    std::size_t kept_a = 0, kept_b = 0, planted = 0;
    for (std::size_t i = 0; i < ts.corrs.size(); ++i) {
      if (ts.labels[i] != sim::Label::Outlier) continue;
      ++planted;
      kept_a += a.inliers[i] ? 1 : 0;
      kept_b += b.inliers[i] ? 1 : 0;
    }
    CHECK(planted == ts.planted);
    CHECK(kept_a <= planted / 20);
    CHECK(kept_b >= kept_a);
    CHECK(b.trace.size() <= a.trace.size());
    CHECK(rotation_error(a.model.R, ts.delta.R) < 1e-3);
  }

  SUBCASE("missing depth") {
    auto tv = random_two_view(7, 20);
    tv.corrs[4].depth_t.reset();
    CHECK_THROWS_AS(masor_stereo(tv.corrs), Error);
  }
}

TEST_CASE("reliability filter") {
  const std::vector<ReliabilityInput> in{
      {1e-3, 2.0, 10.0},
      {1e-7, 2.0, 10.0},
      {1e-3, 0.1, 10.0},
      {1e-3, 2.0, 90.0},
      {1e-3, 2.0, std::nullopt},
  };
  const std::vector<bool> keep = reliability_filter(in);
  CHECK(keep == std::vector<bool>{true, false, false, false, true});

  // Tightening any threshold never keeps more.
  ReliabilityConfig strict;
  strict.min_score = 1e-2;
  const std::vector<bool> fewer = reliability_filter(in, strict);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK((!fewer[i] || keep[i]));
}

TEST_CASE("positive depth check") {
  const auto tv = random_two_view(8, 40);
  for (const auto& c : tv.corrs) {
    const VerdictResult v = positive_depth_check(tv.delta, c);
    CHECK(v.verdict == Verdict::Static);
    CHECK(v.residual > 0.0);
  }

  SUBCASE("overtaking vehicle") {
    const auto over = sim::presets::overtaking(2);
    const sim::TrackSet ts = sim::render_correspondences(over.scene, over.trajectory, 0, kCam);
    std::size_t flagged = 0, movers = 0;
    for (std::size_t i = 0; i < ts.corrs.size(); ++i) {
      if (ts.labels[i] != sim::Label::Mover) continue;
      ++movers;
      flagged += positive_depth_check(ts.delta, ts.corrs[i]).verdict == Verdict::Moving ? 1 : 0;
    }
    REQUIRE(movers > 0);
    CHECK(flagged == movers);
  }

  SUBCASE("zero parallax") {
    ego::Correspondence c;
    c.x_t = {0.0, 0.0};
    c.x_next = {0.0, 0.0};
    Pose fwd;
    fwd.T = Vec3(0.0, 0.0, -1.0);
    CHECK(positive_depth_check(fwd, c).verdict == Verdict::Undecided);
  }

  SUBCASE("translation scale does not matter") {
    Pose scaled = tv.delta;
    scaled.T *= 4.0;
    for (const auto& c : tv.corrs) {
      CHECK(positive_depth_check(scaled, c).verdict == positive_depth_check(tv.delta, c).verdict);
    }
  }
}

TEST_CASE("positive height check") {
  const auto prec = sim::presets::preceding(3);
  const sim::TrackSet ts = sim::render_correspondences(prec.scene, prec.trajectory, 0, kCam);
  std::size_t movers = 0, flagged = 0, statics = 0, false_alarms = 0, not_applicable = 0;
  for (std::size_t i = 0; i < ts.corrs.size(); ++i) {
    const VerdictResult v = positive_height_check(ts.delta, ts.corrs[i], prec.road);
    not_applicable += v.verdict == Verdict::NotApplicable ? 1 : 0;
    if (ts.labels[i] == sim::Label::Mover) {
      ++movers;
      flagged += v.verdict == Verdict::Moving ? 1 : 0;
    } else {
      ++statics;
      false_alarms += v.verdict == Verdict::Moving ? 1 : 0;
    }
  }
  REQUIRE(movers > 0);
  CHECK(flagged == movers);
  CHECK(false_alarms == 0);
  CHECK(not_applicable > 0);

  // A point above the horizon has no road intersection.
  ego::Correspondence sky;
  sky.x_t = {0.0, -0.3};
  sky.x_next = {0.0, -0.31};
  CHECK(positive_height_check(ts.delta, sky, prec.road).verdict == Verdict::NotApplicable);
  CHECK(to_string(Verdict::Moving) == "MOVING");
}

TEST_CASE("sequential segmentation") {
  for (int bodies : {0, 1, 2}) {
    CAPTURE(bodies);
    const auto data = sim::presets::multi_body(10 + bodies, bodies);
    const sim::TrackSet ts = sim::render_correspondences(data.scene, data.trajectory, 0, kCam);
    SegmentationConfig sc;
    sc.ransac.inlier_threshold = 1e-6;
    sc.ransac.seed = 3;
    const Segmentation seg = segment_motions_sequential(ts.corrs, sc);
    CHECK(seg.segments.size() == static_cast<std::size_t>(bodies + 1));
    for (std::size_t i = 0; i < ts.corrs.size(); ++i) {
      int owners = seg.residue[i] ? 1 : 0;
      for (const auto& s : seg.segments) owners += s.mask[i] ? 1 : 0;
      CHECK(owners == 1);
    }
    for (const auto& c : ts.corrs) CHECK(multibody_residual(seg.segments, c) < 1e-10);
  }
  CHECK(multibody_residual({}, random_two_view(1, 1).corrs[0]) == 1.0);
}
