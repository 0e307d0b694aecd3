#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <unistd.h>

#include "cli.hpp"
#include "support.hpp"
#include "vokit/error.hpp"
#include "vokit/sim.hpp"

using namespace vokit;
using namespace vokit::cli;
namespace fs = std::filesystem;

namespace {

const CameraIntrinsics kCam{};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("vokit_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<FrameInput> drive_frames(std::uint64_t seed, std::size_t n, std::vector<Pose>& gt) {
  const sim::Scene scene = sim::presets::street(seed);
  const sim::Trajectory traj = sim::integrate_trajectory(sim::presets::forward_drive_twists(n), 1.0);
  std::vector<FrameInput> frames;
  for (std::size_t k = 0; k + 1 < traj.frames(); ++k) {
    frames.push_back({sim::render_correspondences(scene, traj, k, kCam).corrs, {}});
  }
  gt.clear();
  for (std::size_t k = 0; k < traj.frames(); ++k) gt.push_back(traj.camera_to_world(k));
  return frames;
}

}  // namespace

TEST_CASE("odometry_config") {
  io::Config cfg;
  const OdometryConfig d = odometry_config(cfg);
  CHECK(d.outlier == OutlierScheme::Ransac);
  CHECK(d.ba == ego::BAMode::Full);
  CHECK(d.scale == ScaleSource::Stereo);
  CHECK(d.focal_px == 500.0);

  cfg.set("odometry.outlier", "masor_mu");
  cfg.set("odometry.ba", "none");
  cfg.set("odometry.scale", "height");
  const OdometryConfig c = odometry_config(cfg);
  CHECK(c.outlier == OutlierScheme::MasorMu);
  CHECK_FALSE(c.ba.has_value());
  CHECK(c.scale == ScaleSource::Height);

  cfg.set("odometry.outlier", "lmeds");
  CHECK_THROWS_AS(odometry_config(cfg), Error);
  cfg.set("odometry.outlier", "ransac");
  cfg.set("odometry.camera_height", "-1");
  CHECK_THROWS_AS(odometry_config(cfg), Error);
}

TEST_CASE("evaluate") {
  std::vector<Pose> gt;
  (void)drive_frames(1, 6, gt);

  const EvaluationReport same = evaluate(gt, gt);
  CHECK(same.frames.size() == gt.size() - 1);
  CHECK(same.rotation.max < 1e-12);
  CHECK(same.direction.max < 1e-7);
  CHECK(same.scale_ratio.mean == doctest::Approx(1.0).epsilon(1e-12));

  // A one-degree yaw bias in every relative motion.
  const double bias = std::numbers::pi / 180.0;
  std::vector<Pose> biased{gt[0]};
  for (std::size_t k = 0; k + 1 < gt.size(); ++k) {
    Pose rel = compose_pose(invert_pose(gt[k + 1]), gt[k]);
    rel.R = exp_rotation(Vec3(0.0, bias, 0.0)) * rel.R;
    biased.push_back(compose_pose(biased.back(), invert_pose(rel)));
  }
  const EvaluationReport yaw = evaluate(biased, gt);
  for (const auto& f : yaw.frames) CHECK(std::abs(f.rotation - bias) < 1e-9);

  std::vector<Pose> scaled = gt;
  for (Pose& p : scaled) p.T *= 2.5;
  const EvaluationReport sc = evaluate(scaled, gt);
  for (const auto& f : sc.frames) {
    CHECK(f.scale_ratio == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(f.direction < 1e-7);
  }

  std::vector<Pose> shorter(gt.begin(), gt.end() - 1);
  try {
    (void)evaluate(shorter, gt);
    FAIL("expected FrameMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameMismatch);
  }
}

TEST_CASE("estimate_frame") {
  SUBCASE("pure rotation") {
    const sim::Scene scene = sim::presets::street(2);
    const std::vector<Twist> tw(2, Twist{Vec3(0.0, 0.02, 0.0), Vec3::Zero()});
    const sim::Trajectory traj = sim::integrate_trajectory(tw, 1.0);
    const sim::TrackSet ts = sim::render_correspondences(scene, traj, 0, kCam);
    const FrameEstimate est = estimate_frame({ts.corrs, {}}, OdometryConfig{});
    CHECK(est.diag.rotation_only);
    CHECK_FALSE(est.diag.fallback);
    CHECK(est.delta.T.norm() == 0.0);
    CHECK(testing::rotation_error(est.delta.R, ts.delta.R) < 1e-9);
  }

  SUBCASE("too few features falls back") {
    const auto tv = testing::random_two_view(3, 5);
    const FrameEstimate est = estimate_frame({tv.corrs, {}}, OdometryConfig{});
    CHECK(est.diag.fallback);
    CHECK(est.diag.error == "NoCorrespondences");
    CHECK(est.delta.R == Mat3::Identity());
  }
}

TEST_CASE("run_odometry") {
  std::vector<Pose> gt;
  const auto frames = drive_frames(3, 8, gt);

  OdometryConfig stereo;
  const OdometryRun a = run_odometry(frames, stereo);
  CHECK_FALSE(a.any_fallback);
  REQUIRE(a.camera_to_world.size() == gt.size());
  const EvaluationReport ra = evaluate(a.camera_to_world, gt);
  CHECK(ra.rotation.max < 1e-5);
  CHECK(ra.direction.max < 1e-4);
  CHECK(std::abs(ra.scale_ratio.max - 1.0) < 1e-6);
  CHECK(std::abs(ra.scale_ratio.mean - 1.0) < 1e-6);

  OdometryConfig height;
  height.scale = ScaleSource::Height;
  const OdometryRun b = run_odometry(frames, height);
  CHECK_FALSE(b.any_fallback);
  const EvaluationReport rb = evaluate(b.camera_to_world, gt);
  for (std::size_t k = 0; k < ra.frames.size(); ++k) {
    CHECK(rb.frames[k].scale_ratio == doctest::Approx(ra.frames[k].scale_ratio).epsilon(1e-2));
  }

  for (OutlierScheme s : {OutlierScheme::None, OutlierScheme::MasorSigma, OutlierScheme::MasorMu}) {
    OdometryConfig c;
    c.outlier = s;
    const OdometryRun r = run_odometry(frames, c);
    CHECK_FALSE(r.any_fallback);
    CHECK(evaluate(r.camera_to_world, gt).rotation.max < 1e-5);
  }
}

TEST_CASE("subcommands on a small dataset") {
  TempDir one("a");
  TempDir two("b");
  io::Config cfg;
  cfg.set("sim.frames", "4");
  cfg.set("sim.width", "160");
  cfg.set("sim.height", "120");
  cfg.set("sim.seed", "5");
  cfg.set("io.dataset", one.path.string());
  REQUIRE(cmd_simulate(cfg) == 0);
  cfg.set("io.dataset", two.path.string());
  REQUIRE(cmd_simulate(cfg) == 0);

  for (const char* rel : {"poses_gt.txt", "corr/000000.csv", "labels/000002.csv", "frames/000003.pgm"}) {
    CAPTURE(rel);
    REQUIRE(fs::exists(one.path / rel));
    CHECK(bytes_of(one.path / rel) == bytes_of(two.path / rel));
  }
  const io::Config manifest = io::Config::load(one.path / "manifest.ini");
  CHECK(manifest.get_int("sim.seed", 0) == 5);
  CHECK(manifest.get_string("sim.scenario", "") == "drive");

  cfg.set("io.dataset", one.path.string());
  CHECK(cmd_odometry(cfg) == 0);
  CHECK(fs::exists(one.path / "poses_est.txt"));
  CHECK(fs::exists(one.path / "diagnostics.csv"));
  cfg.set("evaluate.csv", (one.path / "evaluate.csv").string());
  CHECK(cmd_evaluate(cfg) == 0);
  CHECK(fs::exists(one.path / "evaluate.csv"));

  CHECK(cmd_track(cfg) == 0);
  CHECK(fs::exists(one.path / "tracks" / "000000.csv"));
  CHECK_FALSE(io::read_tracks(one.path / "tracks" / "000000.csv").empty());
}

TEST_CASE("segment subcommand") {
  TempDir dir("seg");
  io::Config cfg;
  cfg.set("sim.scenario", "multibody");
  cfg.set("sim.images", "false");
  cfg.set("sim.seed", "2");
  cfg.set("io.dataset", dir.path.string());
  REQUIRE(cmd_simulate(cfg) == 0);
  CHECK_FALSE(fs::exists(dir.path / "frames"));
  cfg.set("segment.threshold_px", "0.001");
  CHECK(cmd_segment(cfg) == 0);
  std::size_t owned = 0;
  std::ifstream in(dir.path / "segments" / "000000.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) owned += line.ends_with(",-1") ? 0 : 1;
  CHECK(owned > 0);
}

TEST_CASE("csv reference") {
  const std::string ref = csv_reference();
  CHECK(ref.find("id,x1,y1,x2,y2,depth") != std::string::npos);
  CHECK(ref.find("feature_id,segment_id") != std::string::npos);
  CHECK(frame_file("d", 12, "csv") == fs::path("d") / "000012.csv");
}
