#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "vokit/bundle_adjustment.hpp"
#include "vokit/error.hpp"
#include "vokit/flow.hpp"
#include "vokit/image.hpp"
#include "vokit/sim.hpp"

namespace vokit::cli {

namespace fs = std::filesystem;

std::filesystem::path frame_file(const fs::path& dir, std::size_t k, const std::string& ext) {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.%s", k, ext.c_str());
  return dir / name;
}

namespace {

CameraIntrinsics camera(const io::Config& cfg) {
  CameraIntrinsics k;
  k.f = cfg.get_double("camera.f", 1.0);
  k.s_x = cfg.get_double("camera.sx", 500.0);
  k.s_y = cfg.get_double("camera.sy", 500.0);
  k.s_theta = cfg.get_double("camera.stheta", 0.0);
  k.o_x = cfg.get_double("camera.ox", 320.0);
  k.o_y = cfg.get_double("camera.oy", 240.0);
  k.validate();
  return k;
}

fs::path dataset_dir(const io::Config& cfg) {
  const std::string dir = cfg.get_string("io.dataset", "");
  if (dir.empty()) fail(ErrorCode::InvalidArgument, "io.dataset is not set");
  return dir;
}

std::uint64_t seed_of(const io::Config& cfg) { return static_cast<std::uint64_t>(cfg.get_int("sim.seed", 1)); }

std::vector<ego::Correspondence> select(std::span<const ego::Correspondence> corrs, const std::vector<bool>& mask) {
  std::vector<ego::Correspondence> out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i]) out.push_back(corrs[i]);
  }
  return out;
}

std::size_t count(const std::vector<bool>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

bool all_have_depth(std::span<const ego::Correspondence> corrs) {
  return std::all_of(corrs.begin(), corrs.end(), [](const auto& c) { return c.depth_t.has_value(); });
}

std::vector<bool> masor_mono(std::span<const ego::Correspondence> corrs, const robust::MasorConfig& mc,
                             std::vector<robust::MasorIteration>& trace) {
  auto fit = [&](const std::vector<bool>& mask, const Mat3*) {
    const auto subset = select(corrs, mask);
    return ego::eight_point_discrete(subset).E;
  };
  auto error = [&](const Mat3& E, std::size_t i) { return robust::sampson_distance(E, corrs[i]); };
  auto res = robust::masor<Mat3>(corrs.size(), fit, error, mc);
  trace = res.trace;
  return res.inliers;
}

Summary summarize(std::vector<double> v) {
  Summary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  s.max = v.back();
  return s;
}

Pose relative(const std::vector<Pose>& camera_to_world, std::size_t k) {
  return compose_pose(invert_pose(camera_to_world[k + 1]), camera_to_world[k]);
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) return 0;
  std::size_t n = 0;
  while (fs::exists(frame_file(dir, n, ext))) ++n;
  return n;
}

std::vector<sim::TexturedPlane> world_planes(std::uint64_t seed) {
  std::vector<sim::TexturedPlane> planes;
  auto add = [&](const Vec3& n, double d, const Vec3& u, const Vec3& v, std::uint64_t s) {
    sim::TexturedPlane p;
    p.plane = {n, d};
    p.origin = d * n;
    p.axis_u = u;
    p.axis_v = v;
    p.texture = sim::Texture::random(seed * 16 + s, 6, 1.0, 4.0, 0.45);
    planes.push_back(p);
  };
  add(Vec3::UnitY(), sim::kCameraHeight, Vec3::UnitX(), Vec3::UnitZ(), 1);
  add(-Vec3::UnitX(), 6.0, Vec3::UnitZ(), Vec3::UnitY(), 2);
  add(Vec3::UnitX(), 6.0, Vec3::UnitZ(), Vec3::UnitY(), 3);
  add(Vec3::UnitZ(), 120.0, Vec3::UnitX(), Vec3::UnitY(), 4);
  return planes;
}

}  // namespace

OdometryConfig odometry_config(const io::Config& cfg) {
  OdometryConfig c;
  const std::string outlier = cfg.get_string("odometry.outlier", "ransac");
  if (outlier == "none") {
    c.outlier = OutlierScheme::None;
  } else if (outlier == "ransac") {
    c.outlier = OutlierScheme::Ransac;
  } else if (outlier == "masor_sigma") {
    c.outlier = OutlierScheme::MasorSigma;
  } else if (outlier == "masor_mu") {
    c.outlier = OutlierScheme::MasorMu;
  } else {
    fail(ErrorCode::InvalidArgument, "odometry.outlier must be none|ransac|masor_sigma|masor_mu");
  }
  const std::string ba = cfg.get_string("odometry.ba", "full");
  if (ba == "none") {
    c.ba.reset();
  } else if (ba == "motion") {
    c.ba = ego::BAMode::MotionOnly;
  } else if (ba == "structure") {
    c.ba = ego::BAMode::StructureOnly;
  } else if (ba == "full") {
    c.ba = ego::BAMode::Full;
  } else {
    fail(ErrorCode::InvalidArgument, "odometry.ba must be none|motion|structure|full");
  }
  const std::string scale = cfg.get_string("odometry.scale", "stereo");
  if (scale == "none") {
    c.scale = ScaleSource::None;
  } else if (scale == "stereo") {
    c.scale = ScaleSource::Stereo;
  } else if (scale == "height") {
    c.scale = ScaleSource::Height;
  } else {
    fail(ErrorCode::InvalidArgument, "odometry.scale must be none|stereo|height");
  }
  c.camera_height = cfg.get_double("odometry.camera_height", 1.5);
  if (!(c.camera_height > 0.0)) fail(ErrorCode::InvalidArgument, "odometry.camera_height must be positive");
  c.focal_px = camera(cfg).focal_px();
  c.ransac_threshold_px = cfg.get_double("odometry.ransac_threshold_px", 1.0);
  c.ransac_iterations = cfg.get_int("odometry.ransac_iterations", 1000);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("odometry.seed", 1));
  c.reliability.min_score = cfg.get_double("odometry.min_score", c.reliability.min_score);
  c.reliability.min_flow_px = cfg.get_double("odometry.min_flow_px", c.reliability.min_flow_px);
  c.reliability.max_depth = cfg.get_double("odometry.max_depth", c.reliability.max_depth);
  if (!(c.ransac_threshold_px > 0.0) || c.ransac_iterations < 1) {
    fail(ErrorCode::InvalidArgument, "odometry RANSAC settings out of range");
  }
  return c;
}

FrameEstimate estimate_frame(const FrameInput& input, const OdometryConfig& cfg, std::size_t frame) {
  FrameEstimate est;
  auto& d = est.diag;
  d.frame = frame;
  d.input = input.corrs.size();
  try {
    std::vector<robust::ReliabilityInput> rel(input.corrs.size());
    for (std::size_t i = 0; i < input.corrs.size(); ++i) {
      const auto& c = input.corrs[i];
      rel[i].score = input.scores.empty() ? std::numeric_limits<double>::infinity() : input.scores[i];
      rel[i].flow_px = (c.x_next.vec() - c.x_t.vec()).norm() * cfg.focal_px;
      if (cfg.scale == ScaleSource::Stereo) rel[i].depth = c.depth_t;
    }
    std::vector<ego::Correspondence> kept = select(input.corrs, robust::reliability_filter(rel, cfg.reliability));
    d.reliable = kept.size();
    if (kept.size() < cfg.min_features) {
      // Nothing moves enough to pass the flow filter: possibly a standstill or a
      // pure rotation, both of which the rotation fit below handles.
      kept = input.corrs;
    }
    if (kept.size() < cfg.min_features) fail(ErrorCode::NoCorrespondences, "too few features");

    const Mat3 R_only = ego::fit_rotation(kept);
    if (ego::rotation_residual(R_only, kept) < ego::EightPointConfig{}.parallax_min) {
      d.rotation_only = true;
      d.error = std::string(to_string(ErrorCode::InsufficientParallax));
      d.inliers = kept.size();
      est.delta = {R_only, Vec3::Zero()};
      return est;
    }

    std::vector<bool> mask(kept.size(), true);
    const double threshold = cfg.ransac_threshold_px / cfg.focal_px;
    switch (cfg.outlier) {
      case OutlierScheme::None:
        break;
      case OutlierScheme::Ransac: {
        robust::RansacConfig rc;
        rc.max_iterations = cfg.ransac_iterations;
        rc.inlier_threshold = threshold;
        rc.seed = splitmix64(cfg.seed + d.frame);
        mask = robust::ransac_essential(kept, rc).inliers;
        break;
      }
      case OutlierScheme::MasorSigma:
      case OutlierScheme::MasorMu: {
        robust::MasorConfig mc;
        mc.criterion = cfg.outlier == OutlierScheme::MasorSigma ? robust::MasorCriterion::Sigma1p5
                                                                : robust::MasorCriterion::Mu9x;
        if (cfg.scale == ScaleSource::Stereo && all_have_depth(kept)) {
          const auto res = robust::masor_stereo(kept, mc);
          mask = res.inliers;
          d.masor_trace = res.trace;
        } else {
          mask = masor_mono(kept, mc, d.masor_trace);
        }
        break;
      }
    }
    std::vector<ego::Correspondence> inl = select(kept, mask);
    d.inliers = inl.size();

    Pose pose = ego::decompose_essential(ego::eight_point_discrete(inl), inl);
    const ego::Triangulation tri = ego::triangulate_up_to_scale(pose, inl);
    std::vector<ego::Correspondence> good;
    std::vector<double> depths;
    for (std::size_t j = 0; j < inl.size(); ++j) {
      if (tri.observable[j] && !tri.negative[j]) {
        good.push_back(inl[j]);
        depths.push_back(tri.depths[j]);
      }
    }
    if (good.size() < cfg.min_features) fail(ErrorCode::AmbiguousCheirality, "too few points in front of both cameras");

    if (cfg.ba) {
      ego::BAProblem problem;
      problem.corrs = good;
      problem.pose = pose;
      problem.depths = depths;
      problem.mode = *cfg.ba;
      const ego::BAResult r = ego::bundle_adjust(problem);
      d.ba_initial = r.trace.front();
      d.ba_final = r.trace.back();
      pose = r.pose;
      depths = r.depths;
      // Keep the unit-translation gauge of the depths.
      const double t = pose.T.norm();
      if (t > 0.0) {
        pose.T /= t;
        for (double& z : depths) z /= t;
      }
    }

    switch (cfg.scale) {
      case ScaleSource::None:
        break;
      case ScaleSource::Stereo: {
        // Least squares in inverse depth, 1/Z_est = s / Z_measured, where
        // triangulation noise is roughly uniform across the scene.
        double num = 0.0;
        double den = 0.0;
        for (std::size_t j = 0; j < good.size(); ++j) {
          if (!good[j].depth_t || !(*good[j].depth_t > 0.0)) continue;
          const double m = 1.0 / *good[j].depth_t;
          num += m / depths[j];
          den += m * m;
        }
        if (!(den > 0.0)) fail(ErrorCode::InvalidArgument, "stereo scale needs measured depths");
        d.scale = num / den;
        break;
      }
      case ScaleSource::Height: {
        std::vector<Vec3> pts;
        for (std::size_t j = 0; j < good.size(); ++j) pts.push_back(depths[j] * good[j].x_t.homogeneous());
        ego::GroundScaleConfig gc;
        gc.normal_prior = Vec3::UnitY();
        gc.seed = splitmix64(cfg.seed + 0x51 + d.frame);
        d.scale = ego::scale_from_ground_plane(pts, cfg.camera_height, gc).gamma;
        break;
      }
    }
    pose.T *= d.scale;
    est.delta = pose;
  } catch (const Error& e) {
    d.fallback = true;
    d.error = std::string(to_string(e.code()));
    est.delta = Pose::identity();
  }
  return est;
}

OdometryRun run_odometry(const std::vector<FrameInput>& frames, const OdometryConfig& cfg) {
  OdometryRun run;
  run.camera_to_world.push_back(Pose::identity());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const FrameEstimate est = estimate_frame(frames[k], cfg, k);
    run.any_fallback = run.any_fallback || est.diag.fallback;
    run.camera_to_world.push_back(compose_pose(run.camera_to_world.back(), invert_pose(est.delta)));
    run.diagnostics.push_back(est.diag);
  }
  return run;
}

EvaluationReport evaluate(const std::vector<Pose>& estimated, const std::vector<Pose>& ground_truth) {
  if (estimated.size() != ground_truth.size()) {
    fail(ErrorCode::FrameMismatch, "estimated trajectory has " + std::to_string(estimated.size()) +
                                       " poses, ground truth " + std::to_string(ground_truth.size()));
  }
  EvaluationReport rep;
  std::vector<double> rot;
  std::vector<double> dir;
  std::vector<double> ratio;
  for (std::size_t k = 0; k + 1 < estimated.size(); ++k) {
    const Pose e = relative(estimated, k);
    const Pose g = relative(ground_truth, k);
    FrameError fe;
    fe.rotation = rotation_angle(e.R.transpose() * g.R);
    const double ne = e.T.norm();
    const double ng = g.T.norm();
    if (ne > 0.0 && ng > 0.0) {
      fe.direction = std::atan2(e.T.cross(g.T).norm(), e.T.dot(g.T));
    } else {
      fe.direction = ne == ng ? 0.0 : std::numbers::pi / 2.0;
    }
    fe.scale_ratio = ng > 0.0 ? ne / ng : (ne == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
    rep.frames.push_back(fe);
    rot.push_back(fe.rotation);
    dir.push_back(fe.direction);
    ratio.push_back(fe.scale_ratio);
  }
  rep.rotation = summarize(rot);
  rep.direction = summarize(dir);
  rep.scale_ratio = summarize(ratio);
  return rep;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const io::Config& cfg) {
  const fs::path dir = dataset_dir(cfg);
  const CameraIntrinsics k = camera(cfg);
  const std::uint64_t seed = seed_of(cfg);
  const std::string scenario = cfg.get_string("sim.scenario", "drive");
  const int frames = cfg.get_int("sim.frames", 20);
  const double speed = cfg.get_double("sim.speed", 1.0);
  if (frames < 2) fail(ErrorCode::InvalidArgument, "sim.frames must be at least 2");

  sim::Scene scene;
  sim::Trajectory traj;
  const auto n = static_cast<std::size_t>(frames);
  if (scenario == "drive") {
    scene = sim::presets::street(seed);
    traj = sim::integrate_trajectory(sim::presets::forward_drive_twists(n, speed), 1.0);
  } else if (scenario == "circular") {
    scene = sim::presets::street(seed);
    traj = sim::integrate_trajectory(sim::presets::circular_twists(n, cfg.get_double("sim.theta", 0.02), speed), 1.0);
  } else if (scenario == "rotation") {
    scene = sim::presets::street(seed);
    const std::vector<Twist> tw(n - 1, Twist{Vec3(0.0, cfg.get_double("sim.theta", 0.02), 0.0), Vec3::Zero()});
    traj = sim::integrate_trajectory(tw, 1.0);
  } else if (scenario == "overtaking" || scenario == "preceding" || scenario == "multibody") {
    sim::presets::ScenarioData data = scenario == "overtaking"  ? sim::presets::overtaking(seed)
                                      : scenario == "preceding" ? sim::presets::preceding(seed)
                                                                : sim::presets::multi_body(seed, cfg.get_int("sim.bodies", 1));
    scene = std::move(data.scene);
    traj = std::move(data.trajectory);
  } else {
    fail(ErrorCode::InvalidArgument, "sim.scenario must be drive|circular|rotation|overtaking|preceding|multibody");
  }

  sim::NoiseSpec noise;
  noise.pixel_sigma = cfg.get_double("sim.noise_px", 0.0);
  noise.outlier_fraction = cfg.get_double("sim.outlier_fraction", 0.0);
  noise.seed = seed;

  fs::create_directories(dir);
  io::Config manifest = cfg;
  manifest.set("sim.seed", std::to_string(seed));
  manifest.set("sim.frames", std::to_string(traj.frames()));
  manifest.set("sim.scenario", scenario);
  manifest.save(dir / "manifest.ini");

  std::vector<Pose> gt;
  for (std::size_t f = 0; f < traj.frames(); ++f) gt.push_back(traj.camera_to_world(f));
  io::write_poses(dir / "poses_gt.txt", gt);

  for (std::size_t f = 0; f + 1 < traj.frames(); ++f) {
    const sim::TrackSet ts = sim::render_correspondences(scene, traj, f, k, noise);
    io::write_correspondences(frame_file(dir / "corr", f, "csv"), ts.corrs);
    std::vector<io::LabelRow> labels;
    for (std::size_t i = 0; i < ts.corrs.size(); ++i) labels.push_back({ts.corrs[i].id, ts.labels[i], ts.mover_ids[i]});
    io::write_labels(frame_file(dir / "labels", f, "csv"), labels);
  }

  if (cfg.get_bool("sim.images", true)) {
    const int w = cfg.get_int("sim.width", sim::kDefaultWidth);
    const int h = cfg.get_int("sim.height", sim::kDefaultHeight);
    const auto planes = world_planes(seed);
    fs::create_directories(dir / "frames");
    for (std::size_t f = 0; f < traj.frames(); ++f) {
      const Image img = sim::render_image(planes, traj.world_to_camera[f], k, w, h);
      write_pgm(frame_file(dir / "frames", f, "pgm"), img, 16);
    }
  }
  std::cout << "wrote " << traj.frames() << " frames of scenario '" << scenario << "' to " << dir.string() << "\n";
  return 0;
}

int cmd_track(const io::Config& cfg) {
  const fs::path dir = dataset_dir(cfg);
  const std::size_t frames = count_files(dir / "frames", "pgm");
  if (frames < 2) fail(ErrorCode::IoError, "need at least two images in " + (dir / "frames").string());
  flow::LkConfig lk;
  lk.window = cfg.get_int("track.window", lk.window);
  lk.fb_threshold = cfg.get_double("track.fb_threshold", lk.fb_threshold);
  lk.inverse_compositional = cfg.get_string("track.solver", "fa") == "ic";
  const int levels = cfg.get_int("track.levels", 4);
  const int max_features = cfg.get_int("track.max_features", 400);
  const int min_distance = cfg.get_int("track.min_distance", 12);

  std::size_t total = 0;
  std::size_t accepted = 0;
  flow::Pyramid prev = flow::build_pyramid(read_pgm(frame_file(dir / "frames", 0, "pgm")), levels);
  for (std::size_t f = 0; f + 1 < frames; ++f) {
    flow::Pyramid next = flow::build_pyramid(read_pgm(frame_file(dir / "frames", f + 1, "pgm")), levels);
    const auto features = flow::detect_features(prev.level(0), max_features, 7, min_distance);
    std::vector<io::TrackRow> rows;
    for (std::size_t i = 0; i < features.size(); ++i) {
      ++total;
      flow::ForwardBackwardResult fb;
      try {
        fb = flow::forward_backward_check(prev, next, features[i].at, lk);
      } catch (const Error&) {
        // Tracks leaving the image or losing texture are dropped, not fatal.
        continue;
      }
      if (!fb.accepted) continue;
      ++accepted;
      const PixelPoint p1 = features[i].at;
      const PixelPoint p2{p1.x + fb.forward.displacement.u, p1.y + fb.forward.displacement.v};
      rows.push_back({static_cast<int>(i), p1, p2, features[i].score, fb.forward.converged});
    }
    io::write_tracks(frame_file(dir / "tracks", f, "csv"), rows);
    prev = std::move(next);
  }
  std::cout << "tracked " << accepted << " of " << total << " features over " << frames - 1 << " frame pairs\n";
  return 0;
}

int cmd_odometry(const io::Config& cfg) {
  const fs::path dir = dataset_dir(cfg);
  const OdometryConfig oc = odometry_config(cfg);
  const std::string source = cfg.get_string("odometry.source", "corr");
  std::vector<FrameInput> inputs;
  if (source == "corr") {
    const std::size_t n = count_files(dir / "corr", "csv");
    for (std::size_t f = 0; f < n; ++f) inputs.push_back({io::read_correspondences(frame_file(dir / "corr", f, "csv")), {}});
  } else if (source == "tracks") {
    const CameraIntrinsics k = camera(cfg);
    const std::size_t n = count_files(dir / "tracks", "csv");
    for (std::size_t f = 0; f < n; ++f) {
      FrameInput in;
      for (const auto& t : io::read_tracks(frame_file(dir / "tracks", f, "csv"))) {
        ego::Correspondence c;
        c.id = t.feature_id;
        c.x_t = normalized_from_pixel(k, t.p1);
        c.x_next = normalized_from_pixel(k, t.p2);
        in.corrs.push_back(c);
        in.scores.push_back(t.score);
      }
      inputs.push_back(std::move(in));
    }
  } else {
    fail(ErrorCode::InvalidArgument, "odometry.source must be corr|tracks");
  }
  if (inputs.empty()) fail(ErrorCode::IoError, "no " + source + " files in " + dir.string());

  const OdometryRun run = run_odometry(inputs, oc);
  const fs::path out = cfg.get_string("odometry.output", (dir / "poses_est.txt").string());
  io::write_poses(out, run.camera_to_world);

  const fs::path diag_path = cfg.get_string("odometry.diagnostics", (dir / "diagnostics.csv").string());
  std::ofstream diag(diag_path);
  if (!diag) fail(ErrorCode::IoError, "cannot write " + diag_path.string());
  diag << "frame,fallback,error,input,reliable,inliers,rotation_only,ba_initial,ba_final,scale,masor_trace\n";
  diag.precision(17);
  std::size_t fallbacks = 0;
  for (const auto& d : run.diagnostics) {
    diag << d.frame << ',' << (d.fallback ? 1 : 0) << ',' << d.error << ',' << d.input << ',' << d.reliable << ','
         << d.inliers << ',' << (d.rotation_only ? 1 : 0) << ',' << d.ba_initial << ',' << d.ba_final << ','
         << d.scale << ',';
    for (std::size_t i = 0; i < d.masor_trace.size(); ++i) {
      const auto& m = d.masor_trace[i];
      diag << (i ? ";" : "") << m.mu << ':' << m.sigma << ':' << m.set_size << ':' << m.removed;
    }
    diag << '\n';
    fallbacks += d.fallback ? 1 : 0;
  }
  std::cout << "estimated " << run.diagnostics.size() << " frame pairs, " << fallbacks
            << " identity fallbacks; trajectory " << out.string() << "\n";
  return run.any_fallback ? 2 : 0;
}

int cmd_evaluate(const io::Config& cfg) {
  // Without explicit paths both trajectories come from the dataset.
  const std::string dataset = cfg.get_string("io.dataset", "");
  const auto in_dataset = [&](const char* name) { return dataset.empty() ? std::string() : (fs::path(dataset) / name).string(); };
  const std::string est_path = cfg.get_string("evaluate.estimated", in_dataset("poses_est.txt"));
  const std::string gt_path = cfg.get_string("evaluate.ground_truth", in_dataset("poses_gt.txt"));
  if (est_path.empty() || gt_path.empty()) {
    fail(ErrorCode::InvalidArgument, "evaluate needs io.dataset or both evaluate.estimated and evaluate.ground_truth");
  }
  const EvaluationReport rep = evaluate(io::read_poses(est_path), io::read_poses(gt_path));
  const std::string csv = cfg.get_string("evaluate.csv", "");
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) fail(ErrorCode::IoError, "cannot write " + csv);
    out.precision(17);
    out << "frame,rotation_error,direction_error,scale_ratio\n";
    for (std::size_t k = 0; k < rep.frames.size(); ++k) {
      out << k << ',' << rep.frames[k].rotation << ',' << rep.frames[k].direction << ','
          << rep.frames[k].scale_ratio << '\n';
    }
  }
  auto line = [](const char* name, const Summary& s) {
    std::printf("%-22s mean %.3e  median %.3e  max %.3e\n", name, s.mean, s.median, s.max);
  };
  std::printf("%zu relative motions\n", rep.frames.size());
  line("rotation error [rad]", rep.rotation);
  line("direction error [rad]", rep.direction);
  line("scale ratio", rep.scale_ratio);
  return 0;
}

int cmd_segment(const io::Config& cfg) {
  const fs::path dir = dataset_dir(cfg);
  const auto frame = static_cast<std::size_t>(cfg.get_int("segment.frame", 0));
  const auto corrs = io::read_correspondences(frame_file(dir / "corr", frame, "csv"));
  const double focal = camera(cfg).focal_px();
  robust::SegmentationConfig sc;
  sc.ransac.inlier_threshold = cfg.get_double("segment.threshold_px", 0.5) / focal;
  sc.ransac.max_iterations = cfg.get_int("segment.ransac_iterations", 2000);
  sc.ransac.seed = static_cast<std::uint64_t>(cfg.get_int("segment.seed", 1));
  sc.min_support = cfg.get_double("segment.min_support", 0.1);
  const robust::Segmentation seg = robust::segment_motions_sequential(corrs, sc);

  std::vector<io::SegmentRow> rows;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    int id = -1;
    for (std::size_t s = 0; s < seg.segments.size(); ++s) {
      if (seg.segments[s].mask[i]) id = static_cast<int>(s);
    }
    rows.push_back({corrs[i].id, id});
  }
  io::write_segments(frame_file(dir / "segments", frame, "csv"), rows);
  std::cout << seg.segments.size() << " motion segments, " << count(seg.residue) << " residue features\n";
  for (std::size_t s = 0; s < seg.segments.size(); ++s) {
    std::printf("segment %zu: %zu features, rotation %.6f rad\n", s, count(seg.segments[s].mask),
                rotation_angle(seg.segments[s].pose.R));
  }
  return 0;
}

std::string csv_reference() {
  return R"(CSV columns:
  corr/NNNNNN.csv      id,x1,y1,x2,y2,depth   normalized coordinates in frames N and N+1;
                                              depth of x1 (may be empty)
  labels/NNNNNN.csv    id,label,mover         label static|mover|outlier; mover index or -1
  tracks/NNNNNN.csv    feature_id,x1,y1,x2,y2,score,converged   pixels; structure-tensor score
  segments/NNNNNN.csv  feature_id,segment_id  segment index, -1 for residue
  diagnostics.csv      frame,fallback,error,input,reliable,inliers,rotation_only,
                       ba_initial,ba_final,scale,masor_trace
                       masor_trace lists mu:sigma:set_size:removed per iteration, ';'-separated
  evaluate.csv         frame,rotation_error,direction_error,scale_ratio
Pose files hold 12 whitespace-separated reals per line: row-major [R | t], camera to world.)";
}

}  // namespace vokit::cli
