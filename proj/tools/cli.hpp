#pragma once

// Pipeline front end: dataset generation, tracking, odometry, evaluation and
// motion segmentation. Every command reads a sectioned key-value config
// (see README.md for the keys) and works on a dataset directory:
//
//   manifest.ini        config used to generate the data, with the seed
//   poses_gt.txt        camera-to-world poses, 12 reals per line
//   frames/NNNNNN.pgm   rendered images
//   corr/NNNNNN.csv     correspondences between frames N and N+1
//   labels/NNNNNN.csv   ground-truth label per correspondence
//   tracks/NNNNNN.csv   output of `track`

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vokit/bundle_adjustment.hpp"
#include "vokit/egomotion.hpp"
#include "vokit/io.hpp"
#include "vokit/robust.hpp"

namespace vokit::cli {

enum class OutlierScheme { None, Ransac, MasorSigma, MasorMu };
enum class ScaleSource { None, Stereo, Height };

struct OdometryConfig {
  OutlierScheme outlier = OutlierScheme::Ransac;
  std::optional<ego::BAMode> ba = ego::BAMode::Full;
  ScaleSource scale = ScaleSource::Stereo;
  double camera_height = 1.5;
  double focal_px = 500.0;          ///< converts pixel thresholds to normalized units
  double ransac_threshold_px = 1.0;
  int ransac_iterations = 1000;
  std::uint64_t seed = 1;
  robust::ReliabilityConfig reliability;
  std::size_t min_features = 8;
};

/// Builds the odometry settings from the [odometry] and [camera] sections.
OdometryConfig odometry_config(const io::Config& cfg);

/// One frame pair of input to the odometry chain.
struct FrameInput {
  std::vector<ego::Correspondence> corrs;
  std::vector<double> scores;  ///< structure-tensor scores, empty when unknown
};

struct FrameDiagnostics {
  std::size_t frame = 0;
  bool fallback = false;
  std::string error;             ///< error code of the failed stage, empty on success
  std::size_t input = 0;
  std::size_t reliable = 0;
  std::size_t inliers = 0;
  bool rotation_only = false;    ///< translation unobservable (insufficient parallax)
  double ba_initial = 0.0;
  double ba_final = 0.0;
  double scale = 1.0;
  std::vector<robust::MasorIteration> masor_trace;
};

struct FrameEstimate {
  Pose delta;
  FrameDiagnostics diag;
};

/// Track -> reliability -> outlier scheme -> 8-point -> triangulate -> BA ->
/// scale. Stage failures are caught and reported with an identity delta.
/// The frame index seeds the per-frame random streams.
FrameEstimate estimate_frame(const FrameInput& input, const OdometryConfig& cfg, std::size_t frame = 0);

struct OdometryRun {
  std::vector<Pose> camera_to_world;  ///< frames + 1 poses, the first is the identity
  std::vector<FrameDiagnostics> diagnostics;
  bool any_fallback = false;
};

OdometryRun run_odometry(const std::vector<FrameInput>& frames, const OdometryConfig& cfg);

struct FrameError {
  double rotation = 0.0;   ///< radians
  double direction = 0.0;  ///< radians; 0 when both translations vanish
  double scale_ratio = 1.0;
};

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct EvaluationReport {
  std::vector<FrameError> frames;
  Summary rotation;
  Summary direction;
  Summary scale_ratio;
};

/// Compares the relative motions of consecutive frames. Throws FrameMismatch
/// unless both trajectories have the same length.
EvaluationReport evaluate(const std::vector<Pose>& estimated, const std::vector<Pose>& ground_truth);

// Subcommands; each returns the process exit code.
int cmd_simulate(const io::Config& cfg);
int cmd_track(const io::Config& cfg);
int cmd_odometry(const io::Config& cfg);
int cmd_evaluate(const io::Config& cfg);
int cmd_segment(const io::Config& cfg);

/// Text of the CSV column reference shown by --help.
std::string csv_reference();

std::filesystem::path frame_file(const std::filesystem::path& dir, std::size_t k, const std::string& ext);

}  // namespace vokit::cli
