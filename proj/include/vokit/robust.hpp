#pragma once

// Outlier rejection and moving-object detection.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vokit/egomotion.hpp"
#include "vokit/error.hpp"
#include "vokit/rng.hpp"

namespace vokit::robust {

struct RansacConfig {
  std::size_t min_sample_size = 8;
  int max_iterations = 1000;
  double inlier_threshold = 1.0 / 500.0;  ///< residual units; 1 px at f*s = 500 for the essential kernel
  double confidence = 0.999;
  std::uint64_t seed = 1;
};

template <class Model>
struct RansacResult {
  Model model{};
  std::vector<bool> inliers;
  std::size_t support = 0;
  double support_fraction = 0.0;
  int iterations = 0;
};

/// Hypothesize-and-verify. `solve` fits a model to the sampled indices (or
/// returns nullopt for a degenerate sample); `residual` scores feature i.
/// Hypothesis h draws its sample from the counter-based stream (seed, h), so
/// results depend only on the seed and the input. Throws NoConsensus if no
/// hypothesis reaches min_sample_size supporters.
template <class Model>
RansacResult<Model> ransac(std::size_t n,
                           const std::function<std::optional<Model>(std::span<const std::size_t>)>& solve,
                           const std::function<double(const Model&, std::size_t)>& residual,
                           const RansacConfig& cfg) {
  if (cfg.min_sample_size == 0 || n < cfg.min_sample_size) {
    fail(ErrorCode::InvalidArgument, "not enough features for one minimal sample");
  }
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) fail(ErrorCode::InvalidArgument, "confidence must be in (0, 1)");
  RansacResult<Model> best;
  double needed = cfg.max_iterations;
  int it = 0;
  for (; it < cfg.max_iterations && it < needed; ++it) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(it));
    const std::vector<std::size_t> sample = rng.sample(n, cfg.min_sample_size);
    const std::optional<Model> model = solve(sample);
    if (!model) continue;
    std::vector<bool> mask(n, false);
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = residual(*model, i);
      mask[i] = r < cfg.inlier_threshold;
      support += mask[i] ? 1 : 0;
    }
    if (support > best.support) {
      best.model = *model;
      best.inliers = std::move(mask);
      best.support = support;
      const double w = static_cast<double>(support) / static_cast<double>(n);
      const double hit = std::pow(w, static_cast<double>(cfg.min_sample_size));
      if (hit >= 1.0) {
        needed = 0.0;
      } else if (hit > 0.0) {
        const double log_miss = std::log1p(-hit);
        if (log_miss < 0.0) needed = std::log(1.0 - cfg.confidence) / log_miss;
      }
    }
  }
  best.iterations = it;
  if (best.support < cfg.min_sample_size) fail(ErrorCode::NoConsensus, "no hypothesis reached minimal support");
  best.support_fraction = static_cast<double>(best.support) / static_cast<double>(n);
  return best;
}

/// Sampson distance of a correspondence to the epipolar geometry of E.
double sampson_distance(const Mat3& E, const ego::Correspondence& c);

struct EssentialHypothesis {
  Pose pose;  ///< unit translation
  Mat3 E = Mat3::Zero();
};

/// RANSAC with the eight-point kernel and Sampson scoring, followed by local
/// optimization: one refit on the consensus at three times the threshold,
/// then refits at the threshold while the support does not shrink.
RansacResult<EssentialHypothesis> ransac_essential(std::span<const ego::Correspondence> corrs,
                                                   const RansacConfig& cfg = {});

// ---------------------------------------------------------------------------

enum class MasorCriterion {
  Sigma1p5,  ///< keep eps - mu < 1.5 sigma
  Mu9x,      ///< keep eps < 9 mu
};

struct MasorConfig {
  MasorCriterion criterion = MasorCriterion::Sigma1p5;
  int max_iterations = 0;       ///< 0 selects the criterion default: 10 for Sigma1p5, 20 for Mu9x
  std::size_t min_features = 8;
  double sigma_factor = 1.5;
  double mu_factor = 9.0;
  double error_floor = 1e-9;    ///< errors at or below this (round-off) are never trimmed

  [[nodiscard]] int iterations() const {
    if (max_iterations > 0) return max_iterations;
    return criterion == MasorCriterion::Sigma1p5 ? 10 : 20;
  }
};

struct MasorIteration {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t set_size = 0;  ///< features the model was fitted to
  std::size_t removed = 0;
};

template <class Model>
struct MasorResult {
  Model model{};
  std::vector<bool> inliers;
  std::vector<MasorIteration> trace;
};

/// Alternates fitting on the current set with trimming by the criterion,
/// where mu and sigma are the mean and standard deviation of the errors over
/// the current set. Stops when nothing is removed or after the iteration
/// budget; the returned model is fitted to the returned set. `fit` receives
/// the current mask and the previous model (nullptr on the first iteration).
/// Throws SetCollapsed if trimming leaves fewer than min_features.
template <class Model>
MasorResult<Model> masor(std::size_t n,
                         const std::function<Model(const std::vector<bool>&, const Model*)>& fit,
                         const std::function<double(const Model&, std::size_t)>& error,
                         const MasorConfig& cfg) {
  if (n < cfg.min_features) fail(ErrorCode::InvalidArgument, "fewer features than MASOR's minimum");
  MasorResult<Model> res;
  res.inliers.assign(n, true);
  Model model = fit(res.inliers, nullptr);
  const int budget = cfg.iterations();
  for (int p = 0; p < budget; ++p) {
    if (p > 0) model = fit(res.inliers, &model);
    std::vector<double> eps(n, 0.0);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!res.inliers[i]) continue;
      eps[i] = error(model, i);
      sum += eps[i];
      ++count;
    }
    const double mu = sum / static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (res.inliers[i]) var += (eps[i] - mu) * (eps[i] - mu);
    }
    const double sigma = std::sqrt(var / static_cast<double>(count));

    std::vector<bool> next = res.inliers;
    std::size_t removed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!next[i]) continue;
      const bool keep = eps[i] <= cfg.error_floor ||
                        (cfg.criterion == MasorCriterion::Sigma1p5 ? eps[i] - mu < cfg.sigma_factor * sigma
                                                                   : eps[i] < cfg.mu_factor * mu);
      if (!keep) {
        next[i] = false;
        ++removed;
      }
    }
    res.trace.push_back({mu, sigma, count, removed});
    if (removed == 0) break;
    if (count - removed < cfg.min_features) fail(ErrorCode::SetCollapsed, "trimming fell below the minimum set size");
    res.inliers = std::move(next);
    if (p + 1 == budget) model = fit(res.inliers, &model);
  }
  res.model = model;
  return res;
}

/// Pose fitter for features with measured depths: eight-point plus a
/// closed-form translation scale on the first call, then motion-only bundle
/// adjustment warm-started from the previous pose.
Pose fit_stereo_pose(std::span<const ego::Correspondence> corrs, const std::vector<bool>& mask, const Pose* warm);

/// MASOR over the reprojection error of depth-carrying correspondences.
MasorResult<Pose> masor_stereo(std::span<const ego::Correspondence> corrs, const MasorConfig& cfg = {});

// ---------------------------------------------------------------------------

struct ReliabilityConfig {
  double min_score = 1e-5;  ///< structure-tensor score
  double min_flow_px = 0.5;
  double max_depth = 60.0;
};

struct ReliabilityInput {
  double score = 0.0;
  double flow_px = 0.0;
  std::optional<double> depth;
};

/// Keeps features with enough structure, enough image motion, and (when a
/// depth is known) a depth within range.
std::vector<bool> reliability_filter(std::span<const ReliabilityInput> features, const ReliabilityConfig& cfg = {});

// ---------------------------------------------------------------------------

enum class Verdict { Static, Moving, Undecided, NotApplicable };

std::string to_string(Verdict v);

struct VerdictResult {
  Verdict verdict = Verdict::Undecided;
  double residual = 0.0;  ///< smaller triangulated depth, or signed height above the road
};

/// Triangulates under the ego-motion delta; a depth <= 0 in either frame
/// means the point cannot be static. Zero-parallax points are Undecided.
VerdictResult positive_depth_check(const Pose& delta, const ego::Correspondence& corr);

struct HeightCheckConfig {
  double height_margin = 0.05;
};

/// Triangulates and flags points below the road by more than the margin.
/// Points whose ray does not meet the road ahead (above the horizon) are
/// NotApplicable. The road plane lives in the x_t camera frame.
VerdictResult positive_height_check(const Pose& delta, const ego::Correspondence& corr, const Plane& road,
                                    const HeightCheckConfig& cfg = {});

// ---------------------------------------------------------------------------

struct SegmentationConfig {
  RansacConfig ransac;
  double min_support = 0.1;  ///< fraction of all features a segment must explain
};

struct MotionSegment {
  Pose pose;  ///< unit translation
  Mat3 E = Mat3::Zero();
  std::vector<bool> mask;  ///< over all input features
};

struct Segmentation {
  std::vector<MotionSegment> segments;
  std::vector<bool> residue;
};

/// Sequential RANSAC: extract the dominant motion, remove its consensus set,
/// repeat while enough features remain and the support is sufficient.
Segmentation segment_motions_sequential(std::span<const ego::Correspondence> corrs,
                                        const SegmentationConfig& cfg = {});

/// Product over segments of |x_next^T E_k x_t|, the multibody constraint.
double multibody_residual(std::span<const MotionSegment> segments, const ego::Correspondence& c);

}  // namespace vokit::robust
