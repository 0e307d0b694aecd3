#include "vokit/robust.hpp"

#include <algorithm>
#include <cmath>

#include "vokit/bundle_adjustment.hpp"

namespace vokit::robust {

double sampson_distance(const Mat3& E, const ego::Correspondence& c) {
  const Vec3 x = c.x_t.homogeneous();
  const Vec3 xn = c.x_next.homogeneous();
  const Vec3 Ex = E * x;
  const Vec3 Etx = E.transpose() * xn;
  const double denom = Ex.x() * Ex.x() + Ex.y() * Ex.y() + Etx.x() * Etx.x() + Etx.y() * Etx.y();
  const double e = xn.dot(Ex);
  if (!(denom > 0.0)) return e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(e) / std::sqrt(denom);
}

namespace {

// Minimal samples under forward motion are poorly conditioned even when
// exact; only a collapsed spectrum (coplanar sample) is rejected there.
constexpr double kMinimalDegenRatio = 1e-8;

std::optional<EssentialHypothesis> fit_essential(std::span<const ego::Correspondence> corrs,
                                                 const ego::EightPointConfig& cfg = {}) {
  try {
    const ego::EssentialMatrix E = ego::eight_point_discrete(corrs, cfg);
    return EssentialHypothesis{ego::decompose_essential(E, corrs), E.E};
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

RansacResult<EssentialHypothesis> ransac_essential(std::span<const ego::Correspondence> corrs,
                                                   const RansacConfig& cfg) {
  auto solve = [&](std::span<const std::size_t> idx) -> std::optional<EssentialHypothesis> {
    std::vector<ego::Correspondence> sample;
    sample.reserve(idx.size());
    for (const std::size_t i : idx) sample.push_back(corrs[i]);
    ego::EightPointConfig cfg8;
    cfg8.degen_ratio = kMinimalDegenRatio;
    return fit_essential(sample, cfg8);
  };
  auto residual = [&](const EssentialHypothesis& h, std::size_t i) { return sampson_distance(h.E, corrs[i]); };
  RansacResult<EssentialHypothesis> res = ransac<EssentialHypothesis>(corrs.size(), solve, residual, cfg);

  // Local optimization: refit on a widened consensus first, then on the
  // consensus at the nominal threshold until the support stops growing.
  auto consensus_of = [&](const EssentialHypothesis& h, double threshold, std::vector<bool>& mask) {
    mask.assign(corrs.size(), false);
    std::vector<ego::Correspondence> out;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      mask[i] = residual(h, i) < threshold;
      if (mask[i]) out.push_back(corrs[i]);
    }
    return out;
  };
  std::vector<bool> mask;
  std::optional<EssentialHypothesis> current = res.model;
  for (int round = 0; round < 10 && current; ++round) {
    const double threshold = round == 0 ? 3.0 * cfg.inlier_threshold : cfg.inlier_threshold;
    const auto refit = fit_essential(consensus_of(*current, threshold, mask));
    if (!refit) break;
    consensus_of(*refit, cfg.inlier_threshold, mask);
    const std::size_t support = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (support < res.support) break;
    const bool same = mask == res.inliers;
    res.model = *refit;
    res.inliers = mask;
    res.support = support;
    res.support_fraction = static_cast<double>(support) / static_cast<double>(corrs.size());
    current = refit;
    if (same && round > 0) break;
  }
  return res;
}

// ---------------------------------------------------------------------------

Pose fit_stereo_pose(std::span<const ego::Correspondence> corrs, const std::vector<bool>& mask, const Pose* warm) {
  std::vector<ego::Correspondence> subset;
  std::vector<double> depths;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (!mask[i]) continue;
    if (!corrs[i].depth_t) fail(ErrorCode::InvalidArgument, "stereo pose fit needs a depth for every feature");
    subset.push_back(corrs[i]);
    depths.push_back(*corrs[i].depth_t);
  }
  Pose init;
  if (warm != nullptr) {
    init = *warm;
  } else {
    init = ego::decompose_essential(ego::eight_point_discrete(subset), subset);
    // Scale of the unit translation from x^_next (R Z x + s t) = 0.
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < subset.size(); ++j) {
      const Mat3 xh = skew(subset[j].x_next.homogeneous());
      const Vec3 a = xh * init.T;
      const Vec3 b = xh * (init.R * (depths[j] * subset[j].x_t.homogeneous()));
      num -= a.dot(b);
      den += a.squaredNorm();
    }
    if (den > 0.0) init.T *= num / den;
  }
  // Features the initial pose moves behind the camera cannot enter the
  // reprojection objective; they keep a large error and are trimmed later.
  ego::BAProblem problem;
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if ((init.R * (depths[j] * subset[j].x_t.homogeneous()) + init.T).z() < kMinDepth) continue;
    problem.corrs.push_back(subset[j]);
    problem.depths.push_back(depths[j]);
  }
  if (problem.corrs.size() < 3) fail(ErrorCode::NonPositiveDepth, "initial pose leaves too few points in front");
  problem.pose = init;
  problem.mode = ego::BAMode::MotionOnly;
  return ego::bundle_adjust(problem).pose;
}

MasorResult<Pose> masor_stereo(std::span<const ego::Correspondence> corrs, const MasorConfig& cfg) {
  auto fit = [&](const std::vector<bool>& mask, const Pose* warm) { return fit_stereo_pose(corrs, mask, warm); };
  auto error = [&](const Pose& pose, std::size_t i) {
    try {
      return ego::reprojection_error(pose, corrs[i], *corrs[i].depth_t);
    } catch (const Error&) {
      return 10.0;  // cheirality failure: far beyond any plausible image error
    }
  };
  return masor<Pose>(corrs.size(), fit, error, cfg);
}

// ---------------------------------------------------------------------------

std::vector<bool> reliability_filter(std::span<const ReliabilityInput> features, const ReliabilityConfig& cfg) {
  std::vector<bool> keep(features.size(), false);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    keep[i] = f.score >= cfg.min_score && f.flow_px >= cfg.min_flow_px && (!f.depth || *f.depth <= cfg.max_depth);
  }
  return keep;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Static:
      return "STATIC";
    case Verdict::Moving:
      return "MOVING";
    case Verdict::Undecided:
      return "UNDECIDED";
    case Verdict::NotApplicable:
      return "NOT_APPLICABLE";
  }
  return "UNKNOWN";
}

VerdictResult positive_depth_check(const Pose& delta, const ego::Correspondence& corr) {
  const ego::PairDepths d = ego::triangulate_pair(delta, corr.x_t, corr.x_next);
  if (!d.observable) return {Verdict::Undecided, 0.0};
  const double z = std::min(d.z_t, d.z_next);
  return {z <= 0.0 ? Verdict::Moving : Verdict::Static, z};
}

VerdictResult positive_height_check(const Pose& delta, const ego::Correspondence& corr, const Plane& road,
                                    const HeightCheckConfig& cfg) {
  road.validate();
  const Vec3 x = corr.x_t.homogeneous();
  if (!(road.n.dot(x) > 0.0)) return {Verdict::NotApplicable, 0.0};
  const ego::PairDepths d = ego::triangulate_pair(delta, corr.x_t, corr.x_next);
  if (!d.observable) return {Verdict::Undecided, 0.0};
  const double h = road.height_above(d.z_t * x);
  return {h < -cfg.height_margin ? Verdict::Moving : Verdict::Static, h};
}

// ---------------------------------------------------------------------------

Segmentation segment_motions_sequential(std::span<const ego::Correspondence> corrs, const SegmentationConfig& cfg) {
  const std::size_t n = corrs.size();
  Segmentation out;
  out.residue.assign(n, true);
  std::vector<std::size_t> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = i;

  for (std::uint64_t round = 0; remaining.size() >= cfg.ransac.min_sample_size; ++round) {
    std::vector<ego::Correspondence> subset;
    subset.reserve(remaining.size());
    for (const std::size_t i : remaining) subset.push_back(corrs[i]);
    RansacConfig rc = cfg.ransac;
    rc.seed = splitmix64(cfg.ransac.seed + round);
    RansacResult<EssentialHypothesis> r;
    try {
      r = ransac_essential(subset, rc);
    } catch (const Error&) {
      break;
    }
    if (static_cast<double>(r.support) < cfg.min_support * static_cast<double>(n)) break;

    MotionSegment seg;
    seg.pose = r.model.pose;
    seg.E = r.model.E;
    seg.mask.assign(n, false);
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      if (r.inliers[k]) {
        seg.mask[remaining[k]] = true;
        out.residue[remaining[k]] = false;
      } else {
        rest.push_back(remaining[k]);
      }
    }
    out.segments.push_back(std::move(seg));
    remaining.swap(rest);
  }
  return out;
}

double multibody_residual(std::span<const MotionSegment> segments, const ego::Correspondence& c) {
  double p = 1.0;
  for (const auto& s : segments) p *= std::abs(c.x_next.homogeneous().dot(s.E * c.x_t.homogeneous()));
  return p;
}

}  // namespace vokit::robust
