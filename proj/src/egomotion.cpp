#include "vokit/egomotion.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vokit/error.hpp"
#include "vokit/rng.hpp"

namespace vokit::ego {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Similarity moving the centroid to the origin with RMS distance sqrt(2).
Mat3 hartley(std::span<const Correspondence> corrs, bool next) {
  Vec2 c = Vec2::Zero();
  for (const auto& k : corrs) c += next ? k.x_next.vec() : k.x_t.vec();
  c /= static_cast<double>(corrs.size());
  double ms = 0.0;
  for (const auto& k : corrs) ms += ((next ? k.x_next.vec() : k.x_t.vec()) - c).squaredNorm();
  ms /= static_cast<double>(corrs.size());
  const double s = ms > 0.0 ? std::sqrt(2.0 / ms) : 1.0;
  Mat3 T;
  T << s, 0.0, -s * c.x(),
       0.0, s, -s * c.y(),
       0.0, 0.0, 1.0;
  return T;
}

}  // namespace

Mat3 fit_rotation(std::span<const Correspondence> corrs) {
  Mat3 H = Mat3::Zero();
  for (const auto& k : corrs) {
    H += k.weight * k.x_next.homogeneous().normalized() * k.x_t.homogeneous().normalized().transpose();
  }
  const Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

double rotation_residual(const Mat3& R, std::span<const Correspondence> corrs) {
  std::vector<double> r;
  r.reserve(corrs.size());
  for (const auto& k : corrs) {
    const Vec3 p = R * k.x_t.homogeneous();
    if (p.z() < kMinDepth) {
      r.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    r.push_back(std::hypot(p.x() / p.z() - k.x_next.x, p.y() / p.z() - k.x_next.y));
  }
  return median(std::move(r));
}

Mat3 project_to_essential(const Mat3& E) {
  const Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 out = svd.matrixU() * Vec3(1.0, 1.0, 0.0).asDiagonal() * svd.matrixV().transpose();
  Eigen::Index r = 0, c = 0;
  out.cwiseAbs().maxCoeff(&r, &c);
  return out(r, c) < 0.0 ? Mat3(-out) : out;
}

EssentialMatrix eight_point_discrete(std::span<const Correspondence> corrs, const EightPointConfig& cfg) {
  if (corrs.size() < 8) fail(ErrorCode::InvalidArgument, "eight-point needs at least 8 correspondences");
  if (rotation_residual(fit_rotation(corrs), corrs) < cfg.parallax_min) {
    fail(ErrorCode::InsufficientParallax, "correspondences are explained by a pure rotation");
  }
  const Mat3 T1 = hartley(corrs, false);
  const Mat3 T2 = hartley(corrs, true);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(corrs.size()), 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 a = T1 * corrs[i].x_t.homogeneous();
    const Vec3 b = T2 * corrs[i].x_next.homogeneous();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) A(static_cast<Eigen::Index>(i), 3 * r + c) = corrs[i].weight * b(r) * a(c);
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv(7) >= cfg.degen_ratio * sv(0))) {
    fail(ErrorCode::DegenerateConfiguration, "correspondences lie on a critical configuration");
  }
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Mat3 En;
  En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  return {project_to_essential(T2.transpose() * En * T1)};
}

PairDepths triangulate_pair(const Pose& delta, const NormalizedPoint& x_t, const NormalizedPoint& x_next) {
  const Vec3 a = delta.R * x_t.homogeneous();
  const Vec3 b = x_next.homogeneous();
  PairDepths out;
  out.parallax = a.cross(b).norm() / (a.norm() * b.norm());
  if (!(out.parallax >= 1e-9)) {
    out.z_t = out.z_next = kNaN;
    return out;
  }
  Eigen::Matrix2d M;
  M << a.dot(a), -a.dot(b),
       -a.dot(b), b.dot(b);
  const Eigen::Vector2d rhs(-a.dot(delta.T), b.dot(delta.T));
  const Eigen::Vector2d z = M.inverse() * rhs;
  out.z_t = z(0);
  out.z_next = z(1);
  out.observable = true;
  return out;
}

Pose decompose_essential(const EssentialMatrix& E, std::span<const Correspondence> corrs) {
  if (corrs.empty()) fail(ErrorCode::InvalidArgument, "decomposition needs correspondences for disambiguation");
  const Eigen::JacobiSVD<Mat3> svd(E.E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  if (U.determinant() < 0.0) U = -U;
  if (V.determinant() < 0.0) V = -V;
  Mat3 W;
  W << 0.0, -1.0, 0.0,
       1.0, 0.0, 0.0,
       0.0, 0.0, 1.0;
  const Mat3 Ra = U * W * V.transpose();
  const Mat3 Rb = U * W.transpose() * V.transpose();
  const Vec3 t = U.col(2).normalized();
  const Pose candidates[4] = {{Ra, t}, {Ra, -t}, {Rb, t}, {Rb, -t}};

  int counts[4] = {0, 0, 0, 0};
  for (int c = 0; c < 4; ++c) {
    for (const auto& k : corrs) {
      const PairDepths d = triangulate_pair(candidates[c], k.x_t, k.x_next);
      if (d.observable && d.z_t > 0.0 && d.z_next > 0.0) ++counts[c];
    }
  }
  int best = 0;
  for (int c = 1; c < 4; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  for (int c = 0; c < 4; ++c) {
    if (c != best && counts[c] == counts[best]) {
      fail(ErrorCode::AmbiguousCheirality, "two decompositions tie in the positive-depth vote");
    }
  }
  if (2 * static_cast<std::size_t>(counts[best]) <= corrs.size()) {
    fail(ErrorCode::AmbiguousCheirality, "no decomposition puts a majority of points in front of both cameras");
  }
  return candidates[best];
}

Triangulation triangulate_up_to_scale(const Pose& delta, std::span<const Correspondence> corrs) {
  if (!(delta.T.norm() > 1e-12)) fail(ErrorCode::InsufficientParallax, "translation is zero");
  const std::size_t n = corrs.size();
  Triangulation out;
  out.depths.assign(n, kNaN);
  out.observable.assign(n, false);
  out.negative.assign(n, false);

  // Rows x^_next (R x_t) Z_j + x^_next T gamma = 0 stacked for all points.
  // The normal matrix is an arrowhead diag(d_j) bordered by z_j with corner
  // alpha; its smallest eigenpair solves a scalar secular equation.
  std::vector<double> d(n, 0.0), z(n, 0.0);
  double alpha = 0.0;
  double d_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const Vec3 xr = delta.R * corrs[j].x_t.homogeneous();
    const Vec3 xn = corrs[j].x_next.homogeneous();
    const Vec3 a = xn.cross(xr);
    if (!(a.norm() / (xn.norm() * xr.norm()) >= 1e-9)) continue;
    const Vec3 b = xn.cross(delta.T);
    out.observable[j] = true;
    d[j] = a.squaredNorm();
    z[j] = a.dot(b);
    alpha += b.squaredNorm();
    d_min = std::min(d_min, d[j]);
  }
  if (!std::isfinite(d_min)) fail(ErrorCode::InsufficientParallax, "no correspondence has parallax");

  auto secular = [&](double lambda) {
    double f = alpha - lambda;
    for (std::size_t j = 0; j < n; ++j) {
      if (out.observable[j]) f -= z[j] * z[j] / (d[j] - lambda);
    }
    return f;
  };
  double lambda = 0.0;
  if (secular(0.0) > 0.0) {
    double lo = 0.0;
    double hi = d_min;
    for (int it = 0; it < 200 && hi - lo > 1e-18 * d_min; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (secular(mid) > 0.0 ? lo : hi) = mid;
    }
    lambda = lo;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!out.observable[j]) continue;
    out.depths[j] = -z[j] / (d[j] - lambda);
    const double z_next = (delta.R * (out.depths[j] * corrs[j].x_t.homogeneous()) + delta.T).z();
    out.negative[j] = !(out.depths[j] > 0.0) || !(z_next > 0.0);
  }
  return out;
}

double reprojection_error(const Pose& delta, const Correspondence& corr, double Z) {
  if (!(Z >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "depth must be positive");
  const NormalizedPoint p = project(delta.R * (Z * corr.x_t.homogeneous()) + delta.T);
  return std::hypot(corr.x_next.x - p.x, corr.x_next.y - p.y);
}

ContinuousResult continuous_linear_solve(std::span<const FlowObservation> flows, const ContinuousConfig& cfg) {
  const std::size_t n = flows.size();
  if (n < 8) fail(ErrorCode::InvalidArgument, "continuous eight-point needs at least 8 flows");

  // Rotational flow is linear in omega: u = B(x) omega.
  Eigen::MatrixXd B(2 * n, 3);
  Eigen::VectorXd u(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = flows[i].x.x;
    const double y = flows[i].x.y;
    B.row(2 * i) << -x * y, 1.0 + x * x, -y;
    B.row(2 * i + 1) << -(1.0 + y * y), x * y, x;
    u(2 * i) = flows[i].u.u;
    u(2 * i + 1) = flows[i].u.v;
  }
  const Vec3 w_rot = B.colPivHouseholderQr().solve(u);
  const double rms_flow = u.norm();
  if (!(rms_flow > 0.0) || (u - B * w_rot).norm() <= cfg.rotation_only_tol * rms_flow) {
    ContinuousResult r;
    r.twist.omega = rms_flow > 0.0 ? w_rot : Vec3::Zero();
    r.translation_observable = false;
    return r;
  }

  // Unknowns [nu; s11 s12 s13 s22 s23 s33], s the symmetric part of w^ nu^.
  Eigen::MatrixXd A(n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = flows[i].x.x;
    const double y = flows[i].x.y;
    const Vec3 xc = flows[i].x.homogeneous().cross(Vec3(flows[i].u.u, flows[i].u.v, 0.0));
    A.row(i) << xc(0), xc(1), xc(2), x * x, 2.0 * x * y, 2.0 * x, y * y, 2.0 * y, 1.0;
  }
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < 9; ++c) {
    if (!(scale(c) > 0.0)) scale(c) = 1.0;
  }
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv(7) >= cfg.degen_ratio * sv(0))) {
    fail(ErrorCode::DegenerateConfiguration, "flow field lies on a critical configuration");
  }
  Eigen::VectorXd e = svd.matrixV().col(8).cwiseQuotient(scale);
  Vec3 nu = e.head<3>();
  const double nn = nu.norm();
  if (!(nn > 0.0)) fail(ErrorCode::InsufficientParallax, "translation is not observable");
  nu /= nn;
  const Eigen::Matrix<double, 6, 1> s = e.tail<6>() / nn;

  Eigen::Matrix<double, 6, 3> M;
  M << 0.0, -nu(1), -nu(2),
       0.5 * nu(1), 0.5 * nu(0), 0.0,
       0.5 * nu(2), 0.0, 0.5 * nu(0),
       -nu(0), 0.0, -nu(2),
       0.0, 0.5 * nu(2), 0.5 * nu(1),
       -nu(0), -nu(1), 0.0;
  const Vec3 omega = M.colPivHouseholderQr().solve(s);

  // The null vector fixes nu only up to sign; pick the sign giving positive
  // inverse depths for the majority of flows.
  int positive = 0;
  int negative = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = flows[i].x.x;
    const double y = flows[i].x.y;
    const Vec2 at(nu(0) - x * nu(2), nu(1) - y * nu(2));
    const Vec2 r = Vec2(flows[i].u.u, flows[i].u.v) - B.middleRows(2 * i, 2) * omega;
    const double rho = at.dot(r);
    if (rho > 0.0) ++positive;
    if (rho < 0.0) ++negative;
  }
  if (negative > positive) nu = -nu;
  ContinuousResult res;
  res.twist = {omega, nu};
  return res;
}

// ---------------------------------------------------------------------------

int MotionModel::param_count(MotionKind kind) {
  switch (kind) {
    case MotionKind::Full6:
    case MotionKind::SmallRotation:
      return 6;
    case MotionKind::ThreeParam:
    case MotionKind::GroundPlane:
      return 3;
    case MotionKind::OneParam:
    case MotionKind::Circular:
      return 1;
  }
  return 0;
}

void MotionModel::validate() const {
  if (params.size() != param_count(kind)) {
    fail(ErrorCode::InvalidArgument, "motion model parameter count does not match its kind");
  }
}

Twist MotionModel::twist() const {
  validate();
  const auto& p = params;
  Twist t;
  switch (kind) {
    case MotionKind::Full6:
    case MotionKind::SmallRotation:
      t.omega = p.head<3>();
      t.nu = p.tail<3>();
      break;
    case MotionKind::ThreeParam:
      t.nu = Vec3(0.0, 0.0, p(0));
      t.omega = Vec3(p(1), p(2), 0.0);
      break;
    case MotionKind::OneParam:
      t.nu = Vec3(0.0, 0.0, p(0));
      break;
    case MotionKind::Circular:
      t.omega = Vec3(0.0, p(0), 0.0);
      t.nu = Vec3(-std::sin(0.5 * p(0)), 0.0, -std::cos(0.5 * p(0)));
      break;
    case MotionKind::GroundPlane:
      t.nu = Vec3(0.0, 0.0, p(0));
      t.omega = Vec3(p(1), p(2), 0.0);
      break;
  }
  return t;
}

Flow2 predict_flow(const MotionModel& model, const NormalizedPoint& x, double Z) {
  if (model.kind == MotionKind::GroundPlane) {
    fail(ErrorCode::InvalidArgument, "the ground-plane model takes its depth from a plane");
  }
  const Twist t = model.twist();
  if (model.kind != MotionKind::SmallRotation) return continuous_flow(t, x, Z);
  if (!(Z >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "depth must be positive");
  const Mat3 R = Mat3::Identity() + skew(t.omega);
  const NormalizedPoint moved = project(R * (Z * x.homogeneous()) + t.nu);
  return {moved.x - x.x, moved.y - x.y};
}

Flow2 predict_flow(const MotionModel& model, const NormalizedPoint& x, const Plane& plane) {
  plane.validate();
  const double inv_z = plane.n.dot(x.homogeneous()) / plane.d;
  if (!(inv_z > 0.0)) fail(ErrorCode::NonPositiveDepth, "viewing ray does not meet the plane in front");
  if (model.kind != MotionKind::GroundPlane) return predict_flow(model, x, 1.0 / inv_z);
  Twist t = model.twist();
  t.nu *= plane.d;  // a = nu3 / d
  return continuous_flow(t, x, 1.0 / inv_z);
}

Pose circular_pose(double theta) {
  return {rotation_y(theta), Vec3(-std::sin(0.5 * theta), 0.0, -std::cos(0.5 * theta))};
}

CircularEstimate estimate_circular_one_point(std::span<const Correspondence> corrs) {
  // With R = R_y(theta) and T along (-sin(theta/2), 0, -cos(theta/2)) the
  // epipolar constraint reduces to
  //   tan(theta/2) = (x' y - x y') / (y + y').
  std::vector<double> votes;
  votes.reserve(corrs.size());
  for (const auto& k : corrs) {
    const double den = k.x_t.y + k.x_next.y;
    if (std::abs(den) < 1e-12) continue;
    votes.push_back(2.0 * std::atan((k.x_next.x * k.x_t.y - k.x_t.x * k.x_next.y) / den));
  }
  if (votes.empty()) fail(ErrorCode::NoCorrespondences, "no correspondence constrains the circular model");
  CircularEstimate est;
  est.used = votes.size();
  est.theta = median(std::move(votes));
  return est;
}

// ---------------------------------------------------------------------------

namespace {

Plane fit_plane_lsq(std::span<const Vec3> points, const std::vector<bool>& mask) {
  Vec3 c = Vec3::Zero();
  std::size_t m = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (mask[i]) {
      c += points[i];
      ++m;
    }
  }
  c /= static_cast<double>(m);
  Mat3 S = Mat3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (mask[i]) S += (points[i] - c) * (points[i] - c).transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> es(S);
  Vec3 n = es.eigenvectors().col(0).normalized();
  double d = n.dot(c);
  if (d < 0.0) {
    n = -n;
    d = -d;
  }
  return {n, d};
}

}  // namespace

GroundScale scale_from_ground_plane(std::span<const Vec3> points, double height, const GroundScaleConfig& cfg) {
  if (points.size() < 3) fail(ErrorCode::InvalidArgument, "plane fit needs at least 3 points");
  if (!(height > 0.0)) fail(ErrorCode::InvalidArgument, "camera height must be positive");
  {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    c /= static_cast<double>(points.size());
    Mat3 S = Mat3::Zero();
    for (const auto& p : points) S += (p - c) * (p - c).transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> es(S);
    if (!(es.eigenvalues()(1) > 1e-18 * es.eigenvalues()(2)) || !(es.eigenvalues()(2) > 0.0)) {
      fail(ErrorCode::DegeneratePlane, "ground candidates are collinear");
    }
  }

  const std::size_t n = points.size();
  auto support = [&](const Plane& pl, std::vector<bool>* mask) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in = std::abs(pl.n.dot(points[i]) - pl.d) < cfg.inlier_threshold * pl.d;
      if (mask != nullptr) (*mask)[i] = in;
      count += in ? 1 : 0;
    }
    return count;
  };
  auto acceptable = [&](const Plane& pl) {
    if (!(pl.d > 0.0)) return false;
    if (!cfg.normal_prior) return true;
    const double c = std::clamp(std::abs(pl.n.dot(cfg.normal_prior->normalized())), 0.0, 1.0);
    return std::acos(c) <= cfg.max_normal_angle;
  };

  Rng rng(cfg.seed);
  std::size_t best_count = 0;
  Plane best;
  double needed = cfg.max_iterations;
  for (int it = 0; it < cfg.max_iterations && it < needed; ++it) {
    const auto idx = rng.sample(n, 3);
    Vec3 normal = (points[idx[1]] - points[idx[0]]).cross(points[idx[2]] - points[idx[0]]);
    if (!(normal.norm() > 1e-12)) continue;
    normal.normalize();
    double d = normal.dot(points[idx[0]]);
    if (d < 0.0) {
      normal = -normal;
      d = -d;
    }
    const Plane pl{normal, d};
    if (!acceptable(pl)) continue;
    const std::size_t count = support(pl, nullptr);
    if (count > best_count) {
      best_count = count;
      best = pl;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double denom = std::log(1.0 - w * w * w);
      needed = denom < 0.0 ? std::log(1.0 - cfg.confidence) / denom : 0.0;
    }
  }
  if (best_count < 3) fail(ErrorCode::NoConsensus, "no plane hypothesis gathered support");

  GroundScale out;
  out.inliers.assign(n, false);
  support(best, &out.inliers);
  Plane fit = best;
  for (int pass = 0; pass < 3; ++pass) {
    fit = fit_plane_lsq(points, out.inliers);
    if (support(fit, &out.inliers) < 3) fail(ErrorCode::NoConsensus, "plane refit lost its support");
  }
  fit = fit_plane_lsq(points, out.inliers);
  out.plane = fit;
  out.gamma = height / fit.d;
  return out;
}

}  // namespace vokit::ego
