#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "vokit/bundle_adjustment.hpp"
#include "vokit/error.hpp"

namespace vokit::ego {

namespace {

struct Feature {
  Vec3 X;           // back-projected point in the first camera
  double template_value;
};

struct Warped {
  bool inside = false;
  Vec3 P;
  PixelPoint q;
};

Warped warp(const Pose& pose, const Feature& f, const CameraIntrinsics& k, const Image& I2) {
  Warped w;
  w.P = pose.R * f.X + pose.T;
  if (!(w.P.z() >= kMinDepth)) return w;
  const NormalizedPoint n{w.P.x() / w.P.z(), w.P.y() / w.P.z()};
  w.q = pixel_from_normalized(k, n);
  w.inside = w.q.x >= 1.0 && w.q.y >= 1.0 && w.q.x <= I2.width() - 2 && w.q.y <= I2.height() - 2;
  return w;
}

}  // namespace

DirectResult direct_method_refine(const Image& I1, const Image& I2, std::span<const PixelPoint> features,
                                  const CameraIntrinsics& k, const Pose& init, std::span<const double> depths,
                                  const DirectConfig& cfg) {
  if (features.size() != depths.size()) fail(ErrorCode::InvalidArgument, "one depth per feature is required");
  k.validate();
  DirectResult res;
  res.pose = init;

  std::vector<Feature> active;
  active.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!(depths[i] >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "feature depths must be positive");
    if (!I1.contains(features[i].x, features[i].y)) {
      ++res.dropped;
      continue;
    }
    const Feature f{depths[i] * normalized_from_pixel(k, features[i]).homogeneous(),
                    I1.sample(features[i].x, features[i].y)};
    if (warp(init, f, k, I2).inside) {
      active.push_back(f);
    } else {
      ++res.dropped;
    }
  }
  if (active.size() < 6) fail(ErrorCode::InvalidArgument, "too few features remain inside both images");

  auto cost_of = [&](const Pose& pose, std::vector<bool>* outside) {
    double c = 0.0;
    bool all_inside = true;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Warped w = warp(pose, active[i], k, I2);
      if (!w.inside) {
        all_inside = false;
        if (outside != nullptr) (*outside)[i] = true;
        continue;
      }
      const double r = I2.sample(w.q.x, w.q.y) - active[i].template_value;
      c += r * r;
    }
    return all_inside ? c : std::numeric_limits<double>::infinity();
  };

  const double fx = k.f * k.s_x;
  const double fy = k.f * k.s_y;
  const double fs = k.f * k.s_theta;
  double cost = cost_of(res.pose, nullptr);
  res.trace.push_back(cost);
  double lambda = cfg.damping;

  while (res.iterations < cfg.max_iters) {
    if (cost == 0.0) {
      res.converged = true;
      break;
    }
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const Feature& f : active) {
      const Warped w = warp(res.pose, f, k, I2);
      const double r = I2.sample(w.q.x, w.q.y) - f.template_value;
      const Flow2 grad = flow::gradient(I2, w.q);
      const double iz = 1.0 / w.P.z();
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << iz, 0.0, -w.P.x() * iz * iz,
             0.0, iz, -w.P.y() * iz * iz;
      Eigen::Matrix2d dq;
      dq << fx, fs,
            0.0, fy;
      Eigen::Matrix<double, 3, 6> dP;
      dP.leftCols<3>() = -skew(w.P);
      dP.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 1, 6> J = Eigen::RowVector2d(grad.u, grad.v) * dq * dpi * dP;
      H.noalias() += J.transpose() * J;
      g.noalias() -= J.transpose() * r;
    }

    bool accepted = false;
    bool stop = false;
    while (!accepted && !stop) {
      Eigen::Matrix<double, 6, 6> Hd = H;
      Hd.diagonal() *= 1.0 + lambda;
      const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(Hd);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        fail(ErrorCode::RankDeficientNormalEquations, "photometric normal equations are singular");
      }
      const Eigen::Matrix<double, 6, 1> d = ldlt.solve(g);
      const double predicted = d.dot(g) + lambda * d.dot(H.diagonal().cwiseProduct(d));
      if (!(predicted > cfg.tolerance * cost)) {
        res.converged = true;
        stop = true;
        break;
      }
      const Mat3 dR = exp_rotation(d.head<3>());
      const Pose candidate{dR * res.pose.R, dR * res.pose.T + d.tail<3>()};
      std::vector<bool> outside(active.size(), false);
      double new_cost = cost_of(candidate, &outside);
      if (!std::isfinite(new_cost)) {
        // Features leaving the image are dropped; both poses are then compared
        // on the same remaining set.
        std::vector<Feature> kept;
        for (std::size_t i = 0; i < active.size(); ++i) {
          if (outside[i]) {
            ++res.dropped;
          } else {
            kept.push_back(active[i]);
          }
        }
        active.swap(kept);
        if (active.size() < 6) fail(ErrorCode::DivergedBA, "direct refinement lost its features");
        cost = cost_of(res.pose, nullptr);
        new_cost = cost_of(candidate, nullptr);
      }
      if (new_cost < cost) {
        const double rel = (cost - new_cost) / cost;
        res.pose = candidate;
        cost = new_cost;
        res.trace.push_back(cost);
        ++res.iterations;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < cfg.tolerance) {
          res.converged = true;
          stop = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) {
          if (predicted > 1e-6 * cost) fail(ErrorCode::DivergedBA, "no photometric step reduces the objective");
          res.converged = true;
          stop = true;
        }
      }
    }
    if (stop) break;
  }
  return res;
}

}  // namespace vokit::ego
