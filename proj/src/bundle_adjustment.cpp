#include "vokit/bundle_adjustment.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "vokit/error.hpp"

namespace vokit::ego {

namespace {

constexpr double kMaxLambda = 1e12;

int pose_dof(BAMode mode) {
  switch (mode) {
    case BAMode::MotionOnly:
      return 6;
    case BAMode::Full:
      return 5;
    case BAMode::StructureOnly:
      return 0;
  }
  return 0;
}

bool points_free(BAMode mode) { return mode != BAMode::MotionOnly; }

/// Orthonormal basis of the plane orthogonal to T.
Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& T) {
  const Vec3 t = T.normalized();
  const Vec3 helper = std::abs(t.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 b1 = t.cross(helper).normalized();
  const Vec3 b2 = t.cross(b1);
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = b1;
  B.col(1) = b2;
  return B;
}

struct PointLinearization {
  Eigen::Vector4d r = Eigen::Vector4d::Zero();  // reprojection pair, then prior pair
  Eigen::Matrix<double, 4, 6> Jp = Eigen::Matrix<double, 4, 6>::Zero();
  Eigen::Matrix<double, 4, 3> Jx = Eigen::Matrix<double, 4, 3>::Zero();
  bool valid = true;
};

PointLinearization linearize(const BAProblem& problem, const BAState& s, std::size_t j,
                             const Eigen::Matrix<double, 3, 2>& B, bool jacobians) {
  PointLinearization lin;
  const Correspondence& c = problem.corrs[j];
  const double w = std::sqrt(c.weight);
  const NormalizedPoint& x = points_free(problem.mode) ? s.points[j] : c.x_t;
  const double rho = s.inv_depths[j];
  const Vec3 P = s.pose.R * x.homogeneous() + rho * s.pose.T;
  if (!(rho > 0.0) || !(P.z() >= kMinDepth)) {
    lin.valid = false;
    return lin;
  }
  const double iz = 1.0 / P.z();
  lin.r(0) = w * (c.x_next.x - P.x() * iz);
  lin.r(1) = w * (c.x_next.y - P.y() * iz);
  if (points_free(problem.mode)) {
    lin.r(2) = w * (c.x_t.x - x.x);
    lin.r(3) = w * (c.x_t.y - x.y);
  }
  if (!jacobians) return lin;

  Eigen::Matrix<double, 2, 3> dpi;
  dpi << iz, 0.0, -P.x() * iz * iz,
         0.0, iz, -P.y() * iz * iz;
  const Eigen::Matrix<double, 2, 3> dr = -w * dpi;
  switch (problem.mode) {
    case BAMode::MotionOnly:
      lin.Jp.block<2, 3>(0, 0) = dr * (-skew(P));
      lin.Jp.block<2, 3>(0, 3) = dr * rho;
      break;
    case BAMode::Full:
      lin.Jp.block<2, 3>(0, 0) = dr * (-skew(P));
      lin.Jp.block<2, 2>(0, 3) = dr * (rho * B);
      break;
    case BAMode::StructureOnly:
      break;
  }
  if (points_free(problem.mode)) {
    lin.Jx.block<2, 1>(0, 0) = dr * s.pose.R.col(0);
    lin.Jx.block<2, 1>(0, 1) = dr * s.pose.R.col(1);
    lin.Jx.block<2, 1>(0, 2) = dr * s.pose.T;
    lin.Jx(2, 0) = -w;
    lin.Jx(3, 1) = -w;
  }
  return lin;
}

int rows_per_point(BAMode mode) { return points_free(mode) ? 4 : 2; }

double cost_of(const BAProblem& problem, const BAState& s) {
  const auto B = tangent_basis(s.pose.T.norm() > 0.0 ? s.pose.T : Vec3::UnitZ());
  double cost = 0.0;
  const int rows = rows_per_point(problem.mode);
  for (std::size_t j = 0; j < problem.corrs.size(); ++j) {
    const PointLinearization lin = linearize(problem, s, j, B, false);
    if (!lin.valid) return std::numeric_limits<double>::infinity();
    cost += lin.r.head(rows).squaredNorm();
  }
  return cost;
}

}  // namespace

BAState ba_initial_state(const BAProblem& problem) {
  if (problem.corrs.empty()) fail(ErrorCode::InvalidArgument, "bundle adjustment needs correspondences");
  if (problem.depths.size() != problem.corrs.size()) {
    fail(ErrorCode::InvalidArgument, "one depth per correspondence is required");
  }
  if (problem.mode == BAMode::Full && !(problem.pose.T.norm() > 0.0)) {
    fail(ErrorCode::InvalidArgument, "full bundle adjustment needs a nonzero translation to fix the scale");
  }
  BAState s;
  s.pose = problem.pose;
  s.inv_depths.reserve(problem.depths.size());
  for (const double z : problem.depths) {
    if (!(z >= kMinDepth)) fail(ErrorCode::NonPositiveDepth, "bundle adjustment depths must be positive");
    s.inv_depths.push_back(1.0 / z);
  }
  s.points.reserve(problem.corrs.size());
  for (const auto& c : problem.corrs) s.points.push_back(c.x_t);
  return s;
}

Eigen::VectorXd ba_residuals(const BAProblem& problem, const BAState& state) {
  const int rows = rows_per_point(problem.mode);
  const auto B = tangent_basis(state.pose.T.norm() > 0.0 ? state.pose.T : Vec3::UnitZ());
  Eigen::VectorXd r(rows * static_cast<Eigen::Index>(problem.corrs.size()));
  for (std::size_t j = 0; j < problem.corrs.size(); ++j) {
    const PointLinearization lin = linearize(problem, state, j, B, false);
    if (!lin.valid) fail(ErrorCode::NonPositiveDepth, "point moved behind the camera");
    r.segment(rows * static_cast<Eigen::Index>(j), rows) = lin.r.head(rows);
  }
  return r;
}

Eigen::MatrixXd ba_jacobian(const BAProblem& problem, const BAState& state) {
  const int rows = rows_per_point(problem.mode);
  const int np = pose_dof(problem.mode);
  const int nx = points_free(problem.mode) ? 3 : 0;
  const auto n = static_cast<Eigen::Index>(problem.corrs.size());
  const auto B = tangent_basis(state.pose.T.norm() > 0.0 ? state.pose.T : Vec3::UnitZ());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows * n, np + nx * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const PointLinearization lin = linearize(problem, state, static_cast<std::size_t>(j), B, true);
    if (!lin.valid) fail(ErrorCode::NonPositiveDepth, "point moved behind the camera");
    if (np > 0) J.block(rows * j, 0, rows, np) = lin.Jp.topLeftCorner(rows, np);
    if (nx > 0) J.block(rows * j, np + nx * j, rows, nx) = lin.Jx.topRows(rows);
  }
  return J;
}

BAState ba_retract(const BAProblem& problem, const BAState& state, const Eigen::VectorXd& delta) {
  const int np = pose_dof(problem.mode);
  BAState out = state;
  if (np > 0) {
    const Mat3 dR = exp_rotation(delta.head<3>());
    out.pose.R = dR * state.pose.R;
    out.pose.T = dR * state.pose.T;
    if (problem.mode == BAMode::MotionOnly) {
      out.pose.T += delta.segment<3>(3);
    } else {
      out.pose.T += tangent_basis(state.pose.T) * delta.segment<2>(3);
    }
  }
  if (points_free(problem.mode)) {
    for (std::size_t j = 0; j < state.points.size(); ++j) {
      const Eigen::Index at = np + 3 * static_cast<Eigen::Index>(j);
      out.points[j].x += delta(at);
      out.points[j].y += delta(at + 1);
      out.inv_depths[j] += delta(at + 2);
    }
  }
  if (problem.mode == BAMode::Full) {
    // Restore ||T|| and absorb the change into the inverse depths so that
    // rho * T, and with it every residual, is untouched.
    const double k = state.pose.T.norm() / out.pose.T.norm();
    out.pose.T *= k;
    for (double& rho : out.inv_depths) rho /= k;
  }
  return out;
}

double ba_objective(const BAProblem& problem, const BAState& state) { return cost_of(problem, state); }

BAResult bundle_adjust(const BAProblem& problem) {
  BAState state = ba_initial_state(problem);
  const int np = pose_dof(problem.mode);
  const bool free_pts = points_free(problem.mode);
  const std::size_t n = problem.corrs.size();
  const int rows = rows_per_point(problem.mode);

  BAResult res;
  double cost = cost_of(problem, state);
  if (!std::isfinite(cost)) fail(ErrorCode::NonPositiveDepth, "initial points are not in front of the camera");
  res.trace.push_back(cost);
  double lambda = problem.damping;

  while (res.iterations < problem.max_iters) {
    if (cost == 0.0) {
      res.converged = true;
      break;
    }
    // Block normal equations H d = g with g = -J^T r.
    const auto B = tangent_basis(state.pose.T.norm() > 0.0 ? state.pose.T : Vec3::UnitZ());
    Eigen::MatrixXd Hpp = Eigen::MatrixXd::Zero(np, np);
    Eigen::VectorXd gp = Eigen::VectorXd::Zero(np);
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> Hpx(free_pts ? n : 0);
    std::vector<Eigen::Matrix3d> Hxx(free_pts ? n : 0);
    std::vector<Eigen::Vector3d> gx(free_pts ? n : 0);
    for (std::size_t j = 0; j < n; ++j) {
      const PointLinearization lin = linearize(problem, state, j, B, true);
      const auto r = lin.r.head(rows);
      if (np > 0) {
        const auto Jp = lin.Jp.topLeftCorner(rows, np);
        Hpp.noalias() += Jp.transpose() * Jp;
        gp.noalias() -= Jp.transpose() * r;
      }
      if (free_pts) {
        const auto Jx = lin.Jx.topRows(rows);
        Hxx[j] = Jx.transpose() * Jx;
        gx[j] = -Jx.transpose() * r;
        if (np > 0) {
          Hpx[j] = lin.Jp.topLeftCorner(rows, np).transpose() * Jx;
        } else {
          Hpx[j].resize(0, 3);
        }
      }
    }
    for (int i = 0; i < np; ++i) {
      if (!(Hpp(i, i) > 0.0)) fail(ErrorCode::RankDeficientNormalEquations, "a pose parameter has no influence");
    }
    for (std::size_t j = 0; j < Hxx.size(); ++j) {
      for (int i = 0; i < 3; ++i) {
        if (!(Hxx[j](i, i) > 0.0)) {
          fail(ErrorCode::RankDeficientNormalEquations, "a point parameter has no influence");
        }
      }
    }

    bool accepted = false;
    bool stop = false;
    while (!accepted && !stop) {
      // Damped solve through the Schur complement on the pose block.
      Eigen::VectorXd d(np + (free_pts ? 3 * static_cast<Eigen::Index>(n) : 0));
      Eigen::VectorXd damp_diag(d.size());
      std::vector<Eigen::Matrix3d> Hxx_inv(Hxx.size());
      for (std::size_t j = 0; j < Hxx.size(); ++j) {
        Eigen::Matrix3d Hd = Hxx[j];
        Hd.diagonal() *= 1.0 + lambda;
        Hxx_inv[j] = Hd.inverse();
        damp_diag.segment<3>(np + 3 * static_cast<Eigen::Index>(j)) = lambda * Hxx[j].diagonal();
      }
      if (np > 0) {
        Eigen::MatrixXd S = Hpp;
        S.diagonal() *= 1.0 + lambda;
        damp_diag.head(np) = lambda * Hpp.diagonal();
        Eigen::VectorXd rhs = gp;
        for (std::size_t j = 0; j < Hxx.size(); ++j) {
          S.noalias() -= Hpx[j] * Hxx_inv[j] * Hpx[j].transpose();
          rhs.noalias() -= Hpx[j] * (Hxx_inv[j] * gx[j]);
        }
        const Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) {
          // Round-off in the Schur complement; more damping restores definiteness.
          lambda *= 10.0;
          if (lambda > kMaxLambda) {
            fail(ErrorCode::RankDeficientNormalEquations, "reduced normal equations are not positive definite");
          }
          continue;
        }
        d.head(np) = llt.solve(rhs);
      }
      for (std::size_t j = 0; j < Hxx.size(); ++j) {
        Eigen::Vector3d rj = gx[j];
        if (np > 0) rj -= Hpx[j].transpose() * d.head(np);
        d.segment<3>(np + 3 * static_cast<Eigen::Index>(j)) = Hxx_inv[j] * rj;
      }
      if (!d.allFinite()) fail(ErrorCode::RankDeficientNormalEquations, "normal equations produced a non-finite step");

      // Predicted decrease of the sum of squares for the damped step.
      Eigen::VectorXd g(d.size());
      if (np > 0) g.head(np) = gp;
      for (std::size_t j = 0; j < gx.size(); ++j) g.segment<3>(np + 3 * static_cast<Eigen::Index>(j)) = gx[j];
      const double predicted = d.dot(g) + d.dot(damp_diag.cwiseProduct(d));
      if (!(predicted > problem.tolerance * cost)) {
        res.converged = true;
        stop = true;
        break;
      }
      const BAState candidate = ba_retract(problem, state, d);
      const double new_cost = cost_of(problem, candidate);
      if (new_cost < cost) {
        const double rel = (cost - new_cost) / cost;
        state = candidate;
        cost = new_cost;
        res.trace.push_back(cost);
        ++res.iterations;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < problem.tolerance) {
          res.converged = true;
          stop = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > kMaxLambda) {
          if (predicted > 1e-6 * cost) fail(ErrorCode::DivergedBA, "no step reduces the objective at maximum damping");
          res.converged = true;
          stop = true;
        }
      }
    }
    if (stop) break;
  }

  res.pose = state.pose;
  res.points = free_pts ? state.points : std::vector<NormalizedPoint>{};
  if (!free_pts) {
    for (const auto& c : problem.corrs) res.points.push_back(c.x_t);
  }
  res.depths.reserve(n);
  for (const double rho : state.inv_depths) res.depths.push_back(1.0 / rho);
  return res;
}

double mean_reprojection_error(const Pose& pose, std::span<const Correspondence> corrs,
                               std::span<const double> depths) {
  if (corrs.empty() || corrs.size() != depths.size()) {
    fail(ErrorCode::InvalidArgument, "one depth per correspondence is required");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) sum += reprojection_error(pose, corrs[i], depths[i]);
  return sum / static_cast<double>(corrs.size());
}

}  // namespace vokit::ego
