#include "vokit/flow.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "vokit/error.hpp"

namespace vokit::flow {

WarpParams WarpParams::translation(double u, double v) {
  WarpParams w;
  w.kind = WarpKind::Translation;
  w.p = Eigen::Vector2d(u, v);
  return w;
}

WarpParams WarpParams::affine() {
  WarpParams w;
  w.kind = WarpKind::Affine;
  w.p = Eigen::VectorXd::Zero(6);
  return w;
}

Flow2 WarpParams::translation_part() const {
  return kind == WarpKind::Translation ? Flow2{p(0), p(1)} : Flow2{p(4), p(5)};
}

void WarpParams::set_translation(const Flow2& t) {
  const int at = kind == WarpKind::Translation ? 0 : 4;
  p(at) = t.u;
  p(at + 1) = t.v;
}

Vec2 WarpParams::displacement(double wx, double wy) const {
  if (kind == WarpKind::Translation) return {p(0), p(1)};
  return {p(0) * wx + p(1) * wy + p(4), p(2) * wx + p(3) * wy + p(5)};
}

void WarpParams::validate() const {
  if (p.size() != size()) fail(ErrorCode::InvalidArgument, "warp parameter count does not match warp kind");
}

namespace {

/// Integer base plus fractional part in [0, 1).
struct Split {
  int i = 0;
  double f = 0.0;
};

Split split(double v) {
  const double fl = std::floor(v);
  return {static_cast<int>(fl), v - fl};
}

Split add(Split a, Split b) {
  Split s{a.i + b.i, a.f + b.f};
  if (s.f >= 1.0) {
    s.i += 1;
    s.f -= 1.0;
  }
  return s;
}

Split add(Split a, int offset) { return {a.i + offset, a.f}; }

double value_at(const Image& img, Split x, Split y) { return img.sample_split(x.i, x.f, y.i, y.f); }

Vec2 gradient_at(const Image& img, Split x, Split y) {
  const double gx = 0.5 * (img.sample_split(x.i + 1, x.f, y.i, y.f) - img.sample_split(x.i - 1, x.f, y.i, y.f));
  const double gy = 0.5 * (img.sample_split(x.i, x.f, y.i + 1, y.f) - img.sample_split(x.i, x.f, y.i - 1, y.f));
  return {gx, gy};
}

struct Window {
  std::vector<int> wx;
  std::vector<int> wy;
  std::vector<double> g;
  double weight_sum = 0.0;
};

Window make_window(const LkConfig& cfg) {
  if (cfg.window < 3 || cfg.window % 2 == 0) fail(ErrorCode::InvalidArgument, "window must be odd and >= 3");
  const int r = cfg.window / 2;
  const double sigma = cfg.sigma > 0.0 ? cfg.sigma : cfg.window / 4.0;
  Window w;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double g = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      w.wx.push_back(x);
      w.wy.push_back(y);
      w.g.push_back(g);
      w.weight_sum += g;
    }
  }
  return w;
}

/// dW/dp for the sample at window offset (wx, wy).
Eigen::MatrixXd warp_jacobian(WarpKind kind, double wx, double wy) {
  if (kind == WarpKind::Translation) return Eigen::Matrix2d::Identity();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, 6);
  J(0, 0) = wx;
  J(0, 1) = wy;
  J(0, 4) = 1.0;
  J(1, 2) = wx;
  J(1, 3) = wy;
  J(1, 5) = 1.0;
  return J;
}

/// Sample position of window offset k under `warp`.
struct Placement {
  Split x;
  Split y;
};

class PatchGeometry {
 public:
  PatchGeometry(const PixelPoint& center, const LkConfig& cfg)
      : window_(make_window(cfg)), cx_(split(center.x)), cy_(split(center.y)) {}

  [[nodiscard]] const Window& window() const { return window_; }
  [[nodiscard]] std::size_t size() const { return window_.g.size(); }

  [[nodiscard]] Placement templ(std::size_t k) const { return {add(cx_, window_.wx[k]), add(cy_, window_.wy[k])}; }

  [[nodiscard]] Placement warped(std::size_t k, const WarpParams& warp) const {
    const Vec2 d = warp.displacement(window_.wx[k], window_.wy[k]);
    return {add(templ(k).x, split(d.x())), add(templ(k).y, split(d.y()))};
  }

 private:
  Window window_;
  Split cx_;
  Split cy_;
};

std::vector<double> template_values(const Image& I1, const PatchGeometry& geo) {
  std::vector<double> t(geo.size());
  for (std::size_t k = 0; k < geo.size(); ++k) {
    const Placement pl = geo.templ(k);
    t[k] = value_at(I1, pl.x, pl.y);
  }
  return t;
}

double objective(const Image& I2, const PatchGeometry& geo, const std::vector<double>& templ,
                 const WarpParams& warp) {
  double J = 0.0;
  for (std::size_t k = 0; k < geo.size(); ++k) {
    const Placement pl = geo.warped(k, warp);
    const double e = value_at(I2, pl.x, pl.y) - templ[k];
    J += geo.window().g[k] * e * e;
  }
  return J;
}

void check_hessian(const Eigen::MatrixXd& H, double weight_sum, const LkConfig& cfg) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()(0) / weight_sum >= cfg.min_eigenvalue)) {
    fail(ErrorCode::SingularHessian, "patch lacks two-dimensional structure");
  }
}

Eigen::MatrixXd affine_matrix(const Eigen::VectorXd& p) {
  Eigen::Matrix3d M;
  M << 1.0 + p(0), p(1), p(4),
       p(2), 1.0 + p(3), p(5),
       0.0, 0.0, 1.0;
  return M;
}

WarpParams compose_with_inverse(const WarpParams& warp, const Eigen::VectorXd& dp) {
  WarpParams out = warp;
  if (warp.kind == WarpKind::Translation) {
    out.p = warp.p - dp;
    return out;
  }
  const Eigen::Matrix3d Md = affine_matrix(dp);
  if (std::abs(Md.determinant()) < 1e-12) fail(ErrorCode::NonInvertibleIncrement, "degenerate affine increment");
  const Eigen::Matrix3d M = affine_matrix(warp.p) * Md.inverse();
  out.p << M(0, 0) - 1.0, M(0, 1), M(1, 0), M(1, 1) - 1.0, M(0, 2), M(1, 2);
  return out;
}

/// Shared accept/terminate loop. `solve_step` returns the increment at the
/// current warp, `apply` produces the candidate warp.
TrackResult iterate(const Image& I2, const PatchGeometry& geo, const std::vector<double>& templ,
                    const WarpParams& init, const LkConfig& cfg,
                    const std::function<Eigen::VectorXd(const WarpParams&)>& solve_step,
                    const std::function<WarpParams(const WarpParams&, const Eigen::VectorXd&)>& apply,
                    int& assemblies) {
  TrackResult res;
  WarpParams warp = init;
  double J = objective(I2, geo, templ, warp);
  res.objective_trace.push_back(J);
  bool step_small = false;
  int it = 0;
  while (it < cfg.max_iterations) {
    ++it;
    Eigen::VectorXd dp = solve_step(warp);
    step_small = dp.norm() < cfg.epsilon;
    WarpParams candidate = apply(warp, dp);
    double J_new = objective(I2, geo, templ, candidate);
    // Halve a step that overshoots; keep the best-so-far warp if none helps.
    for (int h = 0; h < 4 && J_new > J; ++h) {
      dp *= 0.5;
      candidate = apply(warp, dp);
      J_new = objective(I2, geo, templ, candidate);
    }
    if (J_new > J) break;
    warp = candidate;
    J = J_new;
    res.objective_trace.push_back(J);
    if (step_small) break;
  }
  res.warp = warp;
  res.displacement = warp.translation_part();
  res.iterations = it;
  res.residual = J / geo.window().weight_sum;
  res.converged = step_small && res.residual <= cfg.max_residual;
  res.hessian_assemblies = assemblies;
  res.levels_run = 1;
  return res;
}

Image downsample(const Image& src) {
  static constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int w = src.width();
  const int h = src.height();
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  Image horiz(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * src(reflect(x + k, w), y);
      horiz(x, y) = acc;
    }
  }
  Image filt(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * horiz(x, reflect(y + k, h));
      filt(x, y) = acc;
    }
  }
  const int cw = (w + 1) / 2;
  const int ch = (h + 1) / 2;
  Image out(cw, ch);
  for (int y = 0; y < ch; ++y) {
    const int y0 = 2 * y;
    const int y1 = reflect(2 * y + 1, h);
    for (int x = 0; x < cw; ++x) {
      const int x0 = 2 * x;
      const int x1 = reflect(2 * x + 1, w);
      out(x, y) = 0.25 * (filt(x0, y0) + filt(x1, y0) + filt(x0, y1) + filt(x1, y1));
    }
  }
  return out;
}

}  // namespace

Pyramid build_pyramid(const Image& img, int levels, int min_size) {
  if (levels < 1) fail(ErrorCode::InvalidArgument, "pyramid needs at least one level");
  if (img.empty()) fail(ErrorCode::InvalidArgument, "empty image");
  const long need = (1L << (levels - 1)) * static_cast<long>(min_size);
  if (std::min(img.width(), img.height()) < need) {
    fail(ErrorCode::TooManyLevels, "image too small for " + std::to_string(levels) + " levels");
  }
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(levels));
  out.push_back(img);
  for (int l = 1; l < levels; ++l) out.push_back(downsample(out.back()));
  return Pyramid(std::move(out));
}

Flow2 gradient(const Image& img, const PixelPoint& at) {
  if (!(at.x >= 1.0 && at.y >= 1.0 && at.x <= img.width() - 2 && at.y <= img.height() - 2)) {
    fail(ErrorCode::OutOfBounds, "gradient needs one pixel of margin");
  }
  const Vec2 g = gradient_at(img, split(at.x), split(at.y));
  return {g.x(), g.y()};
}

double lk_objective(const Image& I1, const Image& I2, const PixelPoint& center, const WarpParams& warp,
                    const LkConfig& cfg) {
  warp.validate();
  const PatchGeometry geo(center, cfg);
  return objective(I2, geo, template_values(I1, geo), warp);
}

Eigen::MatrixXd lk_gauss_newton_hessian(const Image& I2, const PixelPoint& center, const WarpParams& warp,
                                        const LkConfig& cfg) {
  warp.validate();
  const PatchGeometry geo(center, cfg);
  const int n = warp.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < geo.size(); ++k) {
    const Placement pl = geo.warped(k, warp);
    const Vec2 g = gradient_at(I2, pl.x, pl.y);
    const Eigen::RowVectorXd sd = g.transpose() * warp_jacobian(warp.kind, geo.window().wx[k], geo.window().wy[k]);
    H += geo.window().g[k] * sd.transpose() * sd;
  }
  return H;
}

TrackResult lk_forward_additive(const Image& I1, const Image& I2, const PixelPoint& center,
                                const WarpParams& init, const LkConfig& cfg) {
  init.validate();
  const PatchGeometry geo(center, cfg);
  const std::vector<double> templ = template_values(I1, geo);
  const int n = init.size();
  int assemblies = 0;

  auto solve_step = [&](const WarpParams& warp) -> Eigen::VectorXd {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < geo.size(); ++k) {
      const Placement pl = geo.warped(k, warp);
      const double e = templ[k] - value_at(I2, pl.x, pl.y);
      const Vec2 g = gradient_at(I2, pl.x, pl.y);
      const Eigen::RowVectorXd sd = g.transpose() * warp_jacobian(warp.kind, geo.window().wx[k], geo.window().wy[k]);
      H += geo.window().g[k] * sd.transpose() * sd;
      b += geo.window().g[k] * e * sd.transpose();
    }
    ++assemblies;
    check_hessian(H, geo.window().weight_sum, cfg);
    return H.ldlt().solve(b);
  };
  auto apply = [](const WarpParams& warp, const Eigen::VectorXd& dp) {
    WarpParams out = warp;
    out.p += dp;
    return out;
  };
  TrackResult res = iterate(I2, geo, templ, init, cfg, solve_step, apply, assemblies);
  res.hessian_assemblies = assemblies;
  return res;
}

TrackResult lk_inverse_compositional(const Image& I1, const Image& I2, const PixelPoint& center,
                                     const WarpParams& init, const LkConfig& cfg) {
  init.validate();
  const PatchGeometry geo(center, cfg);
  const std::vector<double> templ = template_values(I1, geo);
  const int n = init.size();

  // Steepest-descent images and Hessian of the template at the identity warp.
  std::vector<Eigen::RowVectorXd> sd(geo.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < geo.size(); ++k) {
    const Placement pl = geo.templ(k);
    const Vec2 g = gradient_at(I1, pl.x, pl.y);
    sd[k] = g.transpose() * warp_jacobian(init.kind, geo.window().wx[k], geo.window().wy[k]);
    H += geo.window().g[k] * sd[k].transpose() * sd[k];
  }
  int assemblies = 1;
  check_hessian(H, geo.window().weight_sum, cfg);
  const Eigen::LDLT<Eigen::MatrixXd> H_ldlt(H);

  auto solve_step = [&](const WarpParams& warp) -> Eigen::VectorXd {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < geo.size(); ++k) {
      const Placement pl = geo.warped(k, warp);
      const double e = value_at(I2, pl.x, pl.y) - templ[k];
      b += geo.window().g[k] * e * sd[k].transpose();
    }
    return H_ldlt.solve(b);
  };
  auto apply = [](const WarpParams& warp, const Eigen::VectorXd& dp) { return compose_with_inverse(warp, dp); };
  TrackResult res = iterate(I2, geo, templ, init, cfg, solve_step, apply, assemblies);
  res.hessian_assemblies = assemblies;
  return res;
}

TrackResult track_pyramidal(const Pyramid& p1, const Pyramid& p2, const PixelPoint& center, const LkConfig& cfg,
                            const WarpParams& init) {
  if (p1.levels() != p2.levels() || p1.levels() < 1) {
    fail(ErrorCode::InvalidArgument, "pyramids must have equal, non-zero depth");
  }
  init.validate();
  WarpParams warp = init;
  TrackResult out;
  int assemblies = 0;
  int levels_run = 0;
  for (int level = p1.levels() - 1; level >= 0; --level) {
    const double s = Pyramid::scale(level);
    const PixelPoint c{(center.x + 0.5) / s - 0.5, (center.y + 0.5) / s - 0.5};
    WarpParams level_warp = warp;
    const Flow2 t = warp.translation_part();
    level_warp.set_translation({t.u / s, t.v / s});

    LkConfig level_cfg = cfg;
    level_cfg.max_iterations = level > 0 ? cfg.coarse_iterations : cfg.final_iterations;
    TrackResult r;
    try {
      r = cfg.inverse_compositional
              ? lk_inverse_compositional(p1.level(level), p2.level(level), c, level_warp, level_cfg)
              : lk_forward_additive(p1.level(level), p2.level(level), c, level_warp, level_cfg);
    } catch (const Error& e) {
      // Near the border a coarse patch may leave its level; skip that level.
      if (level == 0 || e.code() != ErrorCode::OutOfBounds) throw;
      continue;
    }
    assemblies += r.hessian_assemblies;
    ++levels_run;
    warp = r.warp;
    const Flow2 lt = r.warp.translation_part();
    warp.set_translation({lt.u * s, lt.v * s});
    if (level == 0) out = std::move(r);
  }
  out.warp = warp;
  out.displacement = warp.translation_part();
  out.hessian_assemblies = assemblies;
  out.levels_run = levels_run;
  return out;
}

double structure_tensor_score(const Image& img, const PixelPoint& at, int window) {
  if (window < 1) fail(ErrorCode::InvalidArgument, "window must be positive");
  const int r = window / 2;
  if (!(at.x - r >= 1.0 && at.y - r >= 1.0 && at.x + r <= img.width() - 2 && at.y + r <= img.height() - 2)) {
    fail(ErrorCode::OutOfBounds, "structure tensor window leaves the image");
  }
  const Split sx = split(at.x);
  const Split sy = split(at.y);
  double a = 0.0, b = 0.0, c = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const Vec2 g = gradient_at(img, add(sx, dx), add(sy, dy));
      a += g.x() * g.x();
      b += g.x() * g.y();
      c += g.y() * g.y();
    }
  }
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  a /= n;
  b /= n;
  c /= n;
  const double half_tr = 0.5 * (a + c);
  const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  return std::max(0.0, half_tr - disc);
}

ForwardBackwardResult forward_backward_check(const Pyramid& p1, const Pyramid& p2, const PixelPoint& center,
                                             const LkConfig& cfg) {
  ForwardBackwardResult res;
  res.forward = track_pyramidal(p1, p2, center, cfg);
  const PixelPoint landed{center.x + res.forward.displacement.u, center.y + res.forward.displacement.v};
  res.backward = track_pyramidal(p2, p1, landed, cfg);
  const double bx = landed.x + res.backward.displacement.u - center.x;
  const double by = landed.y + res.backward.displacement.v - center.y;
  res.discrepancy = std::hypot(bx, by);
  res.accepted = res.forward.converged && res.backward.converged && res.discrepancy < cfg.fb_threshold;
  return res;
}

std::vector<Feature> detect_features(const Image& img, int max_count, int window, int min_distance, int border,
                                     double min_score) {
  const int w = img.width();
  const int h = img.height();
  const int r = window / 2;
  const int margin = std::max(border, r + 1);
  if (max_count <= 0 || w <= 2 * margin || h <= 2 * margin) return {};

  // Integral images of the gradient products.
  const int W = w + 1;
  std::vector<double> sxx(static_cast<std::size_t>(W) * (h + 1), 0.0);
  std::vector<double> sxy(sxx.size(), 0.0);
  std::vector<double> syy(sxx.size(), 0.0);
  auto at = [W](int x, int y) { return static_cast<std::size_t>(y) * W + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      if (x > 0 && x < w - 1 && y > 0 && y < h - 1) {
        gx = 0.5 * (img(x + 1, y) - img(x - 1, y));
        gy = 0.5 * (img(x, y + 1) - img(x, y - 1));
      }
      sxx[at(x + 1, y + 1)] = gx * gx + sxx[at(x, y + 1)] + sxx[at(x + 1, y)] - sxx[at(x, y)];
      sxy[at(x + 1, y + 1)] = gx * gy + sxy[at(x, y + 1)] + sxy[at(x + 1, y)] - sxy[at(x, y)];
      syy[at(x + 1, y + 1)] = gy * gy + syy[at(x, y + 1)] + syy[at(x + 1, y)] - syy[at(x, y)];
    }
  }
  auto box = [&](const std::vector<double>& s, int x, int y) {
    return s[at(x + r + 1, y + r + 1)] - s[at(x - r, y + r + 1)] - s[at(x + r + 1, y - r)] + s[at(x - r, y - r)];
  };
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  std::vector<Feature> candidates;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const double a = box(sxx, x, y) / n;
      const double b = box(sxy, x, y) / n;
      const double c = box(syy, x, y) / n;
      const double score = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      if (score >= min_score) candidates.push_back({{static_cast<double>(x), static_cast<double>(y)}, score});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Feature& a, const Feature& b) { return a.score > b.score; });

  const int cell = std::max(1, min_distance);
  const int gw = w / cell + 1;
  const int gh = h / cell + 1;
  std::vector<std::vector<std::size_t>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<Feature> picked;
  const double min_d2 = static_cast<double>(min_distance) * min_distance;
  for (const Feature& f : candidates) {
    const int gx = static_cast<int>(f.at.x) / cell;
    const int gy = static_cast<int>(f.at.y) / cell;
    bool clear = true;
    for (int yy = std::max(0, gy - 1); yy <= std::min(gh - 1, gy + 1) && clear; ++yy) {
      for (int xx = std::max(0, gx - 1); xx <= std::min(gw - 1, gx + 1) && clear; ++xx) {
        for (const std::size_t idx : grid[static_cast<std::size_t>(yy) * gw + xx]) {
          const double dx = picked[idx].at.x - f.at.x;
          const double dy = picked[idx].at.y - f.at.y;
          if (dx * dx + dy * dy < min_d2) {
            clear = false;
            break;
          }
        }
      }
    }
    if (!clear) continue;
    grid[static_cast<std::size_t>(gy) * gw + gx].push_back(picked.size());
    picked.push_back(f);
    if (static_cast<int>(picked.size()) >= max_count) break;
  }
  return picked;
}

}  // namespace vokit::flow
