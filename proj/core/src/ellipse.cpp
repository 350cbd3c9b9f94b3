#include "tidyplan/ellipse.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

namespace tidy {

EllipseFit fit_ellipse(std::span<const Vec2> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 6) throw Error("degenerate point set");

  // Normalize for conditioning: zero mean, unit RMS radius.
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) mean += Eigen::Vector2d(p.x, p.y);
  mean /= static_cast<double>(n);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d d = Eigen::Vector2d(p.x, p.y) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> cov_eig(cov);
  const double cmax = cov_eig.eigenvalues()(1);
  if (!(cmax > 0.0) || cov_eig.eigenvalues()(0) <= 1e-12 * cmax) {
    throw Error("degenerate point set");
  }
  const double scale = std::sqrt(cov.trace());

  Eigen::MatrixXd d1(n, 3);
  Eigen::MatrixXd d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (points[static_cast<std::size_t>(i)].x - mean.x()) / scale;
    const double y = (points[static_cast<std::size_t>(i)].y - mean.y()) / scale;
    d1.row(i) << x * x, x * y, y * y;
    d2.row(i) << x, y, 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;
  const Eigen::Matrix3d t = -s3.ldlt().solve(s2.transpose());
  const Eigen::Matrix3d m = s1 + s2 * t;
  // Premultiply by the inverse of the ellipse constraint matrix.
  Eigen::Matrix3d reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;

  const Eigen::EigenSolver<Eigen::Matrix3d> solver(reduced);
  const Eigen::Matrix3d vecs = solver.eigenvectors().real();
  int best = -1;
  double best_cond = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d v = vecs.col(k);
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (cond > best_cond) {
      best_cond = cond;
      best = k;
    }
  }
  if (best < 0) throw Error("non-elliptic fit");
  const Eigen::Vector3d quad = vecs.col(best);
  const Eigen::Vector3d lin = t * quad;
  const double a = quad(0), b = quad(1), c = quad(2);
  const double d = lin(0), e = lin(1), f = lin(2);

  Eigen::Matrix2d hess;
  hess << 2.0 * a, b, b, 2.0 * c;
  const Eigen::Vector2d center = hess.fullPivLu().solve(Eigen::Vector2d(-d, -e));
  const double fc = a * center.x() * center.x() + b * center.x() * center.y() +
                    c * center.y() * center.y() + d * center.x() + e * center.y() + f;

  Eigen::Matrix2d form;
  form << a, b / 2.0, b / 2.0, c;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> form_eig(form);
  double l0 = form_eig.eigenvalues()(0);
  double l1 = form_eig.eigenvalues()(1);
  if (!(l0 * l1 > 0.0)) throw Error("non-elliptic fit");
  double g = fc;
  Eigen::Vector2d major_dir;
  if (l0 > 0.0) {
    major_dir = form_eig.eigenvectors().col(0);
  } else {
    // Negative-definite form: flip signs so the smallest |eigenvalue| leads.
    std::swap(l0, l1);
    l0 = -l0;
    l1 = -l1;
    g = -g;
    major_dir = form_eig.eigenvectors().col(1);
  }
  if (!(g < 0.0)) throw Error("non-elliptic fit");

  EllipseFit fit;
  fit.semi_major = std::sqrt(-g / l0) * scale;
  fit.semi_minor = std::sqrt(-g / l1) * scale;
  fit.center = {mean.x() + center.x() * scale, mean.y() + center.y() * scale};
  double angle = std::atan2(major_dir.y(), major_dir.x()) * 180.0 / std::numbers::pi;
  angle = std::fmod(angle, 180.0);
  if (angle < 0.0) angle += 180.0;
  if (angle >= 180.0) angle -= 180.0;
  fit.angle = angle;
  fit.eccentricity_ok = fit.semi_major / fit.semi_minor >= kMinAxisRatio;
  return fit;
}

double alignment_rotation(const EllipseFit& fit) {
  if (!fit.eccentricity_ok) return 0.0;
  const double angle = fit.angle;
  if (angle < 45.0) return angle == 0.0 ? 0.0 : -angle;
  if (angle < 135.0) return 90.0 - angle;
  return 180.0 - angle;
}

std::vector<Vec2> footprint_points(const ObjectInstance& obj, int samples) {
  if (samples < 8) throw Error("footprint_points needs at least 8 samples");
  const double hx = obj.half_extents.x;
  const double hy = obj.half_extents.y;
  const double perimeter = 4.0 * (hx + hy);
  const double step = perimeter / samples;
  const double t = obj.pose.theta * std::numbers::pi / 180.0;
  const double cs = std::cos(t);
  const double sn = std::sin(t);
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(samples));
  // Arc length runs from the corner (-hx, -hy); sampling starts at the middle
  // of the bottom edge so the set is mirror symmetric about both local axes.
  for (int k = 0; k < samples; ++k) {
    double s = std::fmod(hx + k * step, perimeter);
    Vec2 local;
    if (s < 2.0 * hx) {
      local = {-hx + s, -hy};
    } else if ((s -= 2.0 * hx) < 2.0 * hy) {
      local = {hx, -hy + s};
    } else if ((s -= 2.0 * hy) < 2.0 * hx) {
      local = {hx - s, hy};
    } else {
      s -= 2.0 * hx;
      local = {-hx, hy - s};
    }
    out.push_back({obj.pose.x + cs * local.x - sn * local.y,
                   obj.pose.y + sn * local.x + cs * local.y});
  }
  return out;
}

int aligned_rotation_bin(const ObjectInstance& obj, const Workspace& ws) {
  const auto pts = footprint_points(obj, 64);
  const EllipseFit fit = fit_ellipse(pts);
  return ws.nearest_bin(obj.pose.theta + alignment_rotation(fit));
}

}  // namespace tidy
