#pragma once

#include <span>
#include <vector>

#include "tidyplan/world.hpp"

namespace tidy {

struct EllipseFit {
  Vec2 center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  /// Major-axis direction in [0, 180) degrees.
  double angle = 0.0;
  /// False for near-circular fits (a / b < 1.05).
  bool eccentricity_ok = false;
};

inline constexpr double kMinAxisRatio = 1.05;

/// Direct algebraic least-squares conic fit constrained to ellipses
/// (4AC - B^2 = 1), solved as a 3x3 eigenproblem on normalized points.
/// Throws "degenerate point set" for fewer than six or collinear points and
/// "non-elliptic fit" when no elliptic solution exists.
EllipseFit fit_ellipse(std::span<const Vec2> points);

/// Smallest rotation in (-45, 45] taking the major axis onto a table axis;
/// 0 for near-circular fits.
double alignment_rotation(const EllipseFit& fit);

/// Evenly spaced points along the footprint boundary, starting at the middle of
/// the local bottom edge and walking counter-clockwise. Requires samples >= 8.
std::vector<Vec2> footprint_points(const ObjectInstance& obj, int samples);

/// Rotation bin whose angle is closest to the object's axis-aligned
/// orientation (current theta plus alignment_rotation of its footprint fit).
int aligned_rotation_bin(const ObjectInstance& obj, const Workspace& ws);

}  // namespace tidy
