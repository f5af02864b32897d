#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "nbsel/cell_list.hpp"

namespace nbsel {

// Error reduction contributed by one cell when a feature with
// present-probabilities (c, d) is folded in:
//   min(a,b) - [min(ac, bd) + min(a(1-c), b(1-d))]
// computed in the closed form 0.5 * (|A - B| - |A| + |B|) with A = a - b and
// B = ac - bd. Never negative.
inline double reduction_closed_form(double a, double b, double c, double d) {
  const double A = a - b;
  const double B = a * c - b * d;
  return 0.5 * (std::abs(A - B) - std::abs(A) + std::abs(B));
}

// True when splitting the cell on a feature (c, d) leaves its error
// contribution unchanged. In ratio form: c/d and (1-c)/(1-d) lie on the same
// side of alpha = b/a, reading x/0 as +inf for x > 0 and 0/0 as equal to
// alpha. The multiplied form below needs no division: the split improves the
// cell exactly when ac - bd and a(1-c) - b(1-d) have strictly opposite
// signs. A cell with a = 0 carries no error, so nothing can improve it.
inline bool no_improvement_test(double a, double b, double c, double d) {
  const double u = a * c - b * d;
  const double v = a * (1.0 - c) - b * (1.0 - d);
  if (u == 0.0 || v == 0.0) return true;
  return (u > 0.0) == (v > 0.0);
}

// Intersection over all cells of the per-cell no-improvement regions in the
// (c, d) unit square: a parallelogram bounded by the lines c = alpha*d and
// 1-c = alpha*(1-d) for the innermost alpha on each side of 1. A cell with
// a == b (alpha exactly 1) collapses the region to the diagonal c = d, which
// the two bounds alone cannot express, hence the extra flag.
struct NoImprovementRegion {
  std::optional<double> alpha_lo;  // largest b/a below 1
  std::optional<double> alpha_hi;  // smallest b/a above 1
  bool diagonal_only = false;      // some cell has a == b exactly

  // Membership in the region: (c, d) improves no cell of the list the
  // region was computed from.
  bool contains(double c, double d) const {
    if (diagonal_only) return c == d;
    if (alpha_lo && !no_improvement_test(1.0, *alpha_lo, c, d)) return false;
    if (alpha_hi && !no_improvement_test(1.0, *alpha_hi, c, d)) return false;
    return true;
  }
};

// Region of the given list, or nullopt when no cell has both a > 0 and
// b > 0; the total error is already zero then and every feature is equally
// unable to improve it.
inline std::optional<NoImprovementRegion> region_parallelogram(const CellList& list) {
  NoImprovementRegion region;
  bool any = false;
  for (const Cell& cell : list.cells) {
    if (!(cell.a > 0.0) || !(cell.b > 0.0)) continue;
    any = true;
    const double alpha = cell.b / cell.a;
    if (alpha > 1.0) {
      if (!region.alpha_hi || alpha < *region.alpha_hi) region.alpha_hi = alpha;
    } else if (alpha < 1.0) {
      if (!region.alpha_lo || alpha > *region.alpha_lo) region.alpha_lo = alpha;
    } else {
      region.diagonal_only = true;
    }
  }
  if (!any) return std::nullopt;
  return region;
}

namespace detail {

inline double segment_distance(double px, double py, double ax, double ay,
                               double bx, double by) {
  const double abx = bx - ax;
  const double aby = by - ay;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((px - ax) * abx + (py - ay) * aby) / len2, 0.0, 1.0);
  }
  const double dx = px - (ax + t * abx);
  const double dy = py - (ay + t * aby);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

// Shortest Euclidean distance from the point (c, d) to the region's boundary
// lines, each clipped to the unit square. Used to order candidates when no
// remaining feature improves the error: points near the boundary are the
// most likely to escape the region once further features are added.
inline double boundary_distance(const NoImprovementRegion& region, double c, double d) {
  if (region.diagonal_only) {
    return detail::segment_distance(c, d, 0.0, 0.0, 1.0, 1.0);
  }
  double best = std::numeric_limits<double>::infinity();
  const auto line_pair = [&](double alpha) {
    // c = alpha * d, from the origin up to the unit-square edge.
    const double d_hi = std::min(1.0, 1.0 / alpha);
    best = std::min(best, detail::segment_distance(c, d, 0.0, 0.0, alpha * d_hi, d_hi));
    // 1 - c = alpha * (1 - d), ending at (1, 1).
    const double d_lo = std::max(0.0, 1.0 - 1.0 / alpha);
    best = std::min(best,
                    detail::segment_distance(c, d, 1.0 - alpha * (1.0 - d_lo), d_lo, 1.0, 1.0));
  };
  if (region.alpha_lo) line_pair(*region.alpha_lo);
  if (region.alpha_hi) line_pair(*region.alpha_hi);
  return best;
}

}  // namespace nbsel
