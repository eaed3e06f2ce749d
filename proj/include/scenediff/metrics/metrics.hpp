#pragma once

#include <optional>
#include <vector>

#include "scenediff/geometry/hull.hpp"
#include "scenediff/geometry/point_cloud.hpp"

namespace scenediff::metrics {

using geometry::PointCloud;
using geometry::Vec3;

/// Sum of both directional mean squared nearest-neighbor distances (m^2).
double chamfer(const PointCloud& a, const PointCloud& b);
/// Quadratic reference implementation of chamfer.
double chamfer_brute(const PointCloud& a, const PointCloud& b);

enum class EmdMode { Exact, Approx, Auto };

struct EmdResult {
  double distance = 0.0;  // mean matched Euclidean distance (m)
  /// Lower bound from the dual; equals distance for exact solves.
  double lower_bound = 0.0;
  bool exact = true;

  /// (distance - lower_bound) / distance, 0 when distance is 0.
  double relative_gap() const;
};

/// Auto switches to the auction solver above this many points.
inline constexpr std::size_t kExactEmdLimit = 512;

EmdResult emd(const PointCloud& a, const PointCloud& b, EmdMode mode = EmdMode::Auto);

/// Minimum-cost perfect matching on a square cost matrix (row-major n x n).
/// Returns the column assigned to each row.
std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n);

inline constexpr double kDefaultF1Tau = 0.1;

/// Harmonic mean of precision (a near b) and recall (b near a) at radius tau.
double f1(const PointCloud& a, const PointCloud& b, double tau = kDefaultF1Tau);

/// Mean squared distance of guiding points to a centroid (m^2).
double guiding_mse(const PointCloud& guiding, const Vec3& centroid);

struct InterpenetrationResult {
  double fraction = 0.0;
  /// Entities whose cloud did not span three dimensions.
  std::vector<std::size_t> skipped;
};

/// Fraction of predicted points strictly inside the convex hull of at least
/// one entity cloud.
InterpenetrationResult ip_3d(const PointCloud& pred, const std::vector<PointCloud>& entities);
InterpenetrationResult ip_3d(const PointCloud& pred, const std::vector<std::optional<geometry::ConvexHull>>& hulls);

struct MetricReport {
  double cd = 0.0;
  double emd = 0.0;
  double f1 = 0.0;
  std::optional<double> guiding_mse;
  std::optional<double> ip3d;
};

}  // namespace scenediff::metrics
