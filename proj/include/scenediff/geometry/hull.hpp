#pragma once

#include <vector>

#include "scenediff/geometry/point_cloud.hpp"

namespace scenediff::geometry {

struct Tolerances {
  /// Visibility threshold while building hulls; also the allowed overshoot of
  /// input points beyond a facet plane.
  static constexpr double hull = 1e-9;
  /// Margin for strict containment.
  static constexpr double containment = 1e-12;
};

/// Facet plane: normal . x == offset on the plane, normal points outward.
struct Facet {
  Vec3 normal;
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

struct ConvexHull {
  std::vector<Vec3> vertices;
  std::vector<Facet> facets;
  /// Triangles as indices into `vertices`, parallel to `facets`.
  std::vector<std::array<std::size_t, 3>> triangles;
};

/// Incremental 3D hull. Throws GeometryError when the cloud is coplanar,
/// collinear or too small to span three dimensions.
ConvexHull convex_hull(const PointCloud& cloud);

struct HullSummary {
  ConvexHull hull;
  Vec3 centroid;
  /// Smallest distance from the centroid to any facet plane.
  double d0 = 0.0;
};

HullSummary hull_and_centroid(const PointCloud& cloud);

/// True iff p is strictly inside every facet plane.
bool contains(const ConvexHull& hull, const Vec3& p);

}  // namespace scenediff::geometry
