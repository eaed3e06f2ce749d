#pragma once

#include "scenediff/geometry/point_cloud.hpp"

namespace scenediff::geometry {

/// Rotation about z followed by a translation.
struct ZLockedTransform {
  double angle = 0.0;  // radians
  Vec3 translation = Vec3::Zero();

  Mat3 rotation() const { return rotation_z(angle); }
  Vec3 apply(const Vec3& p) const { return rotation() * p + translation; }
  PointCloud apply(const PointCloud& cloud) const;
};

struct AlignmentReport {
  ZLockedTransform transform;  // maps source onto target
  double fitness = 0.0;        // inliers / |source|
  double inlier_mse = 0.0;     // m^2, over inliers
  double correspondence_pct = 0.0;
  int iterations = 0;
};

struct IcpOptions {
  int max_iterations = 50;
  double inlier_radius = 0.1;  // m
  /// Correspondences for correspondence_pct are counted within this multiple
  /// of the inlier radius.
  double correspondence_factor = 2.0;
  double convergence = 1e-10;
};

/// Point-to-point ICP restricted to a yaw rotation plus a 3D translation,
/// initialised by matching centroids. Returns fitness 0 when no source point
/// has a neighbor within the inlier radius at the start.
AlignmentReport icp_align_z_locked(const PointCloud& source, const PointCloud& target,
                                   const IcpOptions& options = {});

}  // namespace scenediff::geometry
