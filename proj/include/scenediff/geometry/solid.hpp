#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "scenediff/geometry/point_cloud.hpp"

namespace scenediff::geometry {

using Vec2 = Eigen::Vector2d;

// Primitive parts, expressed in the solid's local frame (z up).

struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);

  friend bool operator==(const Box&, const Box&) = default;
};

/// Vertical cylinder standing on `base_center`.
struct Cylinder {
  Vec3 base_center = Vec3::Zero();
  double radius = 0.5;
  double height = 1.0;

  friend bool operator==(const Cylinder&, const Cylinder&) = default;
};

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::UnitZ();
  double radius = 0.1;

  friend bool operator==(const Capsule&, const Capsule&) = default;
};

/// Simple polygon in the xy plane extruded over [z_min, z_min + height].
struct Prism {
  std::vector<Vec2> polygon;
  double z_min = 0.0;
  double height = 1.0;

  friend bool operator==(const Prism&, const Prism&) = default;
};

using Primitive = std::variant<Box, Cylinder, Capsule, Prism>;

/// Position plus rotation about the vertical axis.
struct Pose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;

  Vec3 to_world(const Vec3& local) const;
  Vec3 to_local(const Vec3& world) const;

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Union of primitives placed with one pose.
struct Solid {
  std::vector<Primitive> parts;
  Pose pose;

  bool contains_local(const Vec3& local) const;
  bool contains(const Vec3& world) const { return contains_local(pose.to_local(world)); }
  /// Local axis-aligned bounds of the union.
  std::pair<Vec3, Vec3> local_bounds() const;
  /// World axis-aligned bounds (corners of the local box under the pose).
  std::pair<Vec3, Vec3> world_bounds() const;

  friend bool operator==(const Solid&, const Solid&) = default;
};

double volume(const Primitive& part);
bool contains(const Primitive& part, const Vec3& local);

/// Draws `count` points i.i.d. uniform over the solid interior by rejection
/// against its bounding box. Throws GeometryError on a zero-volume part.
PointCloud sample_interior(const Solid& solid, std::size_t count, std::uint64_t seed);

}  // namespace scenediff::geometry
