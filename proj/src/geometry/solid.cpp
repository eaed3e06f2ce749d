#include "scenediff/geometry/solid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace scenediff::geometry {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

bool inside_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      inside = !inside;
    }
  }
  return inside;
}

std::pair<Vec3, Vec3> bounds(const Primitive& part) {
  return std::visit(
      overloaded{
          [](const Box& b) { return std::pair{Vec3(b.center - b.half_extents), Vec3(b.center + b.half_extents)}; },
          [](const Cylinder& c) {
            return std::pair{Vec3(c.base_center - Vec3(c.radius, c.radius, 0)),
                             Vec3(c.base_center + Vec3(c.radius, c.radius, c.height))};
          },
          [](const Capsule& c) {
            const Vec3 r = Vec3::Constant(c.radius);
            return std::pair{Vec3(c.a.cwiseMin(c.b) - r), Vec3(c.a.cwiseMax(c.b) + r)};
          },
          [](const Prism& p) {
            Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
            Vec3 hi = -lo;
            for (const Vec2& v : p.polygon) {
              lo.head<2>() = lo.head<2>().cwiseMin(v);
              hi.head<2>() = hi.head<2>().cwiseMax(v);
            }
            lo.z() = p.z_min;
            hi.z() = p.z_min + p.height;
            return std::pair{lo, hi};
          },
      },
      part);
}

}  // namespace

Vec3 Pose::to_world(const Vec3& local) const { return rotation_z(yaw) * local + position; }

Vec3 Pose::to_local(const Vec3& world) const { return rotation_z(-yaw) * (world - position); }

double volume(const Primitive& part) {
  return std::visit(
      overloaded{
          [](const Box& b) { return 8.0 * b.half_extents.prod(); },
          [](const Cylinder& c) { return std::numbers::pi * c.radius * c.radius * c.height; },
          [](const Capsule& c) {
            const double r = c.radius;
            return std::numbers::pi * r * r * ((c.b - c.a).norm() + 4.0 * r / 3.0);
          },
          [](const Prism& p) { return p.polygon.size() < 3 ? 0.0 : polygon_area(p.polygon) * p.height; },
      },
      part);
}

bool contains(const Primitive& part, const Vec3& q) {
  return std::visit(
      overloaded{
          [&](const Box& b) { return ((q - b.center).cwiseAbs() - b.half_extents).maxCoeff() <= 0.0; },
          [&](const Cylinder& c) {
            const Vec3 d = q - c.base_center;
            return d.z() >= 0.0 && d.z() <= c.height && d.head<2>().squaredNorm() <= c.radius * c.radius;
          },
          [&](const Capsule& c) {
            const Vec3 ab = c.b - c.a;
            const double len2 = ab.squaredNorm();
            const double t = len2 > 0 ? std::clamp((q - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
            return (q - (c.a + t * ab)).squaredNorm() <= c.radius * c.radius;
          },
          [&](const Prism& p) {
            return q.z() >= p.z_min && q.z() <= p.z_min + p.height && inside_polygon(p.polygon, q.head<2>());
          },
      },
      part);
}

bool Solid::contains_local(const Vec3& local) const {
  return std::any_of(parts.begin(), parts.end(), [&](const Primitive& p) { return geometry::contains(p, local); });
}

std::pair<Vec3, Vec3> Solid::local_bounds() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& part : parts) {
    const auto [plo, phi] = bounds(part);
    lo = lo.cwiseMin(plo);
    hi = hi.cwiseMax(phi);
  }
  return {lo, hi};
}

std::pair<Vec3, Vec3> Solid::world_bounds() const {
  const auto [lo, hi] = local_bounds();
  Vec3 wlo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 whi = -wlo;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 c((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(), (corner & 4) ? hi.z() : lo.z());
    const Vec3 w = pose.to_world(c);
    wlo = wlo.cwiseMin(w);
    whi = whi.cwiseMax(w);
  }
  return {wlo, whi};
}

PointCloud sample_interior(const Solid& solid, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw GeometryError("sample_interior: count must be at least 1");
  if (solid.parts.empty()) throw GeometryError("sample_interior: solid has no parts");
  for (const auto& part : solid.parts) {
    if (!(volume(part) > 0.0)) throw GeometryError("sample_interior: degenerate solid (zero volume)");
  }
  const auto [lo, hi] = solid.local_bounds();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y()), uz(lo.z(), hi.z());

  std::vector<Vec3> points;
  points.reserve(count);
  const std::size_t max_draws = 10'000 * count + 1'000'000;
  for (std::size_t draws = 0; points.size() < count; ++draws) {
    if (draws > max_draws) throw GeometryError("sample_interior: rejection sampling did not converge");
    const Vec3 local(ux(rng), uy(rng), uz(rng));
    if (solid.contains_local(local)) points.push_back(solid.pose.to_world(local));
  }
  return PointCloud(std::move(points));
}

}  // namespace scenediff::geometry
