#include "scenediff/geometry/hull.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace scenediff::geometry {

namespace {

struct Face {
  std::size_t a, b, c;
  Vec3 normal;
  double offset;
  bool alive = true;
};

}  // namespace

ConvexHull convex_hull(const PointCloud& cloud) {
  const auto& pts = cloud.points();
  const double eps = Tolerances::hull;
  if (pts.size() < 4) throw GeometryError("convex_hull: need at least 4 points");

  // Initial tetrahedron from extreme points.
  const std::size_t i0 = 0;
  std::size_t i1 = i0;
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - pts[i0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  if (best <= eps * eps) throw GeometryError("convex_hull: degenerate hull (all points coincide)");
  const Vec3 axis = (pts[i1] - pts[i0]).normalized();
  std::size_t i2 = i0;
  best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - pts[i0]).cross(axis).norm();
    if (d > best) best = d, i2 = i;
  }
  if (best <= eps) throw GeometryError("convex_hull: degenerate hull (collinear points)");
  const Vec3 plane_n = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  std::size_t i3 = i0;
  best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::abs((pts[i] - pts[i0]).dot(plane_n));
    if (d > best) best = d, i3 = i;
  }
  if (best <= eps) throw GeometryError("convex_hull: degenerate hull (coplanar points)");

  const Vec3 interior = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  std::vector<Face> faces;
  auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    if (n.dot(interior - pts[a]) > 0) {
      std::swap(b, c);
      n = -n;
    }
    n.normalize();
    faces.push_back(Face{a, b, c, n, n.dot(pts[a])});
  };
  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  std::vector<std::size_t> visible;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && faces[f].normal.dot(pts[p]) - faces[f].offset > eps) visible.push_back(f);
    }
    if (visible.empty()) continue;
    edges.clear();
    for (std::size_t f : visible) {
      const Face& face = faces[f];
      edges.insert({face.a, face.b});
      edges.insert({face.b, face.c});
      edges.insert({face.c, face.a});
    }
    for (std::size_t f : visible) faces[f].alive = false;
    for (const auto& [u, v] : edges) {
      if (edges.count({v, u})) continue;
      // Keeps the winding of the removed face, so the normal stays outward.
      Vec3 n = (pts[v] - pts[u]).cross(pts[p] - pts[u]);
      const double len = n.norm();
      if (len == 0.0) continue;
      n /= len;
      faces.push_back(Face{u, v, p, n, n.dot(pts[u])});
    }
    if (faces.size() > 4 * pts.size() + 64) {
      std::erase_if(faces, [](const Face& f) { return !f.alive; });
    }
  }

  ConvexHull hull;
  std::map<std::size_t, std::size_t> remap;
  auto vertex = [&](std::size_t i) {
    auto [it, inserted] = remap.emplace(i, hull.vertices.size());
    if (inserted) hull.vertices.push_back(pts[i]);
    return it->second;
  };
  for (const Face& f : faces) {
    if (!f.alive) continue;
    hull.triangles.push_back({vertex(f.a), vertex(f.b), vertex(f.c)});
    hull.facets.push_back(Facet{f.normal, f.offset});
  }
  return hull;
}

HullSummary hull_and_centroid(const PointCloud& cloud) {
  HullSummary out{convex_hull(cloud), cloud.centroid(), 0.0};
  double d0 = std::numeric_limits<double>::infinity();
  for (const Facet& f : out.hull.facets) d0 = std::min(d0, -f.signed_distance(out.centroid));
  out.d0 = d0;
  return out;
}

bool contains(const ConvexHull& hull, const Vec3& p) {
  if (hull.facets.empty()) return false;
  return std::all_of(hull.facets.begin(), hull.facets.end(),
                     [&](const Facet& f) { return f.signed_distance(p) < -Tolerances::containment; });
}

}  // namespace scenediff::geometry
