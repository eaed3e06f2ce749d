#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "scenediff/geometry/hull.hpp"
#include "scenediff/geometry/icp.hpp"
#include "scenediff/geometry/kdtree.hpp"
#include "scenediff/geometry/solid.hpp"

using namespace scenediff::geometry;

namespace {

PointCloud cube_corners(double half = 0.5) {
  PointCloud c;
  for (int i = 0; i < 8; ++i) c.push_back(Vec3(i & 1 ? half : -half, i & 2 ? half : -half, i & 4 ? half : -half));
  return c;
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(Vec3(d(rng), d(rng), d(rng)));
  return c;
}

Solid unit_cube() { return Solid{{Box{Vec3::Zero(), Vec3::Constant(0.5)}}, Pose{}}; }

}  // namespace

TEST_CASE("cube interior samples average to the center") {
  const PointCloud pts = sample_interior(unit_cube(), 10000, 7);
  REQUIRE(pts.size() == 10000);
  const Vec3 mean = pts.centroid();
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k]) < 0.02);
}

TEST_CASE("samples land inside every primitive kind") {
  Prism tri{{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, 0.0, 0.2};
  const std::vector<Solid> solids = {
      unit_cube(),
      Solid{{Cylinder{Vec3::Zero(), 0.3, 0.7}}, Pose{Vec3(1, 2, 0), 0.4}},
      Solid{{Capsule{Vec3(0, 0, 0.2), Vec3(0, 0, 1.2), 0.15}}, Pose{Vec3(-1, 0, 0), 1.0}},
      Solid{{tri}, Pose{Vec3(0, 0, 0.5), -0.3}},
  };
  for (const Solid& s : solids) {
    const PointCloud one = sample_interior(s, 1, 3);
    REQUIRE(one.size() == 1);
    CHECK(s.contains(one[0]));
    for (const Vec3& p : sample_interior(s, 500, 11)) CHECK(s.contains(p));
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const Solid s{{Cylinder{Vec3::Zero(), 0.3, 0.7}}, Pose{Vec3(1, 0, 0), 0.2}};
  CHECK(sample_interior(s, 300, 42) == sample_interior(s, 300, 42));
  CHECK_FALSE(sample_interior(s, 300, 42) == sample_interior(s, 300, 43));
}

TEST_CASE("degenerate solids are rejected") {
  CHECK_THROWS_AS(sample_interior(Solid{{Box{Vec3::Zero(), Vec3(0.5, 0.5, 0.0)}}, Pose{}}, 5, 1), GeometryError);
  CHECK_THROWS_AS(sample_interior(Solid{}, 5, 1), GeometryError);
  CHECK_THROWS_AS(sample_interior(unit_cube(), 0, 1), GeometryError);
}

TEST_CASE("cube corners give centroid at origin and d0 of one half") {
  const HullSummary s = hull_and_centroid(cube_corners());
  CHECK(s.centroid.norm() < 1e-15);
  CHECK(s.d0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(contains(s.hull, Vec3::Zero()));
  CHECK_FALSE(contains(s.hull, Vec3(2, 0, 0)));
}

TEST_CASE("regular tetrahedron has inradius one third of circumradius") {
  PointCloud tet;
  for (const Vec3& v : {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)}) tet.push_back(v / std::sqrt(3.0));
  const HullSummary s = hull_and_centroid(tet);
  CHECK(s.hull.facets.size() == 4);
  CHECK(s.d0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("hull facets bound every input point and face outward") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PointCloud cloud = random_cloud(400, seed);
    const ConvexHull hull = convex_hull(cloud);
    const Vec3 c = cloud.centroid();
    REQUIRE_FALSE(hull.facets.empty());
    for (const Facet& f : hull.facets) {
      CHECK(f.normal.norm() == doctest::Approx(1.0));
      CHECK(f.signed_distance(c) < 0.0);
      double worst = -1.0;
      for (const Vec3& p : cloud) worst = std::max(worst, f.signed_distance(p));
      CHECK(worst <= Tolerances::hull);
      // Facet planes are supporting planes: some input point touches each.
      CHECK(worst >= -Tolerances::hull);
    }
  }
}

TEST_CASE("hull containment agrees with a brute-force half-space test") {
  const PointCloud cloud = random_cloud(200, 9);
  const ConvexHull hull = convex_hull(cloud);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int inside = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    bool expected = true;
    for (const Facet& f : hull.facets) {
      if (!(f.normal.dot(p) - f.offset < -1e-12)) expected = false;
    }
    CHECK(contains(hull, p) == expected);
    inside += expected;
  }
  CHECK(inside > 0);
  CHECK(inside < 10000);
}

TEST_CASE("degenerate clouds are rejected by the hull") {
  PointCloud flat;
  for (int i = 0; i < 10; ++i) flat.push_back(Vec3(i * 0.1, (i * 7 % 5) * 0.2, 1.0));
  CHECK_THROWS_AS(convex_hull(flat), GeometryError);
  PointCloud line;
  for (int i = 0; i < 10; ++i) line.push_back(Vec3(i, 2.0 * i, -i));
  CHECK_THROWS_AS(convex_hull(line), GeometryError);
  CHECK_THROWS_AS(convex_hull(PointCloud({Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()})), GeometryError);
  CHECK_THROWS_AS(convex_hull(PointCloud({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY()})), GeometryError);
}

TEST_CASE("points within d0 of the centroid are inside the hull") {
  const PointCloud cloud = random_cloud(300, 21);
  const HullSummary s = hull_and_centroid(cloud);
  REQUIRE(s.d0 > 0.0);
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 p = s.centroid + dir * (s.d0 * 0.999999 * std::cbrt(u(rng)));
    CHECK(contains(s.hull, p));
  }
}

TEST_CASE("sampled solid points are inside the hull of the solid") {
  const Solid box{{Box{Vec3(0.1, 0.0, 0.3), Vec3(0.4, 0.2, 0.3)}}, Pose{Vec3(2, -1, 0), 0.7}};
  PointCloud corners;
  for (int i = 0; i < 8; ++i) {
    corners.push_back(box.pose.to_world(Vec3(0.1 + (i & 1 ? 0.4 : -0.4), i & 2 ? 0.2 : -0.2, 0.3 + (i & 4 ? 0.3 : -0.3))));
  }
  const ConvexHull hull = convex_hull(corners);
  for (const Vec3& p : sample_interior(box, 2000, 5)) CHECK(contains(hull, p));
}

TEST_CASE("affine rows: identity, translation and the 4x4 oracle") {
  const Vec3 p(0.3, -1.2, 2.5);
  CHECK(apply_transform(identity_row(), p) == p);
  AffineRow t = identity_row();
  t[9] = 1, t[10] = 2, t[11] = 3;
  CHECK(apply_transform(t, Vec3::Zero()) == Vec3(1, 2, 3));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    AffineRow f, g;
    for (double& v : f) v = d(rng);
    for (double& v : g) v = d(rng);
    const Vec3 q(d(rng), d(rng), d(rng));
    // Independent oracle: explicit homogeneous product.
    double h[4] = {q.x(), q.y(), q.z(), 1.0};
    double m[3][4] = {{f[0], f[1], f[2], f[9]}, {f[3], f[4], f[5], f[10]}, {f[6], f[7], f[8], f[11]}};
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += m[r][c] * h[c];
      CHECK(apply_transform(f, q)[r] == doctest::Approx(s).epsilon(1e-14));
    }
    CHECK(from_matrix(to_matrix(f)) == f);
    const Vec3 twice = apply_transform(g, apply_transform(f, q));
    const Vec3 composed = apply_transform(compose(g, f), q);
    CHECK((twice - composed).norm() <= 1e-12 * std::max(1.0, twice.norm()));
  }
}

TEST_CASE("kd-tree nearest matches brute force") {
  const PointCloud cloud = random_cloud(500, 31);
  const KdTree tree(cloud);
  const PointCloud queries = random_cloud(300, 32, 1.5);
  for (const Vec3& q : queries) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double d2 = (cloud[i] - q).squaredNorm();
      if (d2 < bd) bd = d2, best = i;
    }
    const auto hit = tree.nearest(q);
    CHECK(hit.index == best);
    CHECK(hit.squared_distance == bd);
  }
}

TEST_CASE("icp recovers a pure translation") {
  const PointCloud target = sample_interior(unit_cube(), 800, 1);
  PointCloud source = target;
  for (Vec3& p : source) p -= Vec3(0.3, 0, 0);
  const AlignmentReport r = icp_align_z_locked(source, target);
  CHECK(std::abs(r.transform.translation.x() - 0.3) < 1e-6);
  CHECK(std::abs(r.transform.translation.y()) < 1e-6);
  CHECK(std::abs(r.transform.translation.z()) < 1e-6);
  CHECK(r.fitness == 1.0);
  CHECK(r.inlier_mse < 1e-10);
  CHECK(r.correspondence_pct == 100.0);
}

TEST_CASE("icp recovers a 30 degree yaw") {
  const Solid table{{Box{Vec3(0, 0, 0.7), Vec3(0.6, 0.3, 0.03)}, Box{Vec3(0.5, 0.2, 0.35), Vec3(0.03, 0.03, 0.35)},
                     Box{Vec3(-0.5, -0.2, 0.35), Vec3(0.03, 0.03, 0.35)}}, Pose{}};
  const PointCloud target = sample_interior(table, 1500, 2);
  const double angle = 30.0 * std::numbers::pi / 180.0;
  const Mat3 inv = rotation_z(-angle);
  PointCloud source = target;
  for (Vec3& p : source) p = inv * p;
  const AlignmentReport r = icp_align_z_locked(source, target);
  CHECK(std::abs(r.transform.angle * 180.0 / std::numbers::pi - 30.0) < 0.5);
  CHECK(r.fitness > 0.99);
  const Mat3 rot = r.transform.rotation();
  CHECK(rot(2, 2) == 1.0);
  CHECK(rot(0, 2) == 0.0);
  CHECK(rot(1, 2) == 0.0);
  CHECK(rot(2, 0) == 0.0);
  CHECK(rot(2, 1) == 0.0);
}

TEST_CASE("icp reports zero fitness without correspondences") {
  PointCloud source;
  for (int i = 0; i < 50; ++i) source.push_back(Vec3(i * 1.0, 0, 0));
  PointCloud sparse_target({Vec3(0, 0, 0), Vec3(1000, 0, 0)});
  IcpOptions opts;
  opts.inlier_radius = 0.01;
  opts.correspondence_factor = 1.0;
  const AlignmentReport r = icp_align_z_locked(source, sparse_target, opts);
  CHECK(r.fitness == 0.0);
  CHECK(r.iterations == 0);
  CHECK(r.correspondence_pct == 0.0);
  CHECK_THROWS_AS(icp_align_z_locked(PointCloud{}, sparse_target), GeometryError);
}

TEST_CASE("icp report fields stay in range on unrelated clouds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const AlignmentReport r = icp_align_z_locked(random_cloud(200, seed, 0.3), random_cloud(150, seed + 100, 0.3));
    CHECK(r.fitness >= 0.0);
    CHECK(r.fitness <= 1.0);
    CHECK(r.correspondence_pct >= 0.0);
    CHECK(r.correspondence_pct <= 100.0);
    CHECK(r.correspondence_pct >= 100.0 * r.fitness - 1e-9);
  }
}
