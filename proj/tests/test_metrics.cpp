#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "scenediff/metrics/metrics.hpp"

using namespace scenediff::metrics;
using scenediff::geometry::PointCloud;
using scenediff::geometry::Vec3;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(Vec3(u(rng), u(rng), u(rng)));
  return c;
}

PointCloud shuffled(PointCloud c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(c.points().begin(), c.points().end(), rng);
  return c;
}

PointCloud cube_corners() {
  PointCloud c;
  for (int i = 0; i < 8; ++i) c.push_back(Vec3(i & 1 ? 1.0 : -1.0, i & 2 ? 1.0 : -1.0, i & 4 ? 1.0 : -1.0));
  return c;
}

}  // namespace

TEST_CASE("chamfer analytic cases") {
  const PointCloud a = random_cloud(50, 1);
  CHECK(chamfer(a, a) == 0.0);
  CHECK(chamfer(PointCloud({Vec3(0, 0, 0)}), PointCloud({Vec3(1, 0, 0)})) == 2.0);
}

TEST_CASE("chamfer matches the quadratic oracle and is symmetric") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PointCloud a = random_cloud(200, seed);
    const PointCloud b = random_cloud(200, seed + 50);
    CHECK(std::abs(chamfer(a, b) - chamfer_brute(a, b)) < 1e-12);
    CHECK(std::abs(chamfer(a, b) - chamfer(b, a)) < 1e-12);
    CHECK(chamfer(a, b) > 0.0);
  }
  CHECK_THROWS(chamfer(PointCloud{}, random_cloud(3, 1)));
}

TEST_CASE("emd analytic cases") {
  const PointCloud a = random_cloud(40, 2);
  CHECK(emd(a, shuffled(a, 3)).distance < 1e-12);
  const PointCloud two({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  const PointCloud shifted({Vec3(1, 1, 0), Vec3(0, 1, 0)});
  CHECK(emd(two, shifted).distance == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS(emd(two, random_cloud(3, 1)));
}

TEST_CASE("hungarian equals brute force over all permutations") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const PointCloud a = random_cloud(6, seed);
    const PointCloud b = random_cloud(6, seed + 100);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < 6; ++i) s += (a[i] - b[perm[i]]).norm();
      best = std::min(best, s / 6.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const EmdResult r = emd(a, b, EmdMode::Exact);
    CHECK(r.exact);
    CHECK(r.distance == doctest::Approx(best).epsilon(1e-12));
    CHECK(std::abs(emd(b, a, EmdMode::Exact).distance - r.distance) < 1e-12);
  }
}

TEST_CASE("auction is an upper bound with a small duality gap") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const PointCloud a = random_cloud(128, seed, 0.5);
    const PointCloud b = random_cloud(128, seed + 7, 0.5);
    const EmdResult exact = emd(a, b, EmdMode::Exact);
    const EmdResult approx = emd(a, b, EmdMode::Approx);
    CHECK_FALSE(approx.exact);
    CHECK(exact.distance <= approx.distance + 1e-12);
    CHECK(approx.lower_bound <= exact.distance + 1e-12);
    CHECK(approx.relative_gap() < 0.05);
  }
}

TEST_CASE("auto mode switches to the auction above the exact limit") {
  const PointCloud a = random_cloud(kExactEmdLimit + 88, 4, 0.5);
  const PointCloud b = random_cloud(kExactEmdLimit + 88, 5, 0.5);
  const EmdResult r = emd(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.relative_gap() < 0.05);
  CHECK(r.distance >= r.lower_bound);
  CHECK(emd(random_cloud(10, 1), random_cloud(10, 2)).exact);
}

TEST_CASE("f1 analytic cases") {
  const PointCloud a = random_cloud(30, 6);
  CHECK(f1(a, a, 1e-6) == 1.0);
  PointCloud far = a;
  for (Vec3& p : far) p.x() += 10.0 * 0.1 + 10.0;
  CHECK(f1(a, far, 0.1) == 0.0);

  // Half of a sits on b, the other half far away; b is fully covered.
  PointCloud b({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  PointCloud half({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(5, 5, 5), Vec3(6, 5, 5)});
  CHECK(f1(half, b, 0.1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS(f1(a, a, 0.0));
}

TEST_CASE("f1 does not increase as tau shrinks") {
  const PointCloud a = random_cloud(150, 8);
  const PointCloud b = random_cloud(150, 9);
  double prev = 2.0;
  for (double tau : {2.0, 1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.01}) {
    const double v = f1(a, b, tau);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("guiding mse") {
  const Vec3 c(0.2, -0.4, 1.0);
  CHECK(guiding_mse(PointCloud({c, c, c}), c) == 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  PointCloud sphere;
  for (int i = 0; i < 100; ++i) sphere.push_back(c + 0.7 * Vec3(n(rng), n(rng), n(rng)).normalized());
  CHECK(guiding_mse(sphere, c) == doctest::Approx(0.49).epsilon(1e-12));
  CHECK_THROWS(guiding_mse(PointCloud{}, c));
}

TEST_CASE("ip_3d fractions") {
  const std::vector<PointCloud> entities = {cube_corners()};
  PointCloud far, inside, half;
  for (int i = 0; i < 20; ++i) {
    far.push_back(Vec3(10 + i, 0, 0));
    inside.push_back(Vec3(0.04 * i - 0.4, 0.1, -0.2));
    half.push_back(i % 2 ? Vec3(0.03 * i - 0.5, 0, 0) : Vec3(5, 5, 5 + i));
  }
  CHECK(ip_3d(far, entities).fraction == 0.0);
  CHECK(ip_3d(inside, entities).fraction == 1.0);
  CHECK(ip_3d(half, entities).fraction == 0.5);
}

TEST_CASE("ip_3d skips degenerate entities and stays in range") {
  PointCloud flat({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)});
  PointCloud shifted = cube_corners();
  for (Vec3& p : shifted) p.x() += 0.5;
  const std::vector<PointCloud> entities = {flat, cube_corners(), shifted};
  const PointCloud pred = random_cloud(500, 12, 3.0);
  const auto r = ip_3d(pred, entities);
  CHECK(r.skipped == std::vector<std::size_t>{0});
  CHECK(r.fraction >= 0.0);
  CHECK(r.fraction <= 1.0);
  CHECK(r.fraction > 0.0);
}
