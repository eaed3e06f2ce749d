#include "scenediff/geometry/icp.hpp"

#include <cmath>

#include "scenediff/geometry/kdtree.hpp"

namespace scenediff::geometry {

PointCloud ZLockedTransform::apply(const PointCloud& cloud) const {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  const Mat3 r = rotation();
  for (const auto& p : cloud) out.push_back(r * p + translation);
  return PointCloud(std::move(out));
}

AlignmentReport icp_align_z_locked(const PointCloud& source, const PointCloud& target, const IcpOptions& options) {
  if (source.empty() || target.empty()) throw GeometryError("icp_align_z_locked: empty cloud");
  const KdTree tree(target);
  const double r2 = options.inlier_radius * options.inlier_radius;

  AlignmentReport report;
  report.transform.translation = target.centroid() - source.centroid();

  std::vector<Vec3> moved(source.size());
  std::vector<KdTree::Hit> hits(source.size());
  auto match = [&]() {
    const Mat3 r = report.transform.rotation();
    std::size_t inliers = 0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      moved[i] = r * source[i] + report.transform.translation;
      hits[i] = tree.nearest(moved[i]);
      if (hits[i].squared_distance <= r2) ++inliers;
    }
    return inliers;
  };

  if (match() == 0) return report;

  double previous_error = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    Vec3 src_mean = Vec3::Zero();
    Vec3 dst_mean = Vec3::Zero();
    std::size_t n = 0;
    double error = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (hits[i].squared_distance > r2) continue;
      src_mean += moved[i];
      dst_mean += target[hits[i].index];
      error += hits[i].squared_distance;
      ++n;
    }
    if (n == 0) break;
    src_mean /= static_cast<double>(n);
    dst_mean /= static_cast<double>(n);
    error /= static_cast<double>(n);

    double sin_sum = 0.0;
    double cos_sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (hits[i].squared_distance > r2) continue;
      const Vec3 s = moved[i] - src_mean;
      const Vec3 q = target[hits[i].index] - dst_mean;
      sin_sum += s.x() * q.y() - s.y() * q.x();
      cos_sum += s.x() * q.x() + s.y() * q.y();
    }
    const double step = (sin_sum == 0.0 && cos_sum == 0.0) ? 0.0 : std::atan2(sin_sum, cos_sum);
    const Mat3 r_step = rotation_z(step);
    const Vec3 t_step = dst_mean - r_step * src_mean;
    report.transform.angle += step;
    report.transform.translation = r_step * report.transform.translation + t_step;
    report.iterations = it + 1;

    match();
    const bool converged = std::abs(previous_error - error) < options.convergence &&
                           std::abs(step) < options.convergence && t_step.norm() < options.convergence;
    previous_error = error;
    if (converged) break;
  }
  report.transform.angle = std::remainder(report.transform.angle, 2.0 * M_PI);

  const double c2 = r2 * options.correspondence_factor * options.correspondence_factor;
  std::size_t inliers = 0;
  std::size_t correspondences = 0;
  double sq = 0.0;
  for (const auto& h : hits) {
    if (h.squared_distance <= r2) {
      ++inliers;
      sq += h.squared_distance;
    }
    if (h.squared_distance <= c2) ++correspondences;
  }
  const double n = static_cast<double>(source.size());
  report.fitness = static_cast<double>(inliers) / n;
  report.inlier_mse = inliers ? sq / static_cast<double>(inliers) : 0.0;
  report.correspondence_pct = 100.0 * static_cast<double>(correspondences) / n;
  return report;
}

}  // namespace scenediff::geometry
