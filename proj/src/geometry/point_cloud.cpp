#include "scenediff/geometry/point_cloud.hpp"

#include <cmath>

namespace scenediff::geometry {

PointCloud PointCloud::from_array(const grad::DenseArray& array) {
  if (array.rank() != 2 || array.dim(1) != 3) {
    throw GeometryError("PointCloud::from_array expects [N, 3], got " + grad::to_string(array.shape()));
  }
  std::vector<Vec3> pts(array.dim(0));
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = Vec3(array.at(i, 0), array.at(i, 1), array.at(i, 2));
  return PointCloud(std::move(pts));
}

grad::DenseArray PointCloud::to_array() const {
  grad::DenseArray out({points_.size(), 3});
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (int k = 0; k < 3; ++k) out.at(i, k) = points_[i][k];
  }
  return out;
}

Vec3 PointCloud::centroid() const {
  if (points_.empty()) throw GeometryError("centroid of an empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points_) sum += p;
  return sum / static_cast<double>(points_.size());
}

bool PointCloud::all_finite() const {
  for (const auto& p : points_) {
    if (!p.allFinite()) return false;
  }
  return true;
}

Vec3 apply_transform(const AffineRow& f, const Vec3& p) {
  return {f[0] * p.x() + f[1] * p.y() + f[2] * p.z() + f[9],
          f[3] * p.x() + f[4] * p.y() + f[5] * p.z() + f[10],
          f[6] * p.x() + f[7] * p.y() + f[8] * p.z() + f[11]};
}

Mat4 to_matrix(const AffineRow& f) {
  Mat4 m = Mat4::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = f[r * 3 + c];
    m(r, 3) = f[9 + r];
  }
  return m;
}

AffineRow from_matrix(const Mat4& m) {
  AffineRow f{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f[r * 3 + c] = m(r, c);
    f[9 + r] = m(r, 3);
  }
  return f;
}

AffineRow compose(const AffineRow& second, const AffineRow& first) {
  return from_matrix(to_matrix(second) * to_matrix(first));
}

Mat3 rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

}  // namespace scenediff::geometry
