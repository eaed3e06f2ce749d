#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "scenediff/grad/dense_array.hpp"

namespace scenediff::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered set of 3D points in meters.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {}

  static PointCloud from_array(const grad::DenseArray& array);
  grad::DenseArray to_array() const;

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  Vec3& operator[](std::size_t i) { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  auto begin() { return points_.begin(); }
  auto end() { return points_.end(); }
  const std::vector<Vec3>& points() const { return points_; }
  std::vector<Vec3>& points() { return points_; }
  void push_back(const Vec3& p) { points_.push_back(p); }

  Vec3 centroid() const;
  bool all_finite() const;

  friend bool operator==(const PointCloud& a, const PointCloud& b) { return a.points_ == b.points_; }

 private:
  std::vector<Vec3> points_;
};

/// Top three rows of a 4x4 affine matrix, row-major linear part first:
/// [a_xx a_xy a_xz a_yx a_yy a_yz a_zx a_zy a_zz t_x t_y t_z].
using AffineRow = std::array<double, 12>;

constexpr AffineRow identity_row() { return {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0}; }

Vec3 apply_transform(const AffineRow& f, const Vec3& p);
Mat4 to_matrix(const AffineRow& f);
AffineRow from_matrix(const Mat4& m);
/// Row equivalent of applying `first` and then `second`.
AffineRow compose(const AffineRow& second, const AffineRow& first);

Mat3 rotation_z(double angle);

}  // namespace scenediff::geometry
