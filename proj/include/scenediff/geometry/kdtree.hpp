#pragma once

#include <cstddef>
#include <vector>

#include "scenediff/geometry/point_cloud.hpp"

namespace scenediff::geometry {

/// Static 3D kd-tree answering exact nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud);

  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  Hit nearest(const Vec3& query) const;

 private:
  struct Node {
    std::size_t point = 0;  // index into points_
    int axis = 0;
    std::ptrdiff_t left = -1;
    std::ptrdiff_t right = -1;
  };

  std::ptrdiff_t build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end, int depth);
  void search(std::ptrdiff_t node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::ptrdiff_t root_ = -1;
};

}  // namespace scenediff::geometry
