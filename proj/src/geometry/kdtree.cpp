#include "scenediff/geometry/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace scenediff::geometry {

KdTree::KdTree(const PointCloud& cloud) : points_(cloud.points()) {
  if (points_.empty()) throw GeometryError("KdTree: empty cloud");
  std::vector<std::size_t> order(points_.size());
  std::iota(order.begin(), order.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(order, 0, order.size(), 0);
}

std::ptrdiff_t KdTree::build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(mid),
                   order.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  const auto id = static_cast<std::ptrdiff_t>(nodes_.size());
  nodes_.push_back(Node{order[mid], axis, -1, -1});
  const std::ptrdiff_t left = build(order, begin, mid, depth + 1);
  const std::ptrdiff_t right = build(order, mid + 1, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  Hit best{0, std::numeric_limits<double>::infinity()};
  search(root_, query, best);
  return best;
}

void KdTree::search(std::ptrdiff_t id, const Vec3& q, Hit& best) const {
  if (id < 0) return;
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  const Vec3& p = points_[n.point];
  const double d2 = (p - q).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && n.point < best.index)) {
    best = Hit{n.point, d2};
  }
  const double delta = q[n.axis] - p[n.axis];
  const std::ptrdiff_t near = delta < 0 ? n.left : n.right;
  const std::ptrdiff_t far = delta < 0 ? n.right : n.left;
  search(near, q, best);
  if (delta * delta <= best.squared_distance) search(far, q, best);
}

}  // namespace scenediff::geometry
