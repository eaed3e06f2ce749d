#include "scenediff/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scenediff/geometry/kdtree.hpp"

namespace scenediff::metrics {

namespace {

void require_nonempty(const PointCloud& a, const PointCloud& b, const char* what) {
  if (a.empty() || b.empty()) throw std::invalid_argument(std::string(what) + ": empty point cloud");
}

double mean_nearest_sq(const PointCloud& from, const PointCloud& to) {
  const geometry::KdTree tree(to);
  double sum = 0.0;
  for (const Vec3& p : from) sum += tree.nearest(p).squared_distance;
  return sum / static_cast<double>(from.size());
}

double within_fraction(const PointCloud& from, const geometry::KdTree& tree, double tau) {
  std::size_t hits = 0;
  for (const Vec3& p : from) hits += tree.nearest(p).squared_distance <= tau * tau;
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

std::vector<double> distance_matrix(const PointCloud& a, const PointCloud& b) {
  const std::size_t n = a.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = (a[i] - b[j]).norm();
  }
  return cost;
}

/// Forward auction with epsilon scaling, maximizing -cost. Returns the
/// assignment and the dual value of the final prices.
EmdResult auction(const std::vector<double>& cost, std::size_t n) {
  double max_cost = 0.0;
  for (double c : cost) max_cost = std::max(max_cost, c);
  if (max_cost == 0.0) return EmdResult{0.0, 0.0, false};

  double mean_cost = 0.0;
  for (double c : cost) mean_cost += c;
  mean_cost /= static_cast<double>(cost.size());
  const double eps_final = std::max(mean_cost * 1e-4, 1e-12);

  std::vector<double> price(n, 0.0);
  std::vector<std::ptrdiff_t> owner(n, -1);   // column -> row
  std::vector<std::ptrdiff_t> assigned(n, -1);  // row -> column
  std::vector<std::size_t> queue;
  for (double eps = max_cost / 4.0;; eps = std::max(eps / 6.0, eps_final)) {
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(assigned.begin(), assigned.end(), -1);
    queue.resize(n);
    for (std::size_t i = 0; i < n; ++i) queue[i] = n - 1 - i;
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t best_j = 0;
      const double* row = &cost[i * n];
      for (std::size_t j = 0; j < n; ++j) {
        const double v = -row[j] - price[j];
        if (v > best) {
          second = best;
          best = v;
          best_j = j;
        } else if (v > second) {
          second = v;
        }
      }
      if (n == 1) second = best;
      price[best_j] += best - second + eps;
      if (owner[best_j] >= 0) {
        assigned[static_cast<std::size_t>(owner[best_j])] = -1;
        queue.push_back(static_cast<std::size_t>(owner[best_j]));
      }
      owner[best_j] = static_cast<std::ptrdiff_t>(i);
      assigned[i] = static_cast<std::ptrdiff_t>(best_j);
    }
    if (eps <= eps_final) break;
  }

  double primal = 0.0;
  for (std::size_t i = 0; i < n; ++i) primal += cost[i * n + static_cast<std::size_t>(assigned[i])];
  // Dual of the max-benefit problem: sum of prices plus best profit per row.
  double dual = 0.0;
  for (std::size_t j = 0; j < n; ++j) dual += price[j];
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) best = std::max(best, -cost[i * n + j] - price[j]);
    dual += best;
  }
  const double size = static_cast<double>(n);
  return EmdResult{primal / size, std::min(-dual, primal) / size, false};
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "chamfer");
  return mean_nearest_sq(a, b) + mean_nearest_sq(b, a);
}

double chamfer_brute(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "chamfer_brute");
  auto directed = [](const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

double EmdResult::relative_gap() const { return distance > 0.0 ? (distance - lower_bound) / distance : 0.0; }

std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("hungarian: cost matrix is not n x n");
  // Shortest augmenting path with potentials; rows and columns are 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

EmdResult emd(const PointCloud& a, const PointCloud& b, EmdMode mode) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("emd: size mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw std::invalid_argument("emd: empty point cloud");
  const std::size_t n = a.size();
  const std::vector<double> cost = distance_matrix(a, b);
  if (mode == EmdMode::Approx || (mode == EmdMode::Auto && n > kExactEmdLimit)) return auction(cost, n);
  const auto match = hungarian(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
  const double d = total / static_cast<double>(n);
  return EmdResult{d, d, true};
}

double f1(const PointCloud& a, const PointCloud& b, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("f1: tau must be positive");
  require_nonempty(a, b, "f1");
  const double precision = within_fraction(a, geometry::KdTree(b), tau);
  const double recall = within_fraction(b, geometry::KdTree(a), tau);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double guiding_mse(const PointCloud& guiding, const Vec3& centroid) {
  if (guiding.empty()) throw std::invalid_argument("guiding_mse: no guiding points");
  double sum = 0.0;
  for (const Vec3& p : guiding) sum += (p - centroid).squaredNorm();
  return sum / static_cast<double>(guiding.size());
}

InterpenetrationResult ip_3d(const PointCloud& pred, const std::vector<std::optional<geometry::ConvexHull>>& hulls) {
  if (pred.empty()) throw std::invalid_argument("ip_3d: empty prediction");
  InterpenetrationResult out;
  std::size_t inside = 0;
  for (const Vec3& p : pred) {
    inside += std::any_of(hulls.begin(), hulls.end(), [&](const auto& h) { return h && geometry::contains(*h, p); });
  }
  for (std::size_t i = 0; i < hulls.size(); ++i) {
    if (!hulls[i]) out.skipped.push_back(i);
  }
  out.fraction = static_cast<double>(inside) / static_cast<double>(pred.size());
  return out;
}

InterpenetrationResult ip_3d(const PointCloud& pred, const std::vector<PointCloud>& entities) {
  std::vector<std::optional<geometry::ConvexHull>> hulls;
  hulls.reserve(entities.size());
  for (const PointCloud& e : entities) {
    try {
      hulls.emplace_back(geometry::convex_hull(e));
    } catch (const geometry::GeometryError&) {
      hulls.emplace_back(std::nullopt);
    }
  }
  return ip_3d(pred, hulls);
}

}  // namespace scenediff::metrics
