#include "scenediff/theory/prop1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace scenediff::theory {

namespace {

using Matrix = std::vector<double>;  // K x K row-major

Matrix identity(std::size_t k) {
  Matrix m(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) m[i * k + i] = 1.0;
  return m;
}

Matrix multiply(const Matrix& a, const Kernel& b, std::size_t k) {
  Matrix out(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t m = 0; m < k; ++m) {
      const double aim = a[i * k + m];
      if (aim == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) out[i * k + j] += aim * b(m, j);
    }
  }
  return out;
}

void check_stochastic(const std::vector<double>& row, const std::string& what) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(what + ": entries must be finite and non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument(what + ": row sums to " + std::to_string(sum));
}

void check_kernel(const Kernel& k, std::size_t rows, std::size_t cols, const std::string& what) {
  if (k.rows != rows || k.cols != cols || k.p.size() != rows * cols) {
    throw std::invalid_argument(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    check_stochastic(std::vector<double>(k.p.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                         k.p.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)),
                     what + " row " + std::to_string(r));
  }
}

Kernel random_kernel(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Kernel k{rows, cols, std::vector<double>(rows * cols)};
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += k.p[r * cols + c] = u(rng);
    for (std::size_t c = 0; c < cols; ++c) k.p[r * cols + c] /= sum;
  }
  return k;
}

}  // namespace

void DiscreteChainSpec::validate() const {
  if (states == 0) throw std::invalid_argument("chain: no states");
  if (forward.empty()) throw std::invalid_argument("chain: horizon must be at least 1");
  if (initial.size() != states) throw std::invalid_argument("chain: initial distribution has wrong length");
  check_stochastic(initial, "chain initial distribution");
  for (std::size_t t = 0; t < forward.size(); ++t) check_kernel(forward[t], states, states, "forward kernel " + std::to_string(t));
  if (observation.cols == 0) throw std::invalid_argument("chain: no condition values");
  check_kernel(observation, states, observation.cols, "observation kernel");
}

Prop1Report prop1_discrete_check(const DiscreteChainSpec& spec) {
  spec.validate();
  const std::size_t k = spec.states;
  const std::size_t j = spec.conditions();
  const std::size_t horizon = spec.horizon();

  // Left side: enumerate every path (x0..xT, y) and accumulate per-step joints.
  std::vector<std::vector<double>> joint3(horizon, std::vector<double>(k * k * j, 0.0));  // (x_t, x_{t+1}, y)
  std::vector<std::size_t> path(horizon + 1, 0);
  for (;;) {
    double p = spec.initial[path[0]];
    for (std::size_t t = 0; t < horizon && p != 0.0; ++t) p *= spec.forward[t](path[t], path[t + 1]);
    if (p != 0.0) {
      for (std::size_t y = 0; y < j; ++y) {
        const double py = p * spec.observation(path[0], y);
        for (std::size_t t = 0; t < horizon; ++t) joint3[t][(path[t] * k + path[t + 1]) * j + y] += py;
      }
    }
    std::size_t d = 0;
    while (d <= horizon && ++path[d] == k) path[d++] = 0;
    if (d > horizon) break;
  }

  // Right side pieces: marginals and multi-step kernels from x0.
  std::vector<std::vector<double>> marginal(horizon + 1);
  std::vector<Matrix> from_x0(horizon + 1);
  marginal[0] = spec.initial;
  from_x0[0] = identity(k);
  for (std::size_t t = 0; t < horizon; ++t) {
    marginal[t + 1].assign(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) marginal[t + 1][b] += marginal[t][a] * spec.forward[t](a, b);
    }
    from_x0[t + 1] = multiply(from_x0[t], spec.forward[t], k);
  }
  // p(y, x_t) = sum_x0 q(x0) q(y|x0) q(x_t|x0)
  auto joint_y = [&](std::size_t t, std::size_t x, std::size_t y) {
    double s = 0.0;
    for (std::size_t x0 = 0; x0 < k; ++x0) s += spec.initial[x0] * spec.observation(x0, y) * from_x0[t][x0 * k + x];
    return s;
  };
  auto expected_kernel = [&](std::size_t t, std::size_t x) {
    double s = 0.0;
    for (std::size_t x0 = 0; x0 < k; ++x0) s += spec.initial[x0] * from_x0[t][x0 * k + x];
    return s;
  };

  Prop1Report report;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t next = 0; next < k; ++next) {
      for (std::size_t y = 0; y < j; ++y) {
        double cond = 0.0;
        for (std::size_t cur = 0; cur < k; ++cur) cond += joint3[t][(cur * k + next) * j + y];
        const double y_next = joint_y(t + 1, next, y);
        if (cond == 0.0 || y_next == 0.0) {
          report.skipped += k;
          continue;
        }
        const double expectation = expected_kernel(t + 1, next);
        for (std::size_t cur = 0; cur < k; ++cur) {
          const double lhs = joint3[t][(cur * k + next) * j + y] / cond;
          double rhs = 0.0;
          if (marginal[t][cur] > 0.0) {
            const double backward = spec.forward[t](cur, next) * marginal[t][cur] / marginal[t + 1][next];
            const double y_given_cur = joint_y(t, cur, y) / marginal[t][cur];
            rhs = backward * y_given_cur / y_next * expectation;
          }
          report.max_deviation = std::max(report.max_deviation, std::abs(lhs - rhs));
          ++report.checked;
        }
      }
    }
  }
  return report;
}

DiscreteChainSpec random_chain(std::size_t states, std::size_t conditions, std::size_t horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DiscreteChainSpec s;
  s.states = states;
  const Kernel init = random_kernel(1, states, rng);
  s.initial = init.p;
  for (std::size_t t = 0; t < horizon; ++t) s.forward.push_back(random_kernel(states, states, rng));
  s.observation = random_kernel(states, conditions, rng);
  return s;
}

DiscreteChainSpec permutation_chain(std::size_t states, std::size_t conditions, std::size_t horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DiscreteChainSpec s;
  s.states = states;
  s.initial.assign(states, 0.0);
  s.initial[seed % states] = 1.0;
  std::vector<std::size_t> perm(states);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Kernel k{states, states, std::vector<double>(states * states, 0.0)};
    for (std::size_t i = 0; i < states; ++i) k.p[i * states + perm[i]] = 1.0;
    s.forward.push_back(std::move(k));
  }
  Kernel obs{states, conditions, std::vector<double>(states * conditions, 0.0)};
  for (std::size_t i = 0; i < states; ++i) obs.p[i * conditions + i % conditions] = 1.0;
  s.observation = std::move(obs);
  return s;
}

DiscreteChainSpec symmetric_chain(double flip, std::size_t conditions, std::size_t horizon) {
  DiscreteChainSpec s;
  s.states = 2;
  s.initial = {0.5, 0.5};
  for (std::size_t t = 0; t < horizon; ++t) s.forward.push_back(Kernel{2, 2, {1.0 - flip, flip, flip, 1.0 - flip}});
  s.observation = Kernel{2, conditions, std::vector<double>(2 * conditions, 1.0 / static_cast<double>(conditions))};
  return s;
}

}  // namespace scenediff::theory
