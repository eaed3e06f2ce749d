#pragma once

#include <cstdint>
#include <vector>

namespace scenediff::theory {

/// Row-stochastic matrix stored row-major: entry (from, to).
struct Kernel {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> p;

  double operator()(std::size_t from, std::size_t to) const { return p[from * cols + to]; }
};

/// Finite-state forward chain x0 -> x1 -> ... -> xT with an observation y
/// drawn from x0.
struct DiscreteChainSpec {
  std::size_t states = 0;
  std::vector<double> initial;   // q(x0), length K
  std::vector<Kernel> forward;   // forward[t] = q(x_{t+1} | x_t), t in [0, T)
  Kernel observation;            // q(y | x0), K x J

  std::size_t horizon() const { return forward.size(); }
  std::size_t conditions() const { return observation.cols; }
  /// Throws std::invalid_argument unless sizes agree and rows sum to 1.
  void validate() const;
};

struct Prop1Report {
  double max_deviation = 0.0;
  std::size_t checked = 0;
  /// Tuples whose conditioning event (x_{t+1}, y) has zero probability.
  std::size_t skipped = 0;
};

/// Evaluates both sides of the conditional backward identity for every
/// (t, x_t, x_{t+1}, y). The left side conditions the enumerated joint; the
/// right side is assembled from multi-step kernels and marginals.
Prop1Report prop1_discrete_check(const DiscreteChainSpec& spec);

DiscreteChainSpec random_chain(std::size_t states, std::size_t conditions, std::size_t horizon, std::uint64_t seed);
/// Permutation kernels with a point-mass start.
DiscreteChainSpec permutation_chain(std::size_t states, std::size_t conditions, std::size_t horizon, std::uint64_t seed);
/// K=2 chain flipping with probability `flip`, uniform start and uniform q(y|x0).
DiscreteChainSpec symmetric_chain(double flip, std::size_t conditions, std::size_t horizon);

}  // namespace scenediff::theory
