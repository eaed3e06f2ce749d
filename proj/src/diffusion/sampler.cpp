#include "scenediff/diffusion/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace scenediff::diffusion {

namespace {

DenseArray predict(const Denoiser& denoiser, const DenseArray& x, int t) {
  DenseArray x0 = denoiser(x, t);
  if (x0.shape() != x.shape()) {
    throw grad::ShapeError("denoiser returned " + grad::to_string(x0.shape()) + " for input " +
                           grad::to_string(x.shape()) + " at t=" + std::to_string(t));
  }
  if (!x0.all_finite()) throw grad::NumericError("denoiser produced a non-finite value at t=" + std::to_string(t));
  return x0;
}

/// One posterior step x_t -> x_{t-1} given the x0 estimate.
void posterior_step(DenseArray& x, const DenseArray& x0, int t, const NoiseSchedule& s, std::mt19937_64& rng) {
  const auto i = static_cast<std::size_t>(t);
  const double ab = s.alpha_bar[i];
  const double ab_prev = s.alpha_bar[i - 1];
  const double c0 = std::sqrt(ab_prev) * s.beta[i] / (1.0 - ab);
  const double ct = std::sqrt(s.alpha[i]) * (1.0 - ab_prev) / (1.0 - ab);
  const double sd = std::sqrt(s.posterior_variance(t));
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = c0 * x0[k] + ct * x[k] + sd * normal(rng);
}

void overwrite_known(DenseArray& x, const InpaintMask& mask, const DenseArray& known, int t, const NoiseSchedule& s,
                     std::mt19937_64& rng) {
  const double a = std::sqrt(s.alpha_bar[static_cast<std::size_t>(t)]);
  const double b = std::sqrt(1.0 - s.alpha_bar[static_cast<std::size_t>(t)]);
  std::normal_distribution<double> normal;
  const std::size_t cols = x.dim(1);
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < cols; ++c) x.at(r, c) = a * known.at(r, c) + b * normal(rng);
  }
}

DenseArray initial_noise(std::size_t points, std::mt19937_64& rng) {
  DenseArray x({points, 3});
  std::normal_distribution<double> normal;
  for (double& v : x.values()) v = normal(rng);
  return x;
}

}  // namespace

DenseArray p_sample_loop(const Denoiser& denoiser, std::size_t points, const NoiseSchedule& schedule,
                         std::uint64_t seed) {
  if (points == 0) throw std::invalid_argument("p_sample_loop: zero points");
  std::mt19937_64 rng(seed);
  DenseArray x = initial_noise(points, rng);
  for (int t = schedule.steps() - 1;; --t) {
    DenseArray x0 = predict(denoiser, x, t);
    if (t == 0) return x0;
    posterior_step(x, x0, t, schedule, rng);
  }
}

DenseArray inpaint_loop(const Denoiser& denoiser, const NoiseSchedule& schedule, const InpaintMask& mask,
                        const DenseArray& known, std::uint64_t seed) {
  if (known.rank() != 2 || known.dim(1) != 3) throw grad::ShapeError("inpaint_loop: known must be [N, 3]");
  if (mask.size() != known.dim(0)) throw grad::ShapeError("inpaint_loop: mask length differs from known rows");
  if (std::all_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("inpaint_loop: every row is masked, nothing to generate");
  }
  std::mt19937_64 rng(seed);
  std::mt19937_64 known_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  DenseArray x = initial_noise(known.dim(0), rng);
  overwrite_known(x, mask, known, schedule.steps() - 1, schedule, known_rng);
  for (int t = schedule.steps() - 1;; --t) {
    DenseArray x0 = predict(denoiser, x, t);
    if (t == 0) {
      for (std::size_t r = 0; r < mask.size(); ++r) {
        if (!mask[r]) continue;
        for (std::size_t c = 0; c < 3; ++c) x0.at(r, c) = known.at(r, c);
      }
      return x0;
    }
    posterior_step(x, x0, t, schedule, rng);
    overwrite_known(x, mask, known, t - 1, schedule, known_rng);
  }
}

InpaintMask lowest_z_mask(const DenseArray& cloud, double fraction) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("lowest_z_mask: fraction outside [0, 1]");
  const std::size_t n = cloud.dim(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cloud.at(a, 2) < cloud.at(b, 2); });
  const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  InpaintMask mask(n, false);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = true;
  return mask;
}

}  // namespace scenediff::diffusion
