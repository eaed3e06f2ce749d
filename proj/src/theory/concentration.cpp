#include "scenediff/theory/concentration.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>
#include <stdexcept>

namespace scenediff::theory {

double containment_prob(double d0, double sigma, ContainmentMode mode) {
  if (d0 < 0.0 || !(sigma > 0.0)) throw std::invalid_argument("containment_prob: need d0 >= 0 and sigma > 0");
  if (std::isinf(d0)) return 1.0;
  if (mode == ContainmentMode::ErfForm) return 0.5 * (1.0 + std::erf(d0 / (sigma * std::sqrt(2.0))));
  return boost::math::gamma_p(1.5, d0 * d0 / (2.0 * sigma * sigma));
}

ConcentrationConfig concentration_config(const geometry::PointCloud& cloud, double sigma0, std::size_t samples,
                                         std::size_t trials) {
  geometry::HullSummary s = geometry::hull_and_centroid(cloud);
  ConcentrationConfig cfg;
  cfg.hull = std::move(s.hull);
  cfg.mu0 = s.centroid;
  cfg.d0 = s.d0;
  cfg.sigma0 = sigma0;
  cfg.samples = samples;
  cfg.trials = trials;
  return cfg;
}

ConcentrationReport prop2_mc(const ConcentrationConfig& cfg, std::uint64_t seed) {
  if (cfg.samples == 0 || cfg.trials == 0) throw std::invalid_argument("prop2_mc: need at least one sample and trial");
  if (!geometry::contains(cfg.hull, cfg.mu0)) throw std::invalid_argument("prop2_mc: mu0 must lie inside the hull");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::size_t inside = 0;
  std::size_t in_ball = 0;
  double s2_total = 0.0;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    double s2 = 0.0;
    for (std::size_t i = 0; i < cfg.samples; ++i) {
      const geometry::Vec3 r = cfg.mu0 + cfg.sigma0 * geometry::Vec3(normal(rng), normal(rng), normal(rng));
      const double d2 = (r - cfg.mu0).squaredNorm();
      s2 += d2;
      inside += geometry::contains(cfg.hull, r);
      in_ball += d2 < cfg.d0 * cfg.d0;
    }
    s2_total += s2 / static_cast<double>(cfg.samples);
  }
  ConcentrationReport out;
  out.draws = cfg.samples * cfg.trials;
  const double n = static_cast<double>(out.draws);
  out.containment_rate = static_cast<double>(inside) / n;
  out.ball_rate = static_cast<double>(in_ball) / n;
  out.standard_error = std::sqrt(out.containment_rate * (1.0 - out.containment_rate) / n);
  out.ball_standard_error = std::sqrt(out.ball_rate * (1.0 - out.ball_rate) / n);
  out.s2 = s2_total / static_cast<double>(cfg.trials);
  const double s = std::sqrt(out.s2);
  out.bound_erf_s = containment_prob(cfg.d0, s, ContainmentMode::ErfForm);
  out.bound_chi3_s = containment_prob(cfg.d0, s, ContainmentMode::ExactChi3);
  out.bound_erf_sigma = containment_prob(cfg.d0, cfg.sigma0, ContainmentMode::ErfForm);
  out.bound_chi3_sigma = containment_prob(cfg.d0, cfg.sigma0, ContainmentMode::ExactChi3);
  return out;
}

double ks_pvalue(double statistic, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ks_pvalue: n must be positive");
  const double root = std::sqrt(static_cast<double>(n));
  const double lambda = (root + 0.12 + 0.11 / root) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

namespace {

double ks_statistic(const std::vector<double>& sorted, const boost::math::chi_squared& dist) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = boost::math::cdf(dist, sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

Chi2Report chi2_check(std::size_t L, double sigma0, int dims, std::size_t trials, std::uint64_t seed, double threshold) {
  if (L == 0 || !(sigma0 > 0.0)) throw std::invalid_argument("chi2_check: need L >= 1 and sigma0 > 0");
  if (dims != 1 && dims != 3) throw std::invalid_argument("chi2_check: dims must be 1 or 3");
  if (trials < 1000) throw std::invalid_argument("chi2_check: need at least 1000 trials");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma0);
  std::vector<double> stats(trials);
  for (double& v : stats) {
    double s2 = 0.0;
    for (std::size_t i = 0; i < L * static_cast<std::size_t>(dims); ++i) {
      const double e = normal(rng);
      s2 += e * e;
    }
    s2 /= static_cast<double>(L);
    v = s2 * static_cast<double>(L) / (sigma0 * sigma0);
  }
  std::sort(stats.begin(), stats.end());

  Chi2Report out;
  out.dof = L * static_cast<std::size_t>(dims);
  const boost::math::chi_squared full(static_cast<double>(out.dof));
  const boost::math::chi_squared chi2_l(static_cast<double>(L));
  out.ks_statistic = ks_statistic(stats, full);
  out.ks_pvalue = ks_pvalue(out.ks_statistic, trials);
  out.ks_statistic_l = ks_statistic(stats, chi2_l);
  out.ks_pvalue_l = ks_pvalue(out.ks_statistic_l, trials);
  out.tail_dims_l = boost::math::cdf(boost::math::complement(full, threshold));
  out.tail_l = boost::math::cdf(boost::math::complement(chi2_l, threshold));
  out.empirical_tail = static_cast<double>(stats.end() - std::upper_bound(stats.begin(), stats.end(), threshold)) /
                       static_cast<double>(trials);
  return out;
}

}  // namespace scenediff::theory
