#pragma once

#include <cstdint>

#include "scenediff/geometry/hull.hpp"

namespace scenediff::theory {

enum class ContainmentMode {
  ErfForm,  // 1/2 (1 + erf(d0 / (sigma sqrt 2)))
  ExactChi3  // Pr(|r - mu| < d0) for an isotropic 3D Gaussian
};

double containment_prob(double d0, double sigma, ContainmentMode mode);

struct ConcentrationConfig {
  geometry::ConvexHull hull;
  geometry::Vec3 mu0 = geometry::Vec3::Zero();
  double d0 = 0.0;  // distance from mu0 to the nearest facet plane
  double sigma0 = 0.05;
  std::size_t samples = 1000;  // L
  std::size_t trials = 1;
};

/// Builds a config around the hull of `cloud`, centered on its centroid.
ConcentrationConfig concentration_config(const geometry::PointCloud& cloud, double sigma0, std::size_t samples,
                                         std::size_t trials);

struct ConcentrationReport {
  double containment_rate = 0.0;  // r inside the hull
  double ball_rate = 0.0;         // |r - mu0| < d0
  double standard_error = 0.0;    // binomial SE of containment_rate
  double ball_standard_error = 0.0;
  double s2 = 0.0;                // mean of (1/L) sum |r - mu0|^2 over trials
  double bound_erf_s = 0.0;     // bounds with the realized s in place of sigma
  double bound_chi3_s = 0.0;
  double bound_erf_sigma = 0.0;
  double bound_chi3_sigma = 0.0;
  std::size_t draws = 0;
};

ConcentrationReport prop2_mc(const ConcentrationConfig& cfg, std::uint64_t seed);

struct Chi2Report {
  std::size_t dof = 0;           // dims * L
  double ks_statistic = 0.0;     // against chi-squared with dof
  double ks_pvalue = 0.0;
  double ks_statistic_l = 0.0;   // against chi-squared with L dof
  double ks_pvalue_l = 0.0;
  double tail_dims_l = 0.0;      // Pr(chi2_{dims L} > C)
  double tail_l = 0.0;           // Pr(chi2_L > C)
  double empirical_tail = 0.0;   // fraction of simulated s^2 L / sigma^2 above C
};

/// Simulates s^2 L / sigma0^2 with noise in `dims` dimensions and compares it
/// with both chi-squared readings.
Chi2Report chi2_check(std::size_t L, double sigma0, int dims, std::size_t trials, std::uint64_t seed,
                      double threshold = 1.0);

/// Asymptotic Kolmogorov p-value for a one-sample KS statistic over n draws.
double ks_pvalue(double statistic, std::size_t n);

}  // namespace scenediff::theory
