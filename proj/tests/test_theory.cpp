#include <doctest.h>

#include <cmath>

#include "scenediff/theory/concentration.hpp"
#include "scenediff/theory/prop1.hpp"

using namespace scenediff::theory;
using scenediff::geometry::PointCloud;
using scenediff::geometry::Vec3;

namespace {

PointCloud unit_cube_corners() {
  PointCloud c;
  for (int i = 0; i < 8; ++i) c.push_back(Vec3(i & 1 ? 0.5 : -0.5, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5));
  return c;
}

/// Simpson integration of the chi-3 density over [0, upper].
double chi3_cdf_numeric(double upper) {
  const int n = 20000;
  const double h = upper / n;
  auto f = [](double r) { return std::sqrt(2.0 / M_PI) * r * r * std::exp(-r * r / 2.0); };
  double s = f(0) + f(upper);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

/// Regularized upper incomplete gamma Q(a, x) by its power series.
double upper_gamma_series(double a, double x) {
  double term = 1.0 / std::tgamma(a + 1.0);
  double sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
  }
  return 1.0 - std::pow(x, a) * std::exp(-x) * sum;
}

}  // namespace

TEST_CASE("symmetric two-state chain satisfies the identity") {
  for (double flip : {0.1, 0.3, 0.5}) {
    const Prop1Report r = prop1_discrete_check(symmetric_chain(flip, 3, 4));
    CHECK(r.max_deviation < 1e-12);
    CHECK(r.checked == 4 * 2 * 2 * 3);
    CHECK(r.skipped == 0);
  }
}

TEST_CASE("random five-state chains satisfy the identity for 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Prop1Report r = prop1_discrete_check(random_chain(5, 3, 3, seed));
    CHECK(r.max_deviation < 1e-10);
    CHECK(r.checked == 3 * 5 * 5 * 3);
  }
}

TEST_CASE("random chains of every small size satisfy the identity") {
  std::uint64_t seed = 100;
  for (std::size_t k : {1, 2, 4, 7, 10}) {
    for (std::size_t j : {1, 2, 5}) {
      for (std::size_t t : {1, 2, 5}) {
        if (k == 10 && t == 5) continue;
        CHECK(prop1_discrete_check(random_chain(k, j, t, ++seed)).max_deviation < 1e-10);
      }
    }
  }
}

TEST_CASE("permutation chains give exactly zero deviation") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Prop1Report r = prop1_discrete_check(permutation_chain(4, 2, 3, seed));
    CHECK(r.max_deviation == 0.0);
    CHECK(r.checked > 0);
    CHECK(r.skipped > 0);
  }
}

TEST_CASE("invalid chains are rejected") {
  DiscreteChainSpec s = random_chain(3, 2, 2, 1);
  s.forward[1].p[0] += 1e-6;
  CHECK_THROWS(prop1_discrete_check(s));
  s = random_chain(3, 2, 2, 1);
  s.initial.pop_back();
  CHECK_THROWS(prop1_discrete_check(s));
  s = random_chain(3, 2, 2, 1);
  s.forward.clear();
  CHECK_THROWS(prop1_discrete_check(s));
}

TEST_CASE("containment probability limits") {
  for (ContainmentMode m : {ContainmentMode::ErfForm, ContainmentMode::ExactChi3}) {
    CHECK(containment_prob(1e6, 1.0, m) == doctest::Approx(1.0));
    CHECK(containment_prob(INFINITY, 1.0, m) == 1.0);
  }
  CHECK(containment_prob(0.0, 1.0, ContainmentMode::ErfForm) == 0.5);
  CHECK(containment_prob(0.0, 1.0, ContainmentMode::ExactChi3) == 0.0);
  CHECK_THROWS(containment_prob(-1.0, 1.0, ContainmentMode::ErfForm));
  CHECK_THROWS(containment_prob(1.0, 0.0, ContainmentMode::ExactChi3));
}

TEST_CASE("exact chi-3 containment matches numerical integration") {
  const double v = containment_prob(1.0, 1.0, ContainmentMode::ExactChi3);
  CHECK(std::abs(v - 0.19875) < 1e-5);
  CHECK(std::abs(v - chi3_cdf_numeric(1.0)) < 1e-10);
  for (double ratio : {0.3, 1.7, 2.5, 4.0}) {
    CHECK(std::abs(containment_prob(ratio * 0.2, 0.2, ContainmentMode::ExactChi3) - chi3_cdf_numeric(ratio)) < 1e-10);
  }
}

TEST_CASE("containment probability is monotone in d0 and sigma") {
  for (ContainmentMode m : {ContainmentMode::ErfForm, ContainmentMode::ExactChi3}) {
    double prev = -1.0;
    for (double d0 = 0.0; d0 < 3.0; d0 += 0.05) {
      const double v = containment_prob(d0, 0.5, m);
      CHECK(v >= prev);
      prev = v;
    }
    prev = 2.0;
    for (double sigma = 0.01; sigma < 3.0; sigma += 0.05) {
      const double v = containment_prob(0.5, sigma, m);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("tight gaussian around the cube center stays inside") {
  const ConcentrationConfig cfg = concentration_config(unit_cube_corners(), 0.05, 1000, 1);
  CHECK(cfg.d0 == doctest::Approx(0.5));
  const ConcentrationReport r = prop2_mc(cfg, 1);
  CHECK(r.containment_rate >= r.bound_chi3_sigma);
  CHECK(r.containment_rate >= 0.999);
  CHECK(r.s2 == doctest::Approx(3.0 * 0.05 * 0.05).epsilon(0.1));
}

TEST_CASE("vanishing sigma gives certain containment") {
  const ConcentrationReport r = prop2_mc(concentration_config(unit_cube_corners(), 1e-6, 100, 50), 2);
  CHECK(r.containment_rate == 1.0);
  CHECK(r.bound_erf_s == 1.0);
  CHECK(r.bound_chi3_s == 1.0);
}

TEST_CASE("ball rate at sigma equal to d0 matches the chi-3 law") {
  const ConcentrationConfig cfg = concentration_config(unit_cube_corners(), 0.5, 1, 10000);
  const ConcentrationReport r = prop2_mc(cfg, 3);
  CHECK(std::abs(r.ball_rate - r.bound_chi3_sigma) < 3.0 * r.ball_standard_error);
  CHECK(r.containment_rate >= r.bound_chi3_sigma - 3.0 * r.standard_error);
}

TEST_CASE("empirical containment never falls below the chi-3 bound") {
  std::uint64_t seed = 10;
  for (double ratio : {0.05, 0.1, 0.25, 0.5, 1.0, 2.0}) {
    const ConcentrationReport r = prop2_mc(concentration_config(unit_cube_corners(), ratio * 0.5, 200, 20), ++seed);
    CHECK(r.containment_rate >= r.bound_chi3_sigma - 3.0 * r.standard_error);
    CHECK(r.containment_rate >= r.ball_rate);
  }
}

TEST_CASE("bounds rise to one as s shrinks") {
  double prev_erf = 0.0, prev_chi = 0.0;
  for (double s = 2.0; s > 1e-3; s *= 0.7) {
    const double p = containment_prob(0.5, s, ContainmentMode::ErfForm);
    const double c = containment_prob(0.5, s, ContainmentMode::ExactChi3);
    CHECK(p >= prev_erf);
    CHECK(c >= prev_chi);
    prev_erf = p, prev_chi = c;
  }
  CHECK(prev_erf == doctest::Approx(1.0));
  CHECK(prev_chi == doctest::Approx(1.0));
}

TEST_CASE("kolmogorov p-value reference points") {
  CHECK(ks_pvalue(1.358 / std::sqrt(1e8), 100000000) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(ks_pvalue(1.628 / std::sqrt(1e8), 100000000) == doctest::Approx(0.01).epsilon(0.01));
  CHECK(ks_pvalue(0.0, 10) == 1.0);
  CHECK(ks_pvalue(1.0, 1000) < 1e-12);
}

TEST_CASE("one-dimensional noise follows chi-squared with L dof") {
  const Chi2Report r = chi2_check(64, 0.3, 1, 4000, 5);
  CHECK(r.dof == 64);
  CHECK(r.ks_pvalue > 0.01);
}

TEST_CASE("three-dimensional noise follows 3L dof and not L") {
  const Chi2Report r = chi2_check(64, 0.3, 3, 4000, 6);
  CHECK(r.dof == 192);
  CHECK(r.ks_pvalue > 0.01);
  CHECK(r.ks_pvalue_l < 1e-6);
}

TEST_CASE("tail claim for L = 21 and C = 1") {
  const Chi2Report r = chi2_check(21, 1.0, 1, 2000, 7);
  const double oracle = upper_gamma_series(10.5, 0.5);
  CHECK(r.tail_l == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(r.tail_l > 1.0 - 1e-9);
  CHECK(r.empirical_tail == 1.0);
  CHECK_THROWS(chi2_check(21, 1.0, 2, 2000, 7));
  CHECK_THROWS(chi2_check(21, 1.0, 1, 10, 7));
}
