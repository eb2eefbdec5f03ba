#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "sle/stats.hpp"

using namespace sle;

TEST_CASE("normal quantile matches known values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-8));
  CHECK(normal_quantile(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-8));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-8));
  CHECK(normal_quantile(1e-10) < -6.0);
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("t quantile approaches the normal for large dof and widens for small") {
  double z = normal_quantile(0.975);
  CHECK(t_quantile(0.975, 1000000) == doctest::Approx(z).epsilon(1e-6));
  CHECK(t_quantile(0.975, 5) > z);
  CHECK(t_quantile(0.975, 30) > z);
  CHECK(t_quantile(0.975, 30) < t_quantile(0.975, 5));
}

TEST_CASE("wilson interval basics") {
  Interval w = wilson_interval(50, 100);
  CHECK(w.estimate == doctest::Approx(0.5));
  CHECK(w.lo > 0.39);
  CHECK(w.hi < 0.61);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  Interval zero = wilson_interval(0, 100);
  CHECK(zero.lo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(zero.hi > 0.0);
  Interval full = wilson_interval(100, 100);
  CHECK(full.hi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(full.lo < 1.0);
  // wider level -> wider interval
  Interval w99 = wilson_interval(50, 100, 0.99);
  CHECK(w99.hi - w99.lo > w.hi - w.lo);
}

TEST_CASE("t interval covers the mean of exact data") {
  std::vector<double> v = {1.0, 2.0, 3.0, 4.0, 5.0};
  Interval ti = t_interval(v);
  CHECK(ti.estimate == doctest::Approx(3.0));
  CHECK(ti.lo < 3.0);
  CHECK(ti.hi > 3.0);
  double m, s;
  mean_sd(v, m, s);
  CHECK(m == doctest::Approx(3.0));
  CHECK(s == doctest::Approx(std::sqrt(2.5)));
}

TEST_CASE("weighted least squares recovers an exact line") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> y, w = {1.0, 4.0, 2.0, 8.0};
  for (double xi : x) y.push_back(-0.75 * xi + 0.31);
  WlsFit fit = weighted_least_squares(x, y, w);
  CHECK(fit.slope == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(0.31).epsilon(1e-12));
  for (double r : fit.residuals) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("weighted least squares downweights the noisy point") {
  std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
  std::vector<double> y = {0.0, 1.0, 2.0, 30.0};
  std::vector<double> w_tight = {1.0, 1.0, 1.0, 1e-8};
  WlsFit fit = weighted_least_squares(x, y, w_tight);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("spearman handles monotone data and ties") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> y = {2.0, 4.0, 6.0, 8.0, 10.0};
  CHECK(spearman_rho(x, y) == doctest::Approx(1.0));
  std::vector<double> yd = {10.0, 8.0, 6.0, 4.0, 2.0};
  CHECK(spearman_rho(x, yd) == doctest::Approx(-1.0));
  std::vector<double> yt = {1.0, 1.0, 2.0, 2.0, 3.0};
  double rho = spearman_rho(x, yt);
  CHECK(rho > 0.9);
  CHECK(rho <= 1.0);
}

TEST_CASE("one-sample KS detects fit and misfit") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u;
  for (int i = 0; i < 4000; ++i) u.push_back(unif(gen));
  auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  double stat = ks_statistic(u, uniform_cdf);
  CHECK(stat < 0.03);
  CHECK(kolmogorov_pvalue(stat, static_cast<double>(u.size())) > 0.01);
  // squared uniforms are far from uniform
  std::vector<double> v;
  for (double x : u) v.push_back(x * x);
  double bad = ks_statistic(v, uniform_cdf);
  CHECK(bad > 0.2);
  CHECK(kolmogorov_pvalue(bad, static_cast<double>(v.size())) < 1e-6);
}

TEST_CASE("two-sample KS on identical and shifted samples") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::vector<double> a, b, c;
  for (int i = 0; i < 3000; ++i) {
    a.push_back(norm(gen));
    b.push_back(norm(gen));
    c.push_back(norm(gen) + 0.5);
  }
  CHECK(ks_two_sample(a, b) < 0.05);
  CHECK(ks_two_sample(a, c) > 0.1);
  CHECK(ks_two_sample(a, a) == doctest::Approx(0.0));
}

TEST_CASE("ks statistic examines both sides of each step") {
  // single sample at the median of the uniform law: D = 1/2
  std::vector<double> one = {0.5};
  double stat = ks_statistic(one, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(stat == doctest::Approx(0.5));
}
