#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace sle {

double normal_quantile(double p);
// Hill's expansion around the normal quantile; intended for dof >= 30.
double t_quantile(double p, double dof);

struct Interval {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double se = 0.0;
};

Interval wilson_interval(std::size_t hits, std::size_t n, double level = 0.95);
Interval t_interval(double mean, double sd, std::size_t n, double level = 0.95);
Interval t_interval(const std::vector<double>& samples, double level = 0.95);

void mean_sd(const std::vector<double>& v, double& mean, double& sd);

struct WlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se_slope = 0.0;
  double se_intercept = 0.0;
  std::vector<double> residuals;
};

WlsFit weighted_least_squares(const std::vector<double>& x,
                              const std::vector<double>& y,
                              const std::vector<double>& w);

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// One-sample Kolmogorov-Smirnov statistic against a CDF; samples need not be
// sorted.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Asymptotic tail probability for the KS statistic at effective sample size n.
double kolmogorov_pvalue(double stat, double n_eff);

}  // namespace sle
