#include "sle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sle {

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  // Acklam's rational approximation, |error| < 1.2e-9
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double t_quantile(double p, double dof) {
  double z = normal_quantile(p);
  double z3 = z * z * z, z5 = z3 * z * z;
  return z + (z3 + z) / (4.0 * dof) +
         (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * dof * dof);
}

Interval wilson_interval(std::size_t hits, std::size_t n, double level) {
  if (n == 0) throw std::invalid_argument("wilson_interval: empty sample");
  double z = normal_quantile(0.5 + 0.5 * level);
  double nn = static_cast<double>(n);
  double p = static_cast<double>(hits) / nn;
  double z2 = z * z;
  double denom = 1.0 + z2 / nn;
  double center = (p + z2 / (2.0 * nn)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval iv;
  iv.estimate = p;
  iv.lo = std::max(0.0, center - half);
  iv.hi = std::min(1.0, center + half);
  iv.se = std::sqrt(std::max(p * (1.0 - p) / nn, 0.0));
  return iv;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) throw std::invalid_argument("mean_sd: empty sample");
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

Interval t_interval(double mean, double sd, std::size_t n, double level) {
  if (n == 0) throw std::invalid_argument("t_interval: empty sample");
  double se = sd / std::sqrt(static_cast<double>(n));
  double q = n > 1 ? t_quantile(0.5 + 0.5 * level, static_cast<double>(n - 1))
                   : 0.0;
  return {mean, mean - q * se, mean + q * se, se};
}

Interval t_interval(const std::vector<double>& samples, double level) {
  double m, s;
  mean_sd(samples, m, s);
  return t_interval(m, s, samples.size(), level);
}

WlsFit weighted_least_squares(const std::vector<double>& x,
                              const std::vector<double>& y,
                              const std::vector<double>& w) {
  std::size_t n = x.size();
  if (n < 2 || y.size() != n || w.size() != n)
    throw std::invalid_argument("weighted_least_squares: need matching arrays, n >= 2");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w[i] > 0.0))
      throw std::invalid_argument("weighted_least_squares: weights must be positive");
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  double det = sw * sxx - sx * sx;
  if (det <= 0.0)
    throw std::invalid_argument("weighted_least_squares: degenerate design");
  WlsFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  // covariance of the estimates under Var(y_i) = 1/w_i
  fit.se_slope = std::sqrt(sw / det);
  fit.se_intercept = std::sqrt(sxx / det);
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    fit.residuals[i] = y[i] - (fit.intercept + fit.slope * x[i]);
  return fit;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return v[i] < v[j];
  });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman_rho: need matching arrays, n >= 2");
  std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx, sx, my, sy;
  mean_sd(rx, mx, sx);
  mean_sd(ry, my, sy);
  if (sx == 0.0 || sy == 0.0) return 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (rx[i] - mx) * (ry[i] - my);
  cov /= static_cast<double>(x.size() - 1);
  return cov / (sx * sy);
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    dmax = std::max({dmax, std::abs(f - lo), std::abs(f - hi)});
  }
  return dmax;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / na -
                                   static_cast<double>(j) / nb));
  }
  return dmax;
}

double kolmogorov_pvalue(double stat, double n_eff) {
  double rt = std::sqrt(n_eff);
  double lambda = (rt + 0.12 + 0.11 / rt) * stat;
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * lambda * lambda * k * k);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace sle
