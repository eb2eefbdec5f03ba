#include "sle/radial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "sle/minkowski.hpp"

namespace sle {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kThetaMin = 1e-5;

double clamped_cot(double theta) {
  double lim = 1.0 / std::tan(kThetaMin);
  return std::clamp(std::cos(theta) / std::sin(theta), -lim, lim);
}

double drift_coeff(DriftMode mode, double a) {
  // two-sided = chordal weighted by sin^(4a-1), shifting the drift by
  // (4a-1) cot theta
  return mode == DriftMode::chordal ? 1.0 - 2.0 * a : 2.0 * a;
}

}  // namespace

AngleState step_angle(const AngleState& state, double dt_hat, DriftMode mode,
                      double noise, const SleParams& params) {
  validate_params(params);
  if (!state.alive) throw std::logic_error("step_angle: state already absorbed");
  if (!(dt_hat > 0.0)) throw std::invalid_argument("step_angle: dt_hat must be positive");
  double drift = drift_coeff(mode, params.a()) * clamped_cot(state.theta);
  AngleState next;
  next.theta = state.theta + drift * dt_hat + std::sqrt(dt_hat) * noise;
  next.t_hat = state.t_hat + dt_hat;
  next.alive = next.theta > kThetaMin && next.theta < kPi - kThetaMin;
  return next;
}

RadialPath simulate_to_absorption_or(double T_hat, double theta0, DriftMode mode,
                                     double dt_hat, std::uint64_t seed,
                                     const SleParams& params) {
  if (!(theta0 > 0.0) || !(theta0 < kPi))
    throw std::invalid_argument("simulate: theta0 must lie in (0, pi)");
  RadialPath rp;
  rp.theta0 = theta0;
  long n = static_cast<long>(std::ceil(T_hat / dt_hat - 1e-12));
  if (n <= 0) return rp;
  rp.t_hat.reserve(n);
  rp.theta.reserve(n);
  GaussianRng rng(seed);
  AngleState st{theta0, 0.0, true};
  for (long k = 0; k < n; ++k) {
    st = step_angle(st, dt_hat, mode, rng.normal(), params);
    rp.t_hat.push_back(st.t_hat);
    rp.theta.push_back(st.theta);
    if (!st.alive) {
      rp.absorbed = true;
      rp.absorption_t_hat = st.t_hat;
      break;
    }
  }
  return rp;
}

double StationaryDensity::pdf(double theta) const {
  if (theta <= 0.0 || theta >= kPi) return 0.0;
  return normalizer * std::pow(std::sin(theta), exponent);
}

double StationaryDensity::cdf(double theta) const {
  if (theta <= 0.0) return 0.0;
  if (theta >= kPi) return 1.0;
  double h = kPi / static_cast<double>(theta_nodes.size() - 1);
  double s = theta / h;
  std::size_t i = std::min(static_cast<std::size_t>(s), theta_nodes.size() - 2);
  double x = s - static_cast<double>(i);
  // Hermite cubic with exact density derivatives at the nodes
  double p0 = cdf_nodes[i], p1 = cdf_nodes[i + 1];
  double m0 = pdf(theta_nodes[i]) * h, m1 = pdf(theta_nodes[i + 1]) * h;
  double x2 = x * x, x3 = x2 * x;
  return (2 * x3 - 3 * x2 + 1) * p0 + (x3 - 2 * x2 + x) * m0 +
         (-2 * x3 + 3 * x2) * p1 + (x3 - x2) * m1;
}

double StationaryDensity::inverse_cdf(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  std::size_t m = inv_theta.size() - 1;
  double s = u * static_cast<double>(m);
  std::size_t i = std::min(static_cast<std::size_t>(s), m - 1);
  double x = s - static_cast<double>(i);
  double h = 1.0 / static_cast<double>(m);
  double p0 = inv_theta[i], p1 = inv_theta[i + 1];
  double m0 = inv_slope[i] * h, m1 = inv_slope[i + 1] * h;
  double x2 = x * x, x3 = x2 * x;
  return (2 * x3 - 3 * x2 + 1) * p0 + (x3 - 2 * x2 + x) * m0 +
         (-2 * x3 + 3 * x2) * p1 + (x3 - x2) * m1;
}

StationaryDensity stationary_density(const SleParams& params) {
  validate_params(params);
  StationaryDensity sd;
  sd.exponent = 4.0 * params.a();

  const std::size_t M = 4096;
  double h = kPi / static_cast<double>(M);
  sd.theta_nodes.resize(M + 1);
  sd.cdf_nodes.resize(M + 1);
  auto raw = [&](double th) {
    double s = std::sin(th);
    return s <= 0.0 ? 0.0 : std::pow(s, sd.exponent);
  };
  sd.theta_nodes[0] = 0.0;
  sd.cdf_nodes[0] = 0.0;
  for (std::size_t i = 1; i <= M; ++i) {
    double lo = (i - 1) * h, hi = i * h;
    sd.theta_nodes[i] = hi;
    // per-cell Simpson of the unnormalized density
    sd.cdf_nodes[i] = sd.cdf_nodes[i - 1] +
                      h / 6.0 * (raw(lo) + 4.0 * raw(0.5 * (lo + hi)) + raw(hi));
  }
  double c_inv = sd.cdf_nodes[M];
  sd.normalizer = 1.0 / c_inv;
  for (auto& v : sd.cdf_nodes) v /= c_inv;
  sd.cdf_nodes[M] = 1.0;

  // inverse table at uniform u, solved on the Hermite forward CDF, with
  // Fritsch-Carlson monotone slopes
  const std::size_t K = 2048;
  sd.inv_theta.resize(K + 1);
  sd.inv_slope.resize(K + 1);
  sd.inv_theta[0] = 0.0;
  sd.inv_theta[K] = kPi;
  for (std::size_t j = 1; j < K; ++j) {
    double u = static_cast<double>(j) / static_cast<double>(K);
    double lo = 0.0, hi = kPi;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (sd.cdf(mid) < u ? lo : hi) = mid;
    }
    sd.inv_theta[j] = 0.5 * (lo + hi);
  }
  double hu = 1.0 / static_cast<double>(K);
  std::vector<double> sec(K);
  for (std::size_t j = 0; j < K; ++j)
    sec[j] = (sd.inv_theta[j + 1] - sd.inv_theta[j]) / hu;
  sd.inv_slope[0] = sec[0];
  sd.inv_slope[K] = sec[K - 1];
  for (std::size_t j = 1; j < K; ++j) {
    if (sec[j - 1] <= 0.0 || sec[j] <= 0.0)
      sd.inv_slope[j] = 0.0;
    else
      sd.inv_slope[j] = 3.0 / (1.0 / sec[j - 1] + 2.0 / (sec[j - 1] + sec[j]) +
                               1.0 / sec[j]);
    double cap = 3.0 * std::min(sec[j - 1], sec[j]);
    sd.inv_slope[j] = std::min(sd.inv_slope[j], cap);
  }
  return sd;
}

std::vector<double> sample_stationary(const StationaryDensity& density,
                                      std::uint64_t seed, std::size_t n) {
  GaussianRng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(density.inverse_cdf(rng.uniform()));
  return out;
}

MartingaleDiagnostic martingale_diagnostic(const SleParams& params, double theta0,
                                           const std::vector<double>& t_grid,
                                           std::size_t N, double dt_hat,
                                           std::uint64_t seed) {
  validate_params(params);
  if (!(theta0 > 0.0) || !(theta0 < kPi))
    throw std::invalid_argument("martingale_diagnostic: theta0 must lie in (0, pi)");
  double a = params.a();
  double d = params.dim();
  double p = 4.0 * a - 1.0;

  std::vector<long> snap;
  long horizon = 0;
  for (double t : t_grid) {
    long k = static_cast<long>(std::llround(t / dt_hat));
    snap.push_back(k);
    horizon = std::max(horizon, k);
  }

  std::vector<double> sum(t_grid.size(), 0.0), sumsq(t_grid.size(), 0.0);
  for (std::size_t path = 0; path < N; ++path) {
    GaussianRng rng(derive_stream_seed(seed, path));
    AngleState st{theta0, 0.0, true};
    for (std::size_t gi = 0; gi < snap.size(); ++gi) {
      if (snap[gi] == 0) {
        double v = std::pow(std::sin(theta0), p);
        sum[gi] += v;
        sumsq[gi] += v * v;
      }
    }
    for (long k = 1; k <= horizon && st.alive; ++k) {
      st = step_angle(st, dt_hat, DriftMode::chordal, rng.normal(), params);
      for (std::size_t gi = 0; gi < snap.size(); ++gi) {
        if (snap[gi] == k) {
          double v = 0.0;
          if (st.alive)
            v = std::exp(2.0 * a * st.t_hat * (2.0 - d)) * std::pow(std::sin(st.theta), p);
          sum[gi] += v;
          sumsq[gi] += v * v;
        }
      }
    }
    // absorbed paths contribute 0 at later grid times; the sums already hold that
  }

  MartingaleDiagnostic out;
  out.t_hat = t_grid;
  out.paths = N;
  for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
    double mean = sum[gi] / static_cast<double>(N);
    double var = std::max(0.0, sumsq[gi] / static_cast<double>(N) - mean * mean);
    out.mean.push_back(mean);
    out.stderr_.push_back(std::sqrt(var / static_cast<double>(N)));
  }
  return out;
}

CouplingResult coupling_experiment(double theta0, double theta0_tilde, double dt_hat,
                                   double horizon, std::size_t N, std::uint64_t seed,
                                   const SleParams& params) {
  validate_params(params);
  if (!(theta0 > 0.0) || !(theta0 < kPi) || !(theta0_tilde > 0.0) ||
      !(theta0_tilde < kPi))
    throw std::invalid_argument("coupling_experiment: angles must lie in (0, pi)");
  long steps = static_cast<long>(std::ceil(horizon / dt_hat - 1e-12));
  const double never = std::numeric_limits<double>::infinity();
  std::vector<double> tau(N, never);
  std::size_t discarded = 0;

  for (std::size_t pair = 0; pair < N; ++pair) {
    if (theta0 == theta0_tilde) {
      tau[pair] = 0.0;
      continue;
    }
    GaussianRng rng(derive_stream_seed(seed, pair));
    AngleState s1{theta0, 0.0, true};
    AngleState s2{theta0_tilde, 0.0, true};
    double sign0 = theta0 < theta0_tilde ? -1.0 : 1.0;
    for (long k = 0; k < steps; ++k) {
      double n1 = rng.normal();
      double n2 = rng.normal();
      s1 = step_angle(s1, dt_hat, DriftMode::two_sided, n1, params);
      s2 = step_angle(s2, dt_hat, DriftMode::two_sided, n2, params);
      double diff = s1.theta - s2.theta;
      if (diff == 0.0 || (diff > 0.0 ? 1.0 : -1.0) != sign0) {
        tau[pair] = s1.t_hat;
        break;
      }
      if (!s1.alive || !s2.alive) {
        ++discarded;
        break;
      }
    }
  }

  CouplingResult res;
  res.pairs = N;
  res.discarded = discarded;
  const int grid = 200;
  std::vector<double> sorted(tau);
  std::sort(sorted.begin(), sorted.end());
  for (int gi = 0; gi <= grid; ++gi) {
    double t = horizon * static_cast<double>(gi) / grid;
    // fraction of pairs with coupling time strictly greater than t
    std::size_t coupled =
        std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    res.t_hat.push_back(t);
    res.uncoupled_fraction.push_back(
        static_cast<double>(N - coupled) / static_cast<double>(N));
  }
  return res;
}

RadialTimeMap radial_reparam(const LoewnerChain& chain, cplx z) {
  if (!(z.imag() > 0.0))
    throw std::domain_error("radial_reparam: marked point must be interior");
  RadialTimeMap out;
  auto profile = flow_profile(chain, z);
  double crad0 = crad_upper_half(z);
  double prev = 0.0;
  for (std::size_t k = 0; k < profile.size(); ++k) {
    double s = std::log(crad0) - std::log(profile[k].crad);
    s = std::max(s, prev);  // crad is nonincreasing; guard fp wiggle
    prev = s;
    out.capacity_t.push_back(chain.dt * static_cast<double>(k + 1));
    out.radial_s.push_back(s);
  }
  if (profile.size() < chain.size())
    out.swallowed_step = static_cast<long>(profile.size());
  return out;
}

KoebeCheck koebe_sandwich_check(const LoewnerChain& chain,
                                const std::vector<cplx>& trace, cplx z,
                                double tol_factor) {
  if (!(z.imag() > 0.0))
    throw std::domain_error("koebe_sandwich_check: marked point must be interior");
  auto profile = flow_profile(chain, z);
  KoebeCheck kc;
  double dist = z.imag();  // distance to the real line
  for (std::size_t k = 0; k < profile.size() && k < trace.size(); ++k) {
    if (k > 0)
      dist = std::min(dist, segment_distance(z, trace[k - 1], trace[k]));
    else
      dist = std::min(dist, std::abs(z - trace[0]));
    double crad = profile[k].crad;
    ++kc.checked;
    if (!(dist * tol_factor >= 0.25 * crad && dist <= crad * tol_factor))
      ++kc.violations;
  }
  return kc;
}

void write_radial_path_csv(const std::string& path, const RadialPath& rp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "t_hat,theta\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", 0.0, rp.theta0);
  out << buf;
  for (std::size_t i = 0; i < rp.t_hat.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", rp.t_hat[i], rp.theta[i]);
    out << buf;
  }
}

void write_summary_csv(const std::string& path, const std::vector<double>& t,
                       const std::vector<double>& mean,
                       const std::vector<double>& se, std::size_t n) {
  if (t.size() != mean.size() || t.size() != se.size())
    throw std::invalid_argument("write_summary_csv: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "t,mean,stderr,n\n";
  char buf[160];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu\n", t[i], mean[i], se[i], n);
    out << buf;
  }
}

}  // namespace sle
