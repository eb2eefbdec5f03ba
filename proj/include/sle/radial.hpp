#pragma once

#include <string>
#include <vector>

#include "sle/loewner.hpp"
#include "sle/rng.hpp"

namespace sle {

enum class DriftMode { chordal, two_sided };

struct AngleState {
  double theta = 0.0;
  double t_hat = 0.0;
  bool alive = true;
};

// All SDE work runs in the hatted clock; these are the only conversions.
inline double hatted_from_capacity(double t, double a) { return t / (2.0 * a); }
inline double capacity_from_hatted(double t_hat, double a) { return 2.0 * a * t_hat; }

AngleState step_angle(const AngleState& state, double dt_hat, DriftMode mode,
                      double noise, const SleParams& params);

struct RadialPath {
  double theta0 = 0.0;
  std::vector<double> t_hat;
  std::vector<double> theta;
  bool absorbed = false;
  double absorption_t_hat = 0.0;  // meaningful only when absorbed
};

RadialPath simulate_to_absorption_or(double T_hat, double theta0, DriftMode mode,
                                     double dt_hat, std::uint64_t seed,
                                     const SleParams& params);

// phi(theta) = C sin^e theta with e = 4a; the normalizer and both CDF
// directions are tabulated at build time.
struct StationaryDensity {
  double exponent = 0.0;
  double normalizer = 0.0;  // C, with 1/C the quadrature of sin^e over (0,pi)
  std::vector<double> theta_nodes;
  std::vector<double> cdf_nodes;
  std::vector<double> inv_theta;  // theta at uniformly spaced u in [0,1]
  std::vector<double> inv_slope;  // monotone cubic slopes d theta / d u

  double pdf(double theta) const;
  double cdf(double theta) const;
  double inverse_cdf(double u) const;
};

StationaryDensity stationary_density(const SleParams& params);
std::vector<double> sample_stationary(const StationaryDensity& density,
                                      std::uint64_t seed, std::size_t n);

struct MartingaleDiagnostic {
  std::vector<double> t_hat;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::size_t paths = 0;
};

// Means of the indicator-weighted martingale across a hatted time grid,
// chordal drift only.
MartingaleDiagnostic martingale_diagnostic(const SleParams& params, double theta0,
                                           const std::vector<double>& t_grid,
                                           std::size_t N, double dt_hat,
                                           std::uint64_t seed);

struct CouplingResult {
  std::vector<double> t_hat;
  std::vector<double> uncoupled_fraction;
  std::size_t pairs = 0;
  std::size_t discarded = 0;  // numerically absorbed before coupling
};

CouplingResult coupling_experiment(double theta0, double theta0_tilde, double dt_hat,
                                   double horizon, std::size_t N, std::uint64_t seed,
                                   const SleParams& params);

struct RadialTimeMap {
  std::vector<double> capacity_t;
  std::vector<double> radial_s;
  long swallowed_step = -1;  // -1 when the point survives the whole chain
};

// Radial time of a marked interior point: the drop in log conformal radius
// along the flow, truncated at the swallowing step if any.
RadialTimeMap radial_reparam(const LoewnerChain& chain, cplx z);

struct KoebeCheck {
  long checked = 0;
  long violations = 0;
};

// Distance-to-hull vs conformal radius sandwich along the flow of z, with the
// hull approximated by the trace polyline prefix plus the real line.
KoebeCheck koebe_sandwich_check(const LoewnerChain& chain,
                                const std::vector<cplx>& trace, cplx z,
                                double tol_factor);

void write_radial_path_csv(const std::string& path, const RadialPath& rp);
void write_summary_csv(const std::string& path, const std::vector<double>& t,
                       const std::vector<double>& mean,
                       const std::vector<double>& se, std::size_t n);

}  // namespace sle
