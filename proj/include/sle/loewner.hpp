#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sle/conformal.hpp"

namespace sle {

struct SleParams {
  double kappa = 8.0 / 3.0;
  double a() const { return 2.0 / kappa; }
  double dim() const { return 1.0 + kappa / 8.0; }
};

// kappa is accepted on (0, 8]
void validate_params(const SleParams& p);

struct DrivingPath {
  double dt = 0.0;
  std::vector<double> u;  // u[k] = driving value at time k*dt, u[0] = 0
};

// Brownian driving sampled on a uniform grid; ceil(T/dt) steps, each of the
// full length dt.
DrivingPath sample_driving(double T, double dt, std::uint64_t seed);
DrivingPath sample_driving_n(std::size_t steps, double dt, std::uint64_t seed);

struct LoewnerChain {
  double a = 0.75;
  double dt = 0.0;
  double kappa = 8.0 / 3.0;
  std::uint64_t seed = 0;
  std::vector<double> u;  // driving constant for step k (k = 0 .. size-1)

  std::size_t size() const { return u.size(); }
  double total_time() const { return dt * static_cast<double>(u.size()); }
};

// Step k of the chain carries the sampled value U_{t_{k+1}}; the slit of the
// first step therefore grows from the first nonzero sample, which starts the
// curve on the real axis near the origin.
LoewnerChain chain_from_driving(const DrivingPath& path, const SleParams& p,
                                std::uint64_t seed);

struct Trace {
  double dt = 0.0;
  double kappa = 8.0 / 3.0;
  std::uint64_t seed = 0;
  std::vector<cplx> pts;  // pts[k] approximates the curve at time (k+1) dt
};

enum class TraceMode { serial, blocked };

// Curve point k is the image of U_{t_k} + i sqrt(2 a dt) under the inverse
// elementary maps of steps k-1, ..., 1.  The serial mode composes maps one by
// one; the blocked mode reuses suffix compositions and agrees with serial to
// 1e-10 in every point.
Trace compute_trace(const LoewnerChain& chain, TraceMode mode = TraceMode::blocked);

struct FlowState {
  cplx g{0.0, 0.0};
  cplx log_deriv{0.0, 0.0};
  double t = 0.0;
  bool swallowed = false;
  double swallowed_at = -1.0;
};

// Forward flow of a single point through the chain, with swallowing declared
// when |g - u| drops below 1e-9 max(1, |z0|) or the point lands inside a slit
// base.
FlowState flow_point(const LoewnerChain& chain, cplx z0);

struct FlowSample {
  cplx g;
  double log_deriv_abs;
  double crad;  // 2 Im g / |g'|
};

// Per-step samples of the flow until swallowing (entry k describes the state
// after step k).  Used for conformal-radius profiles.
std::vector<FlowSample> flow_profile(const LoewnerChain& chain, cplx z0);

struct CapacityDiagnostic {
  double deviation;  // |g(Ri) - (Ri + a T / (R i))|
  double bound;      // coarse far-field budget, O(1/R^2)
  bool ok;
};

CapacityDiagnostic capacity_diagnostic(const LoewnerChain& chain, double R = 100.0);

// CSV "t,re,im" with 17 significant digits plus a JSON sidecar carrying
// kappa, seed, N and dt.
void write_trace_csv(const Trace& tr, const std::string& path);
Trace read_trace_csv(const std::string& path);

// CSV "dt,u" plus the same style of sidecar.
void write_chain_csv(const LoewnerChain& chain, const std::string& path);
LoewnerChain read_chain_csv(const std::string& path);

}  // namespace sle
