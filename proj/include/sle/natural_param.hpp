#pragma once

#include <string>
#include <vector>

#include "sle/greens.hpp"
#include "sle/loewner.hpp"
#include "sle/minkowski.hpp"

namespace sle {

struct NaturalClock {
  std::vector<double> capacity_t;  // leading 0 entry, then one per trace point
  std::vector<double> theta;       // content of the trace prefix at r_work
  double r_work = 0.0;
  double grid_h = 0.0;
  double d = 0.0;
};

// The clock comes from one rasterization pass that records, per lattice cell,
// the first trace segment covering it; prefix contents are then cumulative
// histogram sums, so monotonicity and the prefix property are exact.
NaturalClock build_clock(const Trace& trace, double r_work, double grid_h);

// Two-scale stabilization aid: clock at r_work extrapolated against
// r_work + 0.5 under a half-order error model.  Study output only.
NaturalClock build_clock_extrapolated(const Trace& trace, double r_work,
                                      double grid_h);

// inf{s : Theta_s >= theta_target}, linear between grid times.
double sigma_inverse(const NaturalClock& clock, double theta_target);

double clock_value_at(const NaturalClock& clock, double t);

struct NaturalTrace {
  double kappa = 0.0;
  std::vector<double> theta;  // equally spaced natural times
  std::vector<cplx> pts;
};

NaturalTrace reparametrize_trace(const Trace& trace, const NaturalClock& clock,
                                 std::size_t n_out);

struct SegmentContentCheck {
  double clock_increment = 0.0;
  double segment_content = 0.0;
  double relative_gap = 0.0;
};

// Theta_t - Theta_s against the directly computed content of the sub-curve;
// the gap is the double-visit overlap, reported rather than corrected.
SegmentContentCheck segment_content_check(const Trace& trace, double s, double t,
                                          const NaturalClock& clock);

// Integral of |F'(curve(r))|^d over natural time [s,t], trapezoid on the
// piecewise-linear interpolant so adjacent intervals add exactly.
double domain_transfer_time(const NaturalTrace& natural_trace, const ConformalMap& F,
                            double s, double t);

void write_clock_csv(const std::string& path, const NaturalClock& clock);
void write_natural_trace_csv(const std::string& path, const NaturalTrace& nt);

}  // namespace sle
