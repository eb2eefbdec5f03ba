#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sle/conformal.hpp"

namespace sle {

// Axis-aligned window [x0,x1) x [y0,y1).
struct Window {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

// Bounding window of a polyline, inflated by margin on every side.
Window trace_window(const std::vector<cplx>& trace, double margin);

// [j*2^-n,(j+1)*2^-n) x i[k*2^-n,(k+1)*2^-n); the upper family requires k > 0.
struct DyadicSquare {
  int n = 0;
  long j = 0;
  long k = 0;
  double side() const { return std::ldexp(1.0, -n); }
  Window box() const {
    double s = side();
    return {j * s, (j + 1) * s, k * s, (k + 1) * s};
  }
  bool in_plus_family() const { return k > 0; }
};

struct ContentProfile {
  std::vector<double> r_grid;
  std::vector<double> values;
  double grid_h = 0.0;
  double d = 0.0;
};

struct SmoothedSample {
  cplx z;
  double r = 0.0;
  double lambda = 0.0;
  double value = 0.0;
};

// A shape is a union of polylines; a one-vertex polyline is a point.
using Shape = std::vector<std::vector<cplx>>;

inline Shape shape_from_trace(const std::vector<cplx>& trace) { return {trace}; }

double segment_distance(cplx z, cplx p, cplx q);
double shape_distance(const Shape& V, cplx z);

// Raised whenever the resolution rule would be violated; callers map this to a
// distinct exit status.
class ResolutionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Hard resolution rule: grid_h must not exceed e^-r/8.
void check_resolution(double r, double grid_h);

// All counting happens on the absolute lattice with cell centers
// ((j+0.5)h, (k+0.5)h), j,k integer, so windows and square partitions share
// cells exactly.  cell_range gives the inclusive index range of centers
// inside [lo,hi); empty when jhi < jlo.
void cell_range(double lo, double hi, double h, long& jlo, long& jhi);

long neighborhood_cells(const Shape& V, double r, const Window& win, double grid_h);
double neighborhood_area(const Shape& V, double r, const Window& win, double grid_h);
double content_at_scale(const Shape& V, double r, const Window& win, double grid_h,
                        double d);
ContentProfile content_profile(const Shape& V, const std::vector<double>& r_grid,
                               const Window& win, double grid_h, double d);

// (sup, inf) of the profile restricted to r >= r0, as grid approximations.
std::pair<double, double> upper_lower_content(const ContentProfile& profile, double r0);

// Closed form of the smoothed indicator integral given dist(z,V).
double smoothed_value(double dist, double r, double lambda, double d);
SmoothedSample smoothed_content(cplx z, const Shape& V, double r, double lambda,
                                double d);

double q_increment_from_distance(double dist, double r, double lambda, double delta,
                                 double d);
double q_increment(cplx z, const Shape& V, double r, double lambda, double delta,
                   double d);
// Explicit constant C with |Q| <= C e^{r(2-d)} 1{dist <= e^{-(r-0.1)}}.
double q_bound_constant(double lambda, double delta, double d);

std::vector<double> occupation_measure(const std::vector<cplx>& trace,
                                       const std::vector<DyadicSquare>& squares,
                                       double r, double grid_h, double d);

void write_content_profile_csv(const std::string& path, const ContentProfile& profile);
ContentProfile read_content_profile_csv(const std::string& path);
void write_occupation_csv(const std::string& path,
                          const std::vector<DyadicSquare>& squares,
                          const std::vector<double>& mu);

// Visits every lattice cell whose center lies in win and within rho of the
// segment [p,q]; f(j, k) receives absolute cell indices.  Shared by the area
// counters here and the natural-time clock.
template <class F>
void visit_cells_near_segment(cplx p, cplx q, double rho, double h, const Window& win,
                              F&& f) {
  double xlo = std::max(win.x0, std::min(p.real(), q.real()) - rho);
  double xhi = std::min(win.x1, std::max(p.real(), q.real()) + rho);
  double ylo = std::max(win.y0, std::min(p.imag(), q.imag()) - rho);
  double yhi = std::min(win.y1, std::max(p.imag(), q.imag()) + rho);
  if (xlo >= xhi || ylo >= yhi) return;
  long jlo, jhi, klo, khi;
  cell_range(xlo, xhi, h, jlo, jhi);
  cell_range(ylo, yhi, h, klo, khi);
  for (long k = klo; k <= khi; ++k) {
    double cy = (k + 0.5) * h;
    for (long j = jlo; j <= jhi; ++j) {
      cplx c((j + 0.5) * h, cy);
      if (segment_distance(c, p, q) <= rho) f(j, k);
    }
  }
}

}  // namespace sle
