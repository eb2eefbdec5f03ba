#include "sle/natural_param.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace sle {

namespace {

// interpolate the trace at capacity time t; point k sits at time (k+1) dt
cplx trace_at(const Trace& tr, double t) {
  double s = t / tr.dt - 1.0;
  if (s <= 0.0) return tr.pts.front();
  std::size_t n = tr.pts.size();
  if (s >= static_cast<double>(n - 1)) return tr.pts.back();
  std::size_t k = static_cast<std::size_t>(s);
  double x = s - static_cast<double>(k);
  return tr.pts[k] + x * (tr.pts[k + 1] - tr.pts[k]);
}

}  // namespace

NaturalClock build_clock(const Trace& trace, double r_work, double grid_h) {
  check_resolution(r_work, grid_h);
  NaturalClock clock;
  clock.r_work = r_work;
  clock.grid_h = grid_h;
  clock.d = 1.0 + trace.kappa / 8.0;
  clock.capacity_t.push_back(0.0);
  clock.theta.push_back(0.0);
  if (trace.pts.empty()) return clock;

  double rho = std::exp(-r_work);
  Window win = trace_window(trace.pts, rho + 2.0 * grid_h);
  long j0, j1, k0, k1;
  cell_range(win.x0, win.x1, grid_h, j0, j1);
  cell_range(win.y0, win.y1, grid_h, k0, k1);
  long nx = std::max(0L, j1 - j0 + 1);
  long ny = std::max(0L, k1 - k0 + 1);
  std::size_t n = trace.pts.size();
  const long none = std::numeric_limits<long>::max();
  std::vector<long> first(static_cast<std::size_t>(nx) * ny, none);

  // element i covers: the lone first vertex for i = 0, segment (i-1, i) after
  for (std::size_t i = 0; i < n; ++i) {
    cplx p = i == 0 ? trace.pts[0] : trace.pts[i - 1];
    cplx q = trace.pts[i];
    visit_cells_near_segment(p, q, rho, grid_h, win, [&](long j, long k) {
      long& slot = first[(k - k0) * nx + (j - j0)];
      slot = std::min(slot, static_cast<long>(i));
    });
  }

  std::vector<long> hist(n, 0);
  for (long f : first)
    if (f != none) ++hist[f];
  double scale = std::exp(r_work * (2.0 - clock.d)) * grid_h * grid_h;
  long cum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += hist[i];
    clock.capacity_t.push_back(trace.dt * static_cast<double>(i + 1));
    clock.theta.push_back(scale * static_cast<double>(cum));
  }
  return clock;
}

NaturalClock build_clock_extrapolated(const Trace& trace, double r_work,
                                      double grid_h) {
  NaturalClock c1 = build_clock(trace, r_work, grid_h);
  NaturalClock c2 = build_clock(trace, r_work + 0.5, grid_h);
  // half-order error model err ~ e^{-r/2}: ext = c2 + (c2 - c1) w
  double w = std::exp(-0.25) / (1.0 - std::exp(-0.25));
  NaturalClock out = c2;
  out.r_work = r_work;
  double prev = 0.0;
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    double v = c2.theta[i] + (c2.theta[i] - c1.theta[i]) * w;
    v = std::max(v, prev);
    out.theta[i] = v;
    prev = v;
  }
  return out;
}

double sigma_inverse(const NaturalClock& clock, double theta_target) {
  if (clock.theta.empty()) throw std::invalid_argument("sigma_inverse: empty clock");
  double max_theta = clock.theta.back();
  if (theta_target < 0.0 || theta_target > max_theta)
    throw std::invalid_argument("sigma_inverse: target outside the attained range");
  if (theta_target <= clock.theta.front()) return clock.capacity_t.front();
  std::size_t k =
      std::lower_bound(clock.theta.begin(), clock.theta.end(), theta_target) -
      clock.theta.begin();
  double th0 = clock.theta[k - 1], th1 = clock.theta[k];
  double t0 = clock.capacity_t[k - 1], t1 = clock.capacity_t[k];
  return t0 + (theta_target - th0) / (th1 - th0) * (t1 - t0);
}

double clock_value_at(const NaturalClock& clock, double t) {
  if (clock.capacity_t.empty()) throw std::invalid_argument("clock_value_at: empty clock");
  if (t <= clock.capacity_t.front()) return clock.theta.front();
  if (t >= clock.capacity_t.back()) return clock.theta.back();
  std::size_t k =
      std::upper_bound(clock.capacity_t.begin(), clock.capacity_t.end(), t) -
      clock.capacity_t.begin();
  double t0 = clock.capacity_t[k - 1], t1 = clock.capacity_t[k];
  double x = (t - t0) / (t1 - t0);
  return clock.theta[k - 1] + x * (clock.theta[k] - clock.theta[k - 1]);
}

NaturalTrace reparametrize_trace(const Trace& trace, const NaturalClock& clock,
                                 std::size_t n_out) {
  if (n_out < 2) throw std::invalid_argument("reparametrize_trace: need n_out >= 2");
  NaturalTrace nt;
  nt.kappa = trace.kappa;
  double max_theta = clock.theta.back();
  for (std::size_t j = 0; j < n_out; ++j) {
    double th = max_theta * static_cast<double>(j) / static_cast<double>(n_out - 1);
    nt.theta.push_back(th);
    nt.pts.push_back(trace_at(trace, sigma_inverse(clock, th)));
  }
  return nt;
}

SegmentContentCheck segment_content_check(const Trace& trace, double s, double t,
                                          const NaturalClock& clock) {
  double span = trace.dt * static_cast<double>(trace.pts.size());
  if (!(s >= 0.0) || !(s <= t) || t > span + 1e-12)
    throw std::invalid_argument("segment_content_check: need 0 <= s <= t within the span");
  SegmentContentCheck out;
  out.clock_increment = clock_value_at(clock, t) - clock_value_at(clock, s);
  if (s == t) return out;

  std::vector<cplx> piece;
  piece.push_back(trace_at(trace, s));
  double ks = s / trace.dt - 1.0, kt = t / trace.dt - 1.0;
  long lo = static_cast<long>(std::ceil(ks + 1e-12));
  long hi = static_cast<long>(std::floor(kt - 1e-12));
  for (long k = std::max(0L, lo); k <= hi && k < static_cast<long>(trace.pts.size());
       ++k)
    piece.push_back(trace.pts[k]);
  cplx endp = trace_at(trace, t);
  if (piece.empty() || std::abs(endp - piece.back()) > 0.0) piece.push_back(endp);

  double rho = std::exp(-clock.r_work);
  Window win = trace_window(piece, rho + 2.0 * clock.grid_h);
  out.segment_content = content_at_scale(shape_from_trace(piece), clock.r_work, win,
                                         clock.grid_h, clock.d);
  double ref = std::max(out.segment_content, 1e-300);
  out.relative_gap = std::abs(out.clock_increment - out.segment_content) / ref;
  return out;
}

double domain_transfer_time(const NaturalTrace& natural_trace, const ConformalMap& F,
                            double s, double t) {
  const auto& th = natural_trace.theta;
  if (th.size() < 2) throw std::invalid_argument("domain_transfer_time: trace too short");
  if (!(s >= th.front() - 1e-12) || !(t <= th.back() + 1e-12) || !(s <= t))
    throw std::invalid_argument("domain_transfer_time: interval outside natural range");
  double d = 1.0 + natural_trace.kappa / 8.0;

  std::vector<double> f(th.size());
  for (std::size_t i = 0; i < th.size(); ++i) {
    double fp = F.fprime_abs(natural_trace.pts[i], F.ctx);
    if (!(fp > 0.0) || !std::isfinite(fp))
      throw std::domain_error("domain_transfer_time: map not conformal on the segment");
    f[i] = std::pow(fp, d);
  }

  // integral of the piecewise-linear interpolant of f over [s,t]
  auto interp = [&](double x, std::size_t k) {
    double x0 = th[k], x1 = th[k + 1];
    double w = (x - x0) / (x1 - x0);
    return f[k] + w * (f[k + 1] - f[k]);
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < th.size(); ++k) {
    double lo = std::max(s, th[k]);
    double hi = std::min(t, th[k + 1]);
    if (hi <= lo) continue;
    total += 0.5 * (interp(lo, k) + interp(hi, k)) * (hi - lo);
  }
  return total;
}

void write_clock_csv(const std::string& path, const NaturalClock& clock) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "t,theta\n";
  char buf[96];
  for (std::size_t i = 0; i < clock.capacity_t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", clock.capacity_t[i],
                  clock.theta[i]);
    out << buf;
  }
}

void write_natural_trace_csv(const std::string& path, const NaturalTrace& nt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "theta,re,im\n";
  char buf[128];
  for (std::size_t i = 0; i < nt.theta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", nt.theta[i],
                  nt.pts[i].real(), nt.pts[i].imag());
    out << buf;
  }
}

}  // namespace sle
