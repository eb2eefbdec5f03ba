#include "sle/minkowski.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sle {

namespace {

// Liang-Barsky clip of [p,q] to a box; false when nothing remains.
bool clip_segment(cplx p, cplx q, const Window& b, cplx& cp, cplx& cq) {
  double dx = q.real() - p.real();
  double dy = q.imag() - p.imag();
  double t0 = 0.0, t1 = 1.0;
  const double pc[4] = {-dx, dx, -dy, dy};
  const double qc[4] = {p.real() - b.x0, b.x1 - p.real(), p.imag() - b.y0,
                        b.y1 - p.imag()};
  for (int i = 0; i < 4; ++i) {
    if (pc[i] == 0.0) {
      if (qc[i] < 0.0) return false;
    } else {
      double t = qc[i] / pc[i];
      if (pc[i] < 0.0) {
        if (t > t1) return false;
        if (t > t0) t0 = t;
      } else {
        if (t < t0) return false;
        if (t < t1) t1 = t;
      }
    }
  }
  cp = p + t0 * cplx(dx, dy);
  cq = p + t1 * cplx(dx, dy);
  return true;
}

Shape clip_polyline(const std::vector<cplx>& pts, const Window& box) {
  Shape out;
  if (pts.empty()) return out;
  if (pts.size() == 1) {
    cplx z = pts[0];
    if (z.real() >= box.x0 && z.real() < box.x1 && z.imag() >= box.y0 &&
        z.imag() < box.y1)
      out.push_back({z});
    return out;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    cplx cp, cq;
    if (clip_segment(pts[i], pts[i + 1], box, cp, cq)) out.push_back({cp, cq});
  }
  return out;
}

struct CellBitmap {
  long j0 = 0, k0 = 0, nx = 0, ny = 0;
  std::vector<std::uint8_t> bits;

  explicit CellBitmap(const Window& win, double h) {
    long j1, k1;
    cell_range(win.x0, win.x1, h, j0, j1);
    cell_range(win.y0, win.y1, h, k0, k1);
    nx = std::max(0L, j1 - j0 + 1);
    ny = std::max(0L, k1 - k0 + 1);
    bits.assign(static_cast<std::size_t>(nx) * ny, 0);
  }
  void set(long j, long k) { bits[(k - k0) * nx + (j - j0)] = 1; }
  long count() const {
    long c = 0;
    for (std::uint8_t b : bits) c += b;
    return c;
  }
};

void mark_shape(const Shape& V, double rho, double h, const Window& win,
                CellBitmap& bm) {
  for (const auto& line : V) {
    if (line.empty()) continue;
    if (line.size() == 1) {
      visit_cells_near_segment(line[0], line[0], rho, h, win,
                               [&](long j, long k) { bm.set(j, k); });
      continue;
    }
    for (std::size_t i = 0; i + 1 < line.size(); ++i)
      visit_cells_near_segment(line[i], line[i + 1], rho, h, win,
                               [&](long j, long k) { bm.set(j, k); });
  }
}

double exp_ratio(double lambda, double L, double dm) {
  // (e^{lambda dm} - e^{L dm}) / (lambda dm), continuous at dm = 0
  if (std::abs(dm) < 1e-12) return (lambda - L) / lambda;
  return (std::exp(lambda * dm) - std::exp(L * dm)) / (lambda * dm);
}

void check_smoothing(double lambda) {
  if (!(lambda > 0.0) || lambda > 0.1 + 1e-15)
    throw std::invalid_argument("smoothing width must lie in (0, 1/10]");
}

}  // namespace

Window trace_window(const std::vector<cplx>& trace, double margin) {
  if (trace.empty()) return {-margin, margin, -margin, margin};
  double x0 = trace[0].real(), x1 = x0, y0 = trace[0].imag(), y1 = y0;
  for (cplx z : trace) {
    x0 = std::min(x0, z.real());
    x1 = std::max(x1, z.real());
    y0 = std::min(y0, z.imag());
    y1 = std::max(y1, z.imag());
  }
  return {x0 - margin, x1 + margin, y0 - margin, y1 + margin};
}

double segment_distance(cplx z, cplx p, cplx q) {
  cplx dpq = q - p;
  double l2 = std::norm(dpq);
  if (l2 == 0.0) return std::abs(z - p);
  double t = ((z.real() - p.real()) * dpq.real() + (z.imag() - p.imag()) * dpq.imag()) / l2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(z - (p + t * dpq));
}

double shape_distance(const Shape& V, cplx z) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& line : V) {
    if (line.empty()) continue;
    if (line.size() == 1) {
      best = std::min(best, std::abs(z - line[0]));
      continue;
    }
    for (std::size_t i = 0; i + 1 < line.size(); ++i)
      best = std::min(best, segment_distance(z, line[i], line[i + 1]));
  }
  return best;
}

void check_resolution(double r, double grid_h) {
  if (!(grid_h > 0.0)) throw ResolutionError("grid_h must be positive");
  if (grid_h > std::exp(-r) / 8.0 * (1.0 + 1e-12))
    throw ResolutionError("resolution rule violated: grid_h must be at most e^-r/8");
}

void cell_range(double lo, double hi, double h, long& jlo, long& jhi) {
  jlo = static_cast<long>(std::ceil(lo / h - 0.5));
  while ((jlo + 0.5) * h < lo) ++jlo;
  while ((jlo - 0.5) * h >= lo) --jlo;
  jhi = static_cast<long>(std::floor(hi / h - 0.5));
  while ((jhi + 0.5) * h >= hi) --jhi;
  while ((jhi + 1.5) * h < hi) ++jhi;
}

long neighborhood_cells(const Shape& V, double r, const Window& win, double grid_h) {
  check_resolution(r, grid_h);
  CellBitmap bm(win, grid_h);
  mark_shape(V, std::exp(-r), grid_h, win, bm);
  return bm.count();
}

double neighborhood_area(const Shape& V, double r, const Window& win, double grid_h) {
  return static_cast<double>(neighborhood_cells(V, r, win, grid_h)) * grid_h * grid_h;
}

double content_at_scale(const Shape& V, double r, const Window& win, double grid_h,
                        double d) {
  return std::exp(r * (2.0 - d)) * neighborhood_area(V, r, win, grid_h);
}

ContentProfile content_profile(const Shape& V, const std::vector<double>& r_grid,
                               const Window& win, double grid_h, double d) {
  ContentProfile p;
  p.r_grid = r_grid;
  p.grid_h = grid_h;
  p.d = d;
  p.values.reserve(r_grid.size());
  for (double r : r_grid) p.values.push_back(content_at_scale(V, r, win, grid_h, d));
  return p;
}

std::pair<double, double> upper_lower_content(const ContentProfile& profile,
                                              double r0) {
  double sup = -std::numeric_limits<double>::infinity();
  double inf = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < profile.r_grid.size(); ++i) {
    if (profile.r_grid[i] < r0 - 1e-12) continue;
    any = true;
    sup = std::max(sup, profile.values[i]);
    inf = std::min(inf, profile.values[i]);
  }
  if (!any)
    throw std::invalid_argument("upper_lower_content: no grid points at or above r0");
  return {sup, inf};
}

double smoothed_value(double dist, double r, double lambda, double d) {
  check_smoothing(lambda);
  double L = 0.0;
  if (dist > 0.0) {
    double rho = -std::log(dist);
    L = std::max(0.0, r - rho);
  }
  if (L > lambda) return 0.0;
  return std::exp(r * (2.0 - d)) * exp_ratio(lambda, L, d - 2.0);
}

SmoothedSample smoothed_content(cplx z, const Shape& V, double r, double lambda,
                                double d) {
  return {z, r, lambda, smoothed_value(shape_distance(V, z), r, lambda, d)};
}

double q_increment_from_distance(double dist, double r, double lambda, double delta,
                                 double d) {
  if (!(delta > 0.0) || delta >= lambda)
    throw std::invalid_argument("q increment requires 0 < delta < lambda");
  return smoothed_value(dist, r, lambda, d) -
         smoothed_value(dist, r + delta, lambda, d);
}

double q_increment(cplx z, const Shape& V, double r, double lambda, double delta,
                   double d) {
  return q_increment_from_distance(shape_distance(V, z), r, lambda, delta, d);
}

double q_bound_constant(double lambda, double delta, double d) {
  check_smoothing(lambda);
  if (!(delta > 0.0) || delta >= lambda)
    throw std::invalid_argument("q bound requires 0 < delta < lambda");
  return std::exp(delta * (2.0 - d)) * exp_ratio(lambda, 0.0, d - 2.0);
}

std::vector<double> occupation_measure(const std::vector<cplx>& trace,
                                       const std::vector<DyadicSquare>& squares,
                                       double r, double grid_h, double d) {
  check_resolution(r, grid_h);
  for (const auto& s : squares)
    if (s.k < 0) throw std::invalid_argument("dyadic square requires k >= 0");
  for (std::size_t i = 0; i < squares.size(); ++i) {
    Window a = squares[i].box();
    for (std::size_t l = i + 1; l < squares.size(); ++l) {
      Window b = squares[l].box();
      if (a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1)
        throw std::invalid_argument("occupation_measure: squares overlap");
    }
  }
  double rho = std::exp(-r);
  std::vector<double> mu;
  mu.reserve(squares.size());
  for (const auto& s : squares) {
    Window box = s.box();
    Shape piece = clip_polyline(trace, box);
    if (piece.empty()) {
      mu.push_back(0.0);
      continue;
    }
    Window nb{box.x0 - 2.0 * rho, box.x1 + 2.0 * rho, box.y0 - 2.0 * rho,
              box.y1 + 2.0 * rho};
    mu.push_back(content_at_scale(piece, r, nb, grid_h, d));
  }
  return mu;
}

void write_content_profile_csv(const std::string& path, const ContentProfile& profile) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "r,mc,grid_h\n";
  char buf[128];
  for (std::size_t i = 0; i < profile.r_grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", profile.r_grid[i],
                  profile.values[i], profile.grid_h);
    out << buf;
  }
}

ContentProfile read_content_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ContentProfile p;
  std::string line;
  if (!std::getline(in, line) || line.rfind("r,mc,grid_h", 0) != 0)
    throw std::runtime_error("bad content profile header in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double r, mc, h;
    char c1, c2;
    if (!(ss >> r >> c1 >> mc >> c2 >> h) || c1 != ',' || c2 != ',')
      throw std::runtime_error("bad content profile row in " + path);
    p.r_grid.push_back(r);
    p.values.push_back(mc);
    p.grid_h = h;
  }
  return p;
}

void write_occupation_csv(const std::string& path,
                          const std::vector<DyadicSquare>& squares,
                          const std::vector<double>& mu) {
  if (squares.size() != mu.size())
    throw std::invalid_argument("write_occupation_csv: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "n,j,k,mu\n";
  char buf[160];
  for (std::size_t i = 0; i < squares.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%ld,%.17g\n", squares[i].n, squares[i].j,
                  squares[i].k, mu[i]);
    out << buf;
  }
}

}  // namespace sle
