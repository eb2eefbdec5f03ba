#include "sle/greens.hpp"

#include <cmath>
#include <stdexcept>

namespace sle {

namespace {

constexpr double kPi = 3.14159265358979323846;

// value from the effective linear scale (crad or crad/2) and the angle sine
double green_from_scale(double scale, double sin_arg, const GreenModel& model) {
  double d = model.params.dim();
  double p = 4.0 * model.params.a() - 1.0;
  return model.c_hat * std::pow(scale, d - 2.0) * std::pow(sin_arg, p);
}

double half_scale(double crad, const GreenModel& model) {
  return model.form == GreenModel::Form::crad ? crad : 0.5 * crad;
}

}  // namespace

double green_halfplane(cplx z, const GreenModel& model) {
  validate_params(model.params);
  if (!(z.imag() > 0.0))
    throw std::domain_error("green_halfplane: boundary or exterior point");
  double crad = crad_upper_half(z);
  double sin_arg = z.imag() / std::abs(z);
  return green_from_scale(half_scale(crad, model), sin_arg, model);
}

double green_disk(cplx z, cplx w1, cplx w2, const GreenModel& model) {
  validate_params(model.params);
  if (!(std::abs(z) < 1.0)) throw std::domain_error("green_disk: point outside the disk");
  const double tol = 1e-9;
  if (std::abs(std::abs(w1) - 1.0) > tol || std::abs(std::abs(w2) - 1.0) > tol)
    throw std::invalid_argument("green_disk: marked points must lie on the unit circle");
  if (std::abs(w1 - w2) < tol)
    throw std::invalid_argument("green_disk: marked points must be distinct");
  // preimage of z in H under the map normalized as in cayley(); the shape
  // factor is the sine of its argument and the linear scale is crad_D
  double half = 0.5 * (std::arg(w2) - std::arg(w1));
  cplx sigma = std::exp(cplx(0.0, half));
  if (std::sin(half) > 0.0) sigma = -sigma;
  cplx zeta = sigma * (z - w1) / (z - w2);
  double crad = 1.0 - std::norm(z);
  double sin_arg = zeta.imag() / std::abs(zeta);
  return green_from_scale(half_scale(crad, model), sin_arg, model);
}

double green_transport(cplx z, const ConformalMap& F, const GreenModel& model) {
  double fp = F.fprime_abs(z, F.ctx);
  if (!(fp > 0.0)) throw std::domain_error("green_transport: vanishing derivative");
  double d = model.params.dim();
  return std::pow(fp, 2.0 - d) * green_halfplane(F.f(z, F.ctx), model);
}

namespace {

double rect_midpoint(const Window& rect, const GreenModel& model, int nx, int ny) {
  double hx = rect.width() / nx;
  double hy = rect.height() / ny;
  double sum = 0.0;
  for (int iy = 0; iy < ny; ++iy) {
    double y = rect.y0 + (iy + 0.5) * hy;
    double row = 0.0;
    for (int ix = 0; ix < nx; ++ix) {
      double x = rect.x0 + (ix + 0.5) * hx;
      row += green_halfplane(cplx(x, y), model);
    }
    sum += row * hx * hy;
  }
  return sum;
}

}  // namespace

double green_integral(const Window& region, const GreenModel& model, int quad_n) {
  validate_params(model.params);
  if (quad_n < 16)
    throw std::invalid_argument("green_integral: quadrature_n must be at least 16");
  if (region.y0 < 0.0)
    throw std::domain_error("green_integral: region extends below the boundary");
  if (region.width() <= 0.0 || region.height() <= 0.0) return 0.0;
  if (region.y0 > 0.0) return rect_midpoint(region, model, quad_n, quad_n);

  // Region touches the real axis: integrate dyadically graded slabs
  // [y1 2^-m-1, y1 2^-m] until the analytic bound on the remaining strip,
  // c_hat scale^(d-2) integrated with sin <= 1, is negligible.
  double d = model.params.dim();
  double scale_factor = model.form == GreenModel::Form::crad ? 2.0 : 1.0;
  double total = 0.0;
  double hi = region.y1;
  for (int m = 0; m < 4000; ++m) {
    double lo = 0.5 * hi;
    total += rect_midpoint({region.x0, region.x1, lo, hi}, model, quad_n, quad_n);
    double tail = model.c_hat * std::pow(scale_factor, d - 2.0) * region.width() *
                  std::pow(lo, d - 1.0) / (d - 1.0);
    if (tail <= 1e-12 * std::max(std::abs(total), 1e-30)) break;
    hi = lo;
  }
  return total;
}

double green_integral(const std::vector<DyadicSquare>& squares,
                      const GreenModel& model, int quad_n) {
  double sum = 0.0;
  for (const auto& s : squares) sum += green_integral(s.box(), model, quad_n);
  return sum;
}

double two_point_envelope(cplx z, cplx w, double r, const GreenModel& model) {
  validate_params(model.params);
  if (z.imag() < 1.0 || w.imag() < 1.0)
    throw std::domain_error("two_point_envelope: points must have Im at least 1");
  double sep = std::abs(z - w);
  if (sep == 0.0)
    throw std::invalid_argument("two_point_envelope: points must be distinct");
  double d = model.params.dim();
  return std::exp(2.0 * r * (d - 2.0)) * std::pow(sep, d - 2.0);
}

double CombDomain::delta(int n) const {
  if (n < 1 || n > max_teeth())
    throw std::invalid_argument("comb: tooth index out of range");
  return epsilon[n - 1] - epsilon[n];
}

CombDomain::Tooth CombDomain::tooth(int n) const {
  if (n < 1 || n > max_teeth())
    throw std::invalid_argument("comb: tooth index out of range");
  double x = epsilon[n - 1] - 1.0;
  double h = std::sqrt(1.0 - x * x);
  if (n % 2 == 1) return {x, -h, 0.5 * h};
  return {x, -0.5 * h, h};
}

Window CombDomain::slab(int n) const {
  double dn = delta(n);
  double x0 = epsilon[n] - 1.0 + 0.25 * dn;
  double x1 = epsilon[n - 1] - 1.0 - 0.25 * dn;
  double half = 0.25 * epsilon[n - 1];
  return {x0, x1, -half, half};
}

CombDomain CombDomain::power_law(int terms) {
  if (terms < 1) throw std::invalid_argument("comb: need at least one tooth");
  double c = 3.0 / (2.0 * kPi * kPi);
  CombDomain comb;
  comb.epsilon.resize(terms + 1);
  comb.epsilon[terms] = 0.0;
  for (int n = terms; n >= 1; --n)
    comb.epsilon[n - 1] = comb.epsilon[n] + c / (static_cast<double>(n) * n);
  // shift so that eps_1 = 1/4 exactly, absorbing the truncated tail of the
  // full series into a positive floor; the deltas are unaffected
  double shift = 0.25 - comb.epsilon[0];
  for (auto& e : comb.epsilon) e += shift;
  return comb;
}

double comb_partial_sum(const CombDomain& comb, int N, const GreenModel& model) {
  validate_params(model.params);
  if (N < 1) throw std::invalid_argument("comb_partial_sum: N must be at least 1");
  if (N > comb.max_teeth())
    throw std::invalid_argument("comb_partial_sum: N exceeds stored teeth");
  double d = model.params.dim();
  double sum = 0.0;
  for (int n = 1; n <= N; ++n) sum += std::pow(comb.delta(n), d - 1.0);
  return sum;
}

}  // namespace sle
