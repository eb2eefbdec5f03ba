#include "sle/conformal.hpp"

#include <cmath>
#include <stdexcept>

namespace sle {

namespace {

// Square root with values in the closed upper half plane.  Inputs on the
// positive real axis are resolved by re_hint, the sign of the real part of
// the point being mapped, so that both maps act like the identity far out on
// the real axis.
cplx branch_sqrt(cplx zz, double re_hint) {
  cplx s = std::sqrt(zz);
  if (s.imag() < 0.0) return -s;
  if (s.imag() == 0.0 && re_hint < 0.0 && s.real() > 0.0) return -s;
  return s;
}

void check_params(double dt, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("slit map: a must be positive");
  if (!(dt >= 0.0)) throw std::invalid_argument("slit map: dt must be nonnegative");
}

}  // namespace

cplx slit_step(cplx z, double dt, double u, double a) {
  check_params(dt, a);
  cplx w = z - u;
  if (w.imag() < 0.0) throw std::domain_error("slit_step: point below the real axis");
  double q = 2.0 * a * dt;
  if (w.imag() == 0.0 && w.real() * w.real() < q)
    throw std::domain_error("slit_step: real point inside the slit base");
  return u + branch_sqrt(w * w + q, w.real());
}

cplx inverse_slit_step(cplx w, double dt, double u, double a) {
  check_params(dt, a);
  cplx v = w - u;
  if (v.imag() < 0.0) throw std::domain_error("inverse_slit_step: point below the real axis");
  double q = 2.0 * a * dt;
  return u + branch_sqrt(v * v - q, v.real());
}

cplx slit_step_with_deriv(cplx z, double dt, double u, double a, cplx* deriv) {
  cplx g = slit_step(z, dt, u, a);
  if (deriv) {
    cplx w = z - u;
    cplx s = g - cplx(u, 0.0);
    *deriv = (s == cplx(0.0, 0.0)) ? cplx(0.0, 0.0) : w / s;
  }
  return g;
}

CayleyResult cayley(cplx z, cplx w1, cplx w2) {
  const double tol = 1e-9;
  if (std::abs(std::abs(w1) - 1.0) > tol || std::abs(std::abs(w2) - 1.0) > tol)
    throw std::invalid_argument("cayley: boundary points must lie on the unit circle");
  if (std::abs(w1 - w2) < tol)
    throw std::invalid_argument("cayley: boundary points must be distinct");
  if (z.imag() < 0.0)
    throw std::domain_error("cayley: point below the real axis");

  double al = std::arg(w1);
  double be = std::arg(w2);
  double half = 0.5 * (be - al);
  cplx sigma = std::exp(cplx(0.0, half));
  if (std::sin(half) > 0.0) sigma = -sigma;

  cplx den = z - sigma;
  CayleyResult out;
  out.value = (w2 * z - sigma * w1) / den;
  out.deriv_abs = std::abs(w1 - w2) / std::norm(den);
  return out;
}

bool koebe_check(double crad, double dist, double tol) {
  double f = 1.0 + tol;
  return dist * f >= 0.25 * crad && dist <= crad * f;
}

}  // namespace sle
