#pragma once

#include <complex>

namespace sle {

using cplx = std::complex<double>;

// Forward elementary vertical-slit map g(z) = u + sqrt((z-u)^2 + 2 a dt),
// branch chosen with nonnegative imaginary part and identity-like behaviour
// near the two ends of the real axis.  Throws std::domain_error when z is a
// real point strictly inside the slit base (|z-u|^2 < 2 a dt), and
// std::invalid_argument for nonpositive a or negative dt.
cplx slit_step(cplx z, double dt, double u, double a);

// Inverse elementary map w -> u + sqrt((w-u)^2 - 2 a dt).  Lifts u itself to
// the slit tip u + i sqrt(2 a dt).
cplx inverse_slit_step(cplx w, double dt, double u, double a);

// Forward map together with its derivative dg/dz = (z-u)/(g(z)-u).
cplx slit_step_with_deriv(cplx z, double dt, double u, double a, cplx* deriv);

struct CayleyResult {
  cplx value;
  double deriv_abs;
};

// Moebius map F from the upper half plane onto the unit disk with F(0) = w1,
// F(infinity) = w2 and F(i) on the geodesic between them (the image of the
// disk center under the normalization psi(0) = i).  w1, w2 must be distinct
// unit-modulus points.
CayleyResult cayley(cplx z, cplx w1, cplx w2);

// Conformal radius of the upper half plane seen from z.
inline double crad_upper_half(cplx z) { return 2.0 * z.imag(); }

// Distance sandwich crad/4 <= dist <= crad, slack factor 1+tol on both ends.
bool koebe_check(double crad, double dist, double tol);

}  // namespace sle
