#pragma once

#include <vector>

#include "sle/conformal.hpp"
#include "sle/loewner.hpp"
#include "sle/minkowski.hpp"

namespace sle {

// Two normalizations of the same shape: the crad form uses the conformal
// radius as the linear scale, the Im form uses crad/2 (= Im z in H).  They
// differ by the fixed factor 2^(d-2); the mode is explicit so no caller can
// mix them silently.  c_hat = 1 is the constant-free "shape only" default.
struct GreenModel {
  SleParams params;
  enum class Form { crad, im } form = Form::im;
  double c_hat = 1.0;
};

double green_halfplane(cplx z, const GreenModel& model);

// Unit disk with marked boundary points w1, w2.
double green_disk(cplx z, cplx w1, cplx w2, const GreenModel& model);

// Differentiable map into H with its derivative modulus, for covariance
// transport G_D(z) = |F'(z)|^(2-d) G_H(F(z)).
struct ConformalMap {
  cplx (*f)(cplx, const void*);
  double (*fprime_abs)(cplx, const void*);
  const void* ctx = nullptr;
};
double green_transport(cplx z, const ConformalMap& F, const GreenModel& model);

// Tensor midpoint quadrature of the Green's function over a rectangle in H,
// with dyadic grading toward the real axis when the region touches it.
double green_integral(const Window& region, const GreenModel& model, int quad_n);
double green_integral(const std::vector<DyadicSquare>& squares,
                      const GreenModel& model, int quad_n);

// Shape of the two-point upper bound at separation scale r.
double two_point_envelope(cplx z, cplx w, double r, const GreenModel& model);

// Comb domain: the unit disk minus vertical teeth J_n at x = eps_n - 1 whose
// open end alternates with the parity of n.
struct CombDomain {
  std::vector<double> epsilon;  // eps_1 > eps_2 > ... > 0, eps_1 <= 1/4

  struct Tooth {
    double x, ylo, yhi;
  };

  int max_teeth() const { return static_cast<int>(epsilon.size()) - 1; }
  double delta(int n) const;  // 1-based
  Tooth tooth(int n) const;
  Window slab(int n) const;  // V_n, between teeth n and n+1

  // delta_n = (3 / (2 pi^2)) n^-2, so the deltas sum to 1/4
  static CombDomain power_law(int terms);
};

// Sum over n <= N of delta_n^(d-1), the per-slab lower-bound surrogate for
// the Green integral of the comb.
double comb_partial_sum(const CombDomain& comb, int N, const GreenModel& model);

}  // namespace sle
