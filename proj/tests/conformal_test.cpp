#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "sle/conformal.hpp"

using namespace sle;

TEST_CASE("slit step and inverse are mutual inverses away from the slit") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> re(-4.0, 4.0), im(0.05, 5.0);
  for (int i = 0; i < 200; ++i) {
    cplx z(re(gen), im(gen));
    double dt = 0.01 + 0.2 * std::abs(re(gen)) / 4.0;
    double u = re(gen);
    double a = 0.3 + std::abs(re(gen));
    cplx w = slit_step(z, dt, u, a);
    CHECK(w.imag() >= 0.0);
    cplx back = inverse_slit_step(w, dt, u, a);
    CHECK(std::abs(back - z) < 1e-10 * (1.0 + std::abs(z)));
  }
}

TEST_CASE("slit step pushes the tip preimage to the driving point") {
  double dt = 0.05, u = 0.7, a = 1.0;
  cplx tip = u + cplx(0.0, std::sqrt(2.0 * a * dt));
  CHECK(std::abs(slit_step(tip, dt, u, a) - cplx(u, 0.0)) < 1e-12);
  CHECK(std::abs(inverse_slit_step(cplx(u, 0.0), dt, u, a) - tip) < 1e-12);
}

TEST_CASE("slit step behaves like the identity far away") {
  // g(z) = z + a dt / z + O(z^-2) near infinity (u = 0)
  double dt = 0.02, a = 0.75;
  cplx z(150.0, 80.0);
  cplx w = slit_step(z, dt, 0.0, a);
  cplx expect = z + a * dt / z;
  CHECK(std::abs(w - expect) < 1e-6);
}

TEST_CASE("slit step rejects bad arguments") {
  CHECK_THROWS_AS(slit_step(cplx(0.0, 0.0), 0.1, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(slit_step(cplx(1.0, 1.0), 0.1, 0.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(slit_step(cplx(1.0, 1.0), -0.1, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("real points outside the slit base stay real and ordered") {
  double dt = 0.1, u = 0.0, a = 1.0;
  double base = std::sqrt(2.0 * a * dt);
  cplx right = slit_step(cplx(2.0 * base, 0.0), dt, u, a);
  cplx left = slit_step(cplx(-2.0 * base, 0.0), dt, u, a);
  CHECK(std::abs(right.imag()) < 1e-14);
  CHECK(std::abs(left.imag()) < 1e-14);
  CHECK(right.real() > 0.0);
  CHECK(left.real() < 0.0);
  CHECK(right.real() == doctest::Approx(-left.real()).epsilon(1e-12));
}

TEST_CASE("derivative matches a finite difference") {
  cplx z(0.8, 1.3);
  double dt = 0.07, u = -0.2, a = 0.5;
  cplx deriv;
  slit_step_with_deriv(z, dt, u, a, &deriv);
  double h = 1e-6;
  cplx fd = (slit_step(z + cplx(h, 0.0), dt, u, a) -
             slit_step(z - cplx(h, 0.0), dt, u, a)) /
            cplx(2.0 * h, 0.0);
  CHECK(std::abs(deriv - fd) < 1e-8);
}

TEST_CASE("two half-time slit steps compose to one full step at fixed u") {
  // the vertical slit family is a semigroup in t for constant driving
  double u = 0.4, a = 1.0, dt = 0.12;
  cplx z(1.1, 0.9);
  cplx two = slit_step(slit_step(z, dt / 2, u, a), dt / 2, u, a);
  cplx one = slit_step(z, dt, u, a);
  CHECK(std::abs(two - one) < 1e-12);
}

TEST_CASE("cayley maps the half plane onto the disk with pinned images") {
  cplx w1 = std::polar(1.0, 0.3);
  cplx w2 = std::polar(1.0, 2.4);
  CayleyResult at0 = cayley(cplx(0.0, 0.0), w1, w2);
  CHECK(std::abs(at0.value - w1) < 1e-12);
  CayleyResult far = cayley(cplx(0.0, 1e9), w1, w2);
  CHECK(std::abs(far.value - w2) < 1e-6);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> re(-3.0, 3.0), im(0.01, 4.0);
  for (int i = 0; i < 100; ++i) {
    cplx z(re(gen), im(gen));
    CayleyResult r = cayley(z, w1, w2);
    CHECK(std::abs(r.value) < 1.0);
    CHECK(r.deriv_abs > 0.0);
  }
  // boundary goes to boundary
  CayleyResult edge = cayley(cplx(1.7, 0.0), w1, w2);
  CHECK(std::abs(std::abs(edge.value) - 1.0) < 1e-12);
}

TEST_CASE("cayley derivative modulus matches a finite difference") {
  cplx w1 = std::polar(1.0, -0.8);
  cplx w2 = std::polar(1.0, 1.9);
  cplx z(0.6, 1.4);
  CayleyResult r = cayley(z, w1, w2);
  double h = 1e-6;
  cplx fd = (cayley(z + cplx(h, 0.0), w1, w2).value -
             cayley(z - cplx(h, 0.0), w1, w2).value) /
            cplx(2.0 * h, 0.0);
  CHECK(r.deriv_abs == doctest::Approx(std::abs(fd)).epsilon(1e-6));
}

TEST_CASE("koebe sandwich accepts the legal band and rejects outside") {
  CHECK(koebe_check(1.0, 0.25, 1e-9));
  CHECK(koebe_check(1.0, 1.0, 1e-9));
  CHECK(koebe_check(1.0, 0.5, 0.0));
  CHECK_FALSE(koebe_check(1.0, 0.2, 1e-3));
  CHECK_FALSE(koebe_check(1.0, 1.2, 1e-3));
  // slack admits a small excursion
  CHECK(koebe_check(1.0, 1.02, 0.05));
}

TEST_CASE("upper half plane conformal radius") {
  CHECK(crad_upper_half(cplx(3.0, 2.0)) == doctest::Approx(4.0));
}
