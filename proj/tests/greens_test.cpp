#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "sle/greens.hpp"

using namespace sle;

namespace {

constexpr double kPi = 3.14159265358979323846;

GreenModel model_im(double kappa, double c_hat = 1.0) {
  GreenModel m;
  m.params.kappa = kappa;
  m.form = GreenModel::Form::im;
  m.c_hat = c_hat;
  return m;
}

GreenModel model_crad(double kappa) {
  GreenModel m;
  m.params.kappa = kappa;
  m.form = GreenModel::Form::crad;
  return m;
}

// disk -> H map inverting the marked-boundary normalization
struct DiskToHalf {
  cplx w1, w2;
  cplx sigma;
};

DiskToHalf make_disk_map(cplx w1, cplx w2) {
  double half = 0.5 * (std::arg(w2) - std::arg(w1));
  cplx sigma = std::exp(cplx(0.0, half));
  if (std::sin(half) > 0.0) sigma = -sigma;
  return {w1, w2, sigma};
}

cplx disk_to_half_f(cplx z, const void* ctx) {
  const auto* m = static_cast<const DiskToHalf*>(ctx);
  return m->sigma * (z - m->w1) / (z - m->w2);
}

double disk_to_half_fprime(cplx z, const void* ctx) {
  const auto* m = static_cast<const DiskToHalf*>(ctx);
  return std::abs(m->w1 - m->w2) / std::norm(z - m->w2);
}

cplx identity_f(cplx z, const void*) { return z; }
double identity_fprime(cplx, const void*) { return 1.0; }

cplx double_f(cplx z, const void*) { return 2.0 * z; }
double double_fprime(cplx, const void*) { return 2.0; }

}  // namespace

TEST_CASE("half-plane values at pinned points") {
  GreenModel m2 = model_im(2.0);
  CHECK(green_halfplane(cplx(0.0, 1.0), m2) == doctest::Approx(1.0).epsilon(1e-12));
  double d = m2.params.dim();
  double ratio = green_halfplane(cplx(0.0, 2.0), m2) /
                 green_halfplane(cplx(0.0, 1.0), m2);
  CHECK(ratio == doctest::Approx(std::pow(2.0, d - 2.0)).epsilon(1e-12));
  // 4a-1 = 3 at kappa=2, so the diagonal point picks up (1/sqrt 2)^3
  CHECK(green_halfplane(cplx(1.0, 1.0), m2) ==
        doctest::Approx(std::pow(2.0, -1.5)).epsilon(1e-12));
  CHECK(green_halfplane(cplx(1.0, 1.0), m2) == doctest::Approx(0.35355).epsilon(1e-4));
  // crad form differs by the fixed factor 2^(d-2)
  CHECK(green_halfplane(cplx(0.0, 1.0), model_crad(2.0)) ==
        doctest::Approx(std::pow(2.0, d - 2.0)).epsilon(1e-12));
  // c_hat scales linearly
  CHECK(green_halfplane(cplx(0.7, 1.3), model_im(2.0, 2.5)) ==
        doctest::Approx(2.5 * green_halfplane(cplx(0.7, 1.3), m2)).epsilon(1e-12));
  CHECK_THROWS_AS(green_halfplane(cplx(1.0, 0.0), m2), std::domain_error);
  CHECK_THROWS_AS(green_halfplane(cplx(0.0, -1.0), m2), std::domain_error);
}

TEST_CASE("scaling and reflection are exact") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> re(-3.0, 3.0), im(0.05, 4.0),
      lam(0.1, 5.0);
  for (double kappa : {2.0, 8.0 / 3.0, 6.0}) {
    GreenModel m = model_im(kappa);
    double d = m.params.dim();
    for (int i = 0; i < 100; ++i) {
      cplx z(re(gen), im(gen));
      double l = lam(gen);
      CHECK(green_halfplane(l * z, m) ==
            doctest::Approx(std::pow(l, d - 2.0) * green_halfplane(z, m))
                .epsilon(1e-12));
      CHECK(green_halfplane(cplx(-z.real(), z.imag()), m) ==
            doctest::Approx(green_halfplane(z, m)).epsilon(1e-14));
    }
  }
}

TEST_CASE("transport through trivial maps") {
  GreenModel m = model_im(8.0 / 3.0);
  ConformalMap ident{identity_f, identity_fprime, nullptr};
  cplx z(0.4, 1.2);
  CHECK(green_transport(z, ident, m) ==
        doctest::Approx(green_halfplane(z, m)).epsilon(1e-14));
  ConformalMap dbl{double_f, double_fprime, nullptr};
  // covariance: |F'|^(2-d) G(F z) evaluated by hand
  double d = m.params.dim();
  double expect = std::pow(2.0, 2.0 - d) * green_halfplane(2.0 * z, m);
  CHECK(green_transport(z, dbl, m) == doctest::Approx(expect).epsilon(1e-14));
  // scaling law closes the loop: transported value equals the direct one
  CHECK(green_transport(z, dbl, m) ==
        doctest::Approx(green_halfplane(z, m)).epsilon(1e-12));
}

TEST_CASE("disk formula agrees with transported half-plane values") {
  for (double kappa : {2.0, 8.0 / 3.0, 6.0}) {
    GreenModel m = model_im(kappa);
    cplx pairs[2][2] = {{cplx(1.0, 0.0), cplx(-1.0, 0.0)},
                        {std::polar(1.0, 0.4), std::polar(1.0, -2.0)}};
    for (auto& pr : pairs) {
      DiskToHalf ctx = make_disk_map(pr[0], pr[1]);
      ConformalMap F{disk_to_half_f, disk_to_half_fprime, &ctx};
      for (cplx z : {cplx(0.0, 0.0), cplx(0.3, 0.2), cplx(-0.1, -0.55),
                     cplx(0.6, -0.3)}) {
        double direct = green_disk(z, pr[0], pr[1], m);
        double moved = green_transport(z, F, m);
        CHECK(direct == doctest::Approx(moved).epsilon(1e-9));
      }
    }
  }
  GreenModel m = model_im(2.0);
  // center with antipodal marks: crad 1, preimage i
  double d = m.params.dim();
  CHECK(green_disk(cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(-1.0, 0.0), m) ==
        doctest::Approx(std::pow(0.5, d - 2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(green_disk(cplx(1.5, 0.0), cplx(1.0, 0.0), cplx(-1.0, 0.0), m),
                  std::domain_error);
  CHECK_THROWS_AS(green_disk(cplx(0.0, 0.0), cplx(0.5, 0.0), cplx(-1.0, 0.0), m),
                  std::invalid_argument);
  CHECK_THROWS_AS(green_disk(cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), m),
                  std::invalid_argument);
}

TEST_CASE("green integral refinement and partition") {
  GreenModel m = model_im(2.0);
  Window box{0.0, 1.0, 1.0, 2.0};
  double coarse = green_integral(box, m, 32);
  double fine = green_integral(box, m, 128);
  CHECK(coarse == doctest::Approx(fine).epsilon(0.005));
  // value sits within a factor 2 of area times the center value
  double center = green_halfplane(cplx(0.5, 1.5), m);
  CHECK(fine > 0.5 * center);
  CHECK(fine < 2.0 * center);
  // splitting the box in four and summing stays within quadrature tolerance
  double parts = green_integral({0.0, 0.5, 1.0, 1.5}, m, 32) +
                 green_integral({0.5, 1.0, 1.0, 1.5}, m, 32) +
                 green_integral({0.0, 0.5, 1.5, 2.0}, m, 32) +
                 green_integral({0.5, 1.0, 1.5, 2.0}, m, 32);
  CHECK(parts == doctest::Approx(fine).epsilon(0.005));
  CHECK(green_integral({0.3, 0.3, 1.0, 2.0}, m, 32) == 0.0);
  CHECK_THROWS_AS(green_integral(box, m, 8), std::invalid_argument);
  CHECK_THROWS_AS(green_integral({0.0, 1.0, -0.5, 1.0}, m, 32), std::domain_error);
}

TEST_CASE("green integral converges when the region touches the boundary") {
  // the [Im z]^(d-2) singularity is integrable; graded slabs settle down
  GreenModel m = model_im(2.0);
  Window box{0.0, 1.0, 0.0, 1.0};
  double coarse = green_integral(box, m, 32);
  double fine = green_integral(box, m, 64);
  CHECK(coarse > 0.0);
  CHECK(std::isfinite(coarse));
  CHECK(coarse == doctest::Approx(fine).epsilon(0.01));
  // dyadic-square overload sums boxes
  std::vector<DyadicSquare> squares = {{1, 0, 2}, {1, 1, 2}};
  double via_squares = green_integral(squares, m, 32);
  double direct = green_integral({0.0, 0.5, 1.0, 1.5}, m, 32) +
                  green_integral({0.5, 1.0, 1.0, 1.5}, m, 32);
  CHECK(via_squares == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("two point envelope shape") {
  GreenModel m = model_im(2.0);
  double d = m.params.dim();
  cplx z(0.0, 1.5), w(1.0, 1.5);
  CHECK(two_point_envelope(z, w, 0.0, m) == doctest::Approx(1.0).epsilon(1e-12));
  double r1 = two_point_envelope(z, w, 1.0, m);
  CHECK(r1 == doctest::Approx(std::exp(2.0 * (d - 2.0))).epsilon(1e-12));
  cplx whalf(0.5, 1.5);
  double wide = two_point_envelope(z, w, 0.3, m);
  double near = two_point_envelope(z, whalf, 0.3, m);
  CHECK(near / wide == doctest::Approx(std::pow(2.0, 2.0 - d)).epsilon(1e-12));
  CHECK_THROWS_AS(two_point_envelope(cplx(0.0, 0.5), w, 0.0, m), std::domain_error);
  CHECK_THROWS_AS(two_point_envelope(z, z, 0.0, m), std::invalid_argument);
}

TEST_CASE("comb geometry") {
  CombDomain comb = CombDomain::power_law(50);
  CHECK(comb.max_teeth() == 50);
  CHECK(comb.epsilon.front() == doctest::Approx(0.25).epsilon(1e-12));
  for (std::size_t i = 1; i < comb.epsilon.size(); ++i)
    CHECK(comb.epsilon[i] < comb.epsilon[i - 1]);
  double c = 3.0 / (2.0 * kPi * kPi);
  double sum = 0.0;
  for (int n = 1; n <= comb.max_teeth(); ++n) {
    CHECK(comb.delta(n) == doctest::Approx(c / (static_cast<double>(n) * n))
                               .epsilon(1e-9));
    sum += comb.delta(n);
  }
  CHECK(sum <= 0.25 + 1e-12);
  // teeth alternate their open end
  auto t1 = comb.tooth(1);
  auto t2 = comb.tooth(2);
  CHECK(t1.yhi == doctest::Approx(-0.5 * t1.ylo));
  CHECK(t2.ylo == doctest::Approx(-0.5 * t2.yhi));
  // slabs sit strictly between adjacent teeth
  for (int n = 1; n <= 10; ++n) {
    Window v = comb.slab(n);
    CHECK(v.x0 > comb.epsilon[n] - 1.0);
    CHECK(v.x1 < comb.epsilon[n - 1] - 1.0);
    CHECK(v.x0 < v.x1);
  }
  CHECK_THROWS_AS(comb.delta(0), std::invalid_argument);
  CHECK_THROWS_AS(comb.delta(51), std::invalid_argument);
  CHECK_THROWS_AS(CombDomain::power_law(0), std::invalid_argument);
}

TEST_CASE("comb partial sums against direct summation") {
  CombDomain comb = CombDomain::power_law(10000);
  GreenModel m = model_im(2.0);
  double d = m.params.dim();
  double c = 3.0 / (2.0 * kPi * kPi);
  for (int N : {1, 100, 10000}) {
    double oracle = 0.0;
    for (int n = 1; n <= N; ++n)
      oracle += std::pow(c / (static_cast<double>(n) * n), d - 1.0);
    CHECK(comb_partial_sum(comb, N, m) == doctest::Approx(oracle).epsilon(1e-10));
  }
  CHECK(comb_partial_sum(comb, 1, m) ==
        doctest::Approx(std::pow(comb.delta(1), d - 1.0)).epsilon(1e-12));
  // divergent regime: the ratio tracks sqrt(10^4/10^2) = 10 up to the
  // truncation offset of the n^-1/2 tail
  double ratio = comb_partial_sum(comb, 10000, m) / comb_partial_sum(comb, 100, m);
  CHECK(ratio > 9.0);
  CHECK(ratio < 11.0);
  // convergent probe at d = 2: the sum collapses to sum of deltas <= 1/4
  GreenModel flat = model_im(8.0);
  CHECK(comb_partial_sum(comb, 10000, flat) <= 0.25 + 1e-9);
  CHECK_THROWS_AS(comb_partial_sum(comb, 0, m), std::invalid_argument);
  CHECK_THROWS_AS(comb_partial_sum(comb, 10001, m), std::invalid_argument);
}
