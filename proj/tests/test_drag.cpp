#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "rebound/drag.hpp"

using namespace rebound;

namespace {

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  REQUIRE(false);
  return Errc::io_error;
}

// Independent route to the film-integral prefactor: the substitution
// w = gamma u^(1+alpha) turns int_0^inf u^p (1 + gamma u^(1+alpha))^-3 du
// into a Beta integral, B(s, 3-s) / ((1+alpha) gamma^s) with
// s = (p+1)/(1+alpha).  Everything reduces to gamma functions.
double beta_route_prefactor(double alpha, double gamma, int dim) {
  const int p = dim;
  const double s = (p + 1) / (1.0 + alpha);
  REQUIRE(s < 3.0);  // convergence; dim 3 needs alpha > 1/3
  const double beta = std::tgamma(s) * std::tgamma(3.0 - s) / 2.0;
  const double film = beta / ((1.0 + alpha) * std::pow(gamma, s));
  const double front = dim == 2 ? 24.0 : 6.0 * std::acos(-1.0);
  return front * film;
}

double expected_exponent(double alpha, int dim) {
  return dim == 2 ? -3.0 * alpha / (1.0 + alpha)
                  : (1.0 - 3.0 * alpha) / (1.0 + alpha);
}

}  // namespace

TEST_CASE("elementary drag laws evaluate to their formulas") {
  const double h = 0.5, xi = 0.01;
  CHECK(evaluate(PowerLawCoupled{0.1, 20.0, 7.4, 2.0}, h, xi) ==
        doctest::Approx((0.1 * std::pow(h, -20.0 * xi - 1.5) + 7.4) / 2.0)
            .epsilon(1e-14));
  CHECK(evaluate(PrototypeD1{20.0}, h, xi) ==
        doctest::Approx(std::pow(h, -20.0 * xi - 1.5)).epsilon(1e-14));
  CHECK(evaluate(PrototypeD2{}, h, 0.3) ==
        doctest::Approx(std::pow(h, -1.3)).epsilon(1e-14));
  CHECK(evaluate(PrototypeD2{}, h, -0.3) ==
        doctest::Approx(1.0 / h).epsilon(1e-14));
  CHECK(evaluate(RigidPower{2.5, 1.5}, h, 0.0) ==
        doctest::Approx(2.5 * std::pow(h, -1.5)).epsilon(1e-14));
  CHECK(evaluate(AnalyticBall{0.2, 3}, 0.1, 0.0) ==
        doctest::Approx(6.0 * std::acos(-1.0) * 0.04 / 0.1).epsilon(1e-14));
}

TEST_CASE("ball closed forms at hand-checked points") {
  const double pi = std::acos(-1.0);
  // dim 2, R = 0.2: at h = 0.1 the surd collapses, 3 sqrt2 (R/h)^{3/2} = 12.
  CHECK(analytic_ball_shape_factor(0.2, 0.1, 2) ==
        doctest::Approx(12.0 * pi).epsilon(1e-14));
  CHECK(analytic_ball_shape_factor(0.2, 0.05, 2) ==
        doctest::Approx(24.0 * std::sqrt(2.0) * pi).epsilon(1e-14));
  CHECK(analytic_ball_shape_factor(0.2, 0.1, 3) ==
        doctest::Approx(2.4 * pi).epsilon(1e-14));
  // Five-significant-figure value quoted for the axisymmetric ball.
  CHECK(analytic_ball_shape_factor(0.2, 0.1, 3) ==
        doctest::Approx(7.5398).epsilon(1e-4));
}

TEST_CASE("film quadrature equals the gamma-function route") {
  for (int dim : {2, 3}) {
    for (double alpha : {0.5, 1.0, 2.0}) {
      for (double gamma : {1.0, 2.5}) {
        const BodyGeometry geom{alpha, gamma, dim};
        const double pref = beta_route_prefactor(alpha, gamma, dim);
        const double expo = expected_exponent(alpha, dim);
        for (double h : {1e-5, 1e-3, 0.1}) {
          const double expected = pref * std::pow(h, expo);
          CHECK(lubrication_shape_factor(geom, h) ==
                doctest::Approx(expected).epsilon(1e-7));
        }
      }
    }
  }
}

TEST_CASE("film quadrature matches the ball closed form near touching") {
  const double radius = 0.2;
  for (int dim : {2, 3}) {
    const LubricationDrag lub(BodyGeometry{1.0, 1.0 / (2.0 * radius), dim});
    for (double h : {1e-3, 1e-2, 1e-1}) {
      const double analytic = analytic_ball_shape_factor(radius, h, dim);
      CHECK(std::abs(lub(h) - analytic) / analytic <= 1e-6);
    }
  }
}

TEST_CASE("cached and one-off film evaluations agree") {
  const BodyGeometry geom{0.7, 1.3, 2};
  const LubricationDrag lub(geom);
  CHECK(lub(1e-3) ==
        doctest::Approx(lubrication_shape_factor(geom, 1e-3)).epsilon(1e-12));
  // Copies share the cached prefactor.
  const LubricationDrag copy = lub;
  CHECK(copy(0.02) == lub(0.02));
}

TEST_CASE("asymptotic decay classification") {
  CHECK(asymptotic_exponent(1.0, 2).exponent ==
        doctest::Approx(-1.5).epsilon(1e-15));
  CHECK(asymptotic_exponent(1.0, 3).exponent ==
        doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(asymptotic_exponent(2.0, 3).exponent ==
        doctest::Approx(-5.0 / 3.0).epsilon(1e-15));
  CHECK(asymptotic_exponent(0.5, 2).exponent ==
        doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(asymptotic_exponent(1.0, 2).regime == DecayRegime::power_law);
}

TEST_CASE("divergent film integrals are rejected with the dedicated code") {
  CHECK(code_of([] {
          lubrication_shape_factor(BodyGeometry{1.0 / 3.0, 1.0, 3}, 1e-3);
        }) == Errc::divergent_integral);
  CHECK(code_of([] {
          lubrication_shape_factor(BodyGeometry{0.2, 1.0, 3}, 1e-3);
        }) == Errc::divergent_integral);
  // The planar film converges for every positive alpha.
  CHECK(lubrication_shape_factor(BodyGeometry{1.0 / 3.0, 1.0, 2}, 1e-3) > 0.0);
}

TEST_CASE("closed-gap and overflow guards") {
  CHECK(code_of([] { evaluate(RigidPower{1.0, 1.5}, 0.0, 0.0); }) ==
        Errc::nonpositive_distance);
  CHECK(code_of([] { evaluate(PrototypeD2{}, -1.0, 0.0); }) ==
        Errc::nonpositive_distance);
  CHECK(code_of([] { evaluate(RigidPower{1.0, 3.0}, 1e-200, 0.0); }) ==
        Errc::overflow);
  // Hard underflow flushes to zero rather than erroring.
  CHECK(evaluate(RigidPower{1.0, -400.0}, 1e-2, 0.0) == 0.0);
}

TEST_CASE("geometry validation") {
  CHECK(code_of([] { BodyGeometry{1.0, 1.0, 4}.validate(); }) ==
        Errc::validation_error);
  CHECK(code_of([] { BodyGeometry{0.0, 1.0, 3}.validate(); }) ==
        Errc::validation_error);
  CHECK(code_of([] { BodyGeometry{1.0, -2.0, 2}.validate(); }) ==
        Errc::validation_error);
}

TEST_CASE("audit: prototype monotonicity holds below h = 1 and breaks at 2") {
  std::vector<double> h_ok, xi;
  for (int i = 0; i < 24; ++i) h_ok.push_back(1e-3 * std::pow(1e3, i / 23.0));
  for (int i = 0; i < 11; ++i) xi.push_back(-0.05 + 0.1 * i / 10.0);
  std::vector<double> h_bad = h_ok;
  h_bad.push_back(2.0);

  for (const DragLaw& law :
       {DragLaw(PrototypeD1{20.0}), DragLaw(PrototypeD2{})}) {
    const AuditReport ok = assumption_audit(law, h_ok, xi);
    CHECK(ok.monotone_in_xi.pass);

    const AuditReport bad = assumption_audit(law, h_bad, xi);
    CHECK_FALSE(bad.monotone_in_xi.pass);
    REQUIRE(bad.monotone_in_xi.witness.has_value());
    CHECK(bad.monotone_in_xi.witness->h == 2.0);
    // The witness records a genuinely decreasing pair.
    CHECK(bad.monotone_in_xi.witness->value2 <
          bad.monotone_in_xi.witness->value1);
    CHECK(bad.monotone_in_xi.witness->xi2 > bad.monotone_in_xi.witness->xi1);
  }
}

TEST_CASE("audit: power-law floor holds at the equality configuration") {
  std::vector<double> h, xi;
  for (int i = 0; i < 24; ++i) h.push_back(1e-3 * std::pow(1e3, i / 23.0));
  for (int i = 0; i < 11; ++i) xi.push_back(-0.05 + 0.1 * i / 10.0);
  const AuditReport r = assumption_audit(RigidPower{1.0, 1.5}, h, xi);
  CHECK(r.alpha_used == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(r.lower_bound.pass);
  CHECK(r.monotone_in_xi.pass);
}

TEST_CASE("audit rejects unusable grids") {
  std::vector<double> xi{-0.01, 0.01};
  CHECK(code_of([&] {
          assumption_audit(PrototypeD2{}, std::vector<double>{}, xi);
        }) == Errc::validation_error);
  CHECK(code_of([&] {
          assumption_audit(PrototypeD2{}, std::vector<double>{-1.0, 0.5}, xi);
        }) == Errc::validation_error);
}

TEST_CASE("describe names every law") {
  CHECK(!describe(PowerLawCoupled{0.1, 20.0, 7.4, 1.0}).empty());
  CHECK(!describe(LubricationDrag(BodyGeometry{1.0, 2.5, 3})).empty());
  CHECK(depends_on_xi(PrototypeD1{1.0}));
  CHECK_FALSE(depends_on_xi(RigidPower{1.0, 1.5}));
}
