#include <doctest.h>

#include <cmath>

#include "degenlab/profile_curve.hpp"

using namespace degenlab;

namespace {

// Central differences of the closed-form v, independent of grad_v2d.
Vec2 fd_grad_v(Vec2 x, double eps = 1e-6) {
  return {(v2d({x.x + eps, x.y}) - v2d({x.x - eps, x.y})) / (2 * eps),
          (v2d({x.x, x.y + eps}) - v2d({x.x, x.y - eps})) / (2 * eps)};
}

}  // namespace

TEST_CASE("gamma1 endpoints and phi(0)") {
  CHECK(norm(gamma1_point(kPi / 4) - Vec2{-1.0, 1.0}) <= 1e-12);
  CHECK(norm(gamma1_point(3 * kPi / 4) - Vec2{1.0, 1.0}) <= 1e-12);
  const ProfileCurve prof;
  CHECK(std::abs(prof.eval(0.0).phi - 1.0 / std::sqrt(2.0)) <= 1e-10);
}

TEST_CASE("gamma1 is the gradient of v on the unit circle") {
  for (int i = 1; i < 50; ++i) {
    const double th = kPi / 4 + kPi / 2 * i / 50.0;
    const Vec2 x{std::cos(th), std::sin(th)};
    CHECK(norm(gamma1_point(th) - fd_grad_v(x)) <= 1e-8);
    CHECK(norm(grad_v2d(x) - fd_grad_v(x)) <= 1e-8);
  }
}

TEST_CASE("closed-form Hessian of v matches differences of its gradient") {
  const Vec2 x{0.3, -0.8};
  const double eps = 1e-6;
  const Sym2 H = hess_v2d(x);
  const Vec2 gx = (grad_v2d({x.x + eps, x.y}) - grad_v2d({x.x - eps, x.y})) * (0.5 / eps);
  const Vec2 gy = (grad_v2d({x.x, x.y + eps}) - grad_v2d({x.x, x.y - eps})) * (0.5 / eps);
  CHECK(H.xx == doctest::Approx(gx.x).epsilon(1e-7));
  CHECK(H.xy == doctest::Approx(gx.y).epsilon(1e-7));
  CHECK(H.yy == doctest::Approx(gy.y).epsilon(1e-7));
}

TEST_CASE("the profile is the graph of the arc") {
  const ProfileCurve prof;
  for (int i = 1; i < 200; ++i) {
    const double th = kPi / 4 + kPi / 2 * i / 200.0;
    const Vec2 p = gamma1_point(th);
    CHECK(prof.eval(p.x).phi == doctest::Approx(p.y).epsilon(1e-11));
    CHECK(prof.theta_of(p.x) == doctest::Approx(th).epsilon(1e-10));
  }
}

TEST_CASE("phi is even and convex, and its derivatives are consistent") {
  const ProfileCurve prof;
  const double eps = 1e-5;
  for (double s : {-0.9, -0.5, -0.1, 0.2, 0.6, 0.95}) {
    const PhiValue a = prof.eval(s);
    const PhiValue b = prof.eval(-s);
    CHECK(a.phi == doctest::Approx(b.phi).epsilon(1e-13));
    CHECK(a.d1 == doctest::Approx(-b.d1).epsilon(1e-12));
    CHECK(a.d2 > 0.0);
    const double d1_fd = (prof.eval(s + eps).phi - prof.eval(s - eps).phi) / (2 * eps);
    const double d2_fd = (prof.eval(s + eps).d1 - prof.eval(s - eps).d1) / (2 * eps);
    const double d3_fd = (prof.eval(s + eps).d2 - prof.eval(s - eps).d2) / (2 * eps);
    CHECK(a.d1 == doctest::Approx(d1_fd).epsilon(1e-8));
    CHECK(a.d2 == doctest::Approx(d2_fd).epsilon(1e-7));
    CHECK(a.d3 == doctest::Approx(d3_fd).epsilon(1e-5));
  }
}

TEST_CASE("curvature from the normal-angle speed") {
  // For a curve parametrized by its normal angle, |kappa| = 1 / |dp/dtheta|.
  const double eps = 1e-6;
  for (int i = 1; i < 100; ++i) {
    const double th = kPi / 4 + kPi / 2 * i / 100.0;
    if (std::abs(th - kPi / 2) < 1e-9) continue;
    const double speed = norm(gamma1_point(th + eps) - gamma1_point(th - eps)) / (2 * eps);
    const double expected = std::sqrt(2.0) / 3.0 / std::abs(std::cos(2 * th));
    CHECK(std::abs(parametric_curvature(th)) == doctest::Approx(1.0 / speed).epsilon(1e-6));
    CHECK(std::abs(parametric_curvature(th)) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(curvature_residual(kPi / 3) <= 1e-9);
}

TEST_CASE("series branch and grid branch agree near the switch") {
  const ProfileCurve prof;
  const double r = std::sqrt(prof.series_switch());
  const PhiValue a = ProfileCurve::series_at_r(r);
  const PhiValue b = prof.eval(1.0 - r * r);
  CHECK(a.phi == doctest::Approx(b.phi).epsilon(1e-12));
  CHECK(a.d1 == doctest::Approx(b.d1).epsilon(1e-10));
  CHECK(a.d2 == doctest::Approx(b.d2).epsilon(1e-8));
}

TEST_CASE("endpoint expansion coefficients") {
  const ProfileCurve prof;
  const ExpansionFit fit = prof.expansion_check();
  CHECK(fit.d1_rel_dev <= 0.02);
  CHECK(fit.d2_rel_dev <= 0.02);
  CHECK(fit.d3_rel_dev <= 0.05);
  // phi'' r stays bounded: finite scaled second derivative at the endpoint.
  CHECK(std::isfinite(prof.scaled_d2(1.0)));
  CHECK(prof.scaled_d2(1.0) > 0.0);
}
