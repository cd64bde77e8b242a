#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <memory>

#include "degenlab/common.hpp"
#include "degenlab/eta_builder.hpp"

using namespace degenlab;

namespace {

std::shared_ptr<const ProfileCurve> profile() {
  static const auto p = std::make_shared<const ProfileCurve>();
  return p;
}

// Independent quadrature of int_0^1 eta phi'' ds. With s = 1 - t^2 the
// integrand 2 eta (t phi'') is smooth; split at the kink of eta.
double oracle_integral(const EtaConfig& cfg) {
  boost::math::quadrature::tanh_sinh<double> q;
  auto g = [&](double t) { return 2.0 * cfg.eta_at_r(t) * profile()->scaled_d2_at_r(t); };
  const double tc = std::sqrt(1.0 - cfg.crossing());
  return q.integrate(g, 0.0, tc, 1e-14) + q.integrate(g, tc, 1.0, 1e-14);
}

}  // namespace

TEST_CASE("mu normalizes the weighted integral") {
  for (double delta : {0.1, 0.05, 0.01}) {
    const EtaConfig cfg = build_eta(delta, *profile());
    CHECK(std::abs(oracle_integral(cfg) - 1.0) <= 1e-8);
    CHECK(std::abs(eta_phi2_integral(cfg, *profile()) - 1.0) <= 1e-10);
  }
}

TEST_CASE("mu decreases with delta") {
  const double m1 = build_eta(0.1, *profile()).mu;
  const double m2 = build_eta(0.05, *profile()).mu;
  const double m3 = build_eta(0.01, *profile()).mu;
  CHECK(m1 > m2);
  CHECK(m2 > m3);
  CHECK(m3 > 0.0);
}

TEST_CASE("delta = 0.5 cannot be bracketed") {
  CHECK_THROWS_AS(build_eta(0.5, *profile()), ConstructionError);
  CHECK_THROWS_AS(build_eta(0.0, *profile()), ConstructionError);
}

TEST_CASE("eta shape") {
  const EtaConfig cfg = build_eta(0.01, *profile());
  CHECK(cfg.eta(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cfg.eta(0.0) == doctest::Approx(1.0 + cfg.mu));
  CHECK(cfg.plateau_end() >= 1.0 - 0.01);
  // Concave: midpoint values dominate chords.
  for (int i = 0; i < 200; ++i) {
    const double a = -1.0 + 2.0 * i / 200.0, b = a + 0.01;
    CHECK(cfg.eta(0.5 * (a + b)) >= 0.5 * (cfg.eta(a) + cfg.eta(b)) - 1e-15);
    CHECK(cfg.eta(a) == cfg.eta(-a));
  }
}

TEST_CASE("f integrates eta phi''") {
  const OneDConstruction oned(profile(), build_eta(0.01, *profile()));
  CHECK(oned.f(0.0) == 0.0);
  CHECK(std::abs(oned.f_prime(0.0)) <= 1e-15);
  const double eps = 1e-5;
  for (double s : {0.1, 0.4, 0.7, 0.9, 0.99}) {
    const double fp_fd = (oned.f(s + eps) - oned.f(s - eps)) / (2 * eps);
    const double fpp_fd = (oned.f_prime(s + eps) - oned.f_prime(s - eps)) / (2 * eps);
    CHECK(oned.f_prime(s) == doctest::Approx(fp_fd).epsilon(1e-8));
    CHECK(fpp_fd == doctest::Approx(oned.eta(s) * oned.profile().eval(s).d2).epsilon(1e-6));
  }
  // f'(1) = int_0^1 eta phi'' = 1.
  CHECK(oned.f_prime(1.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("jet agrees with the scalar evaluators") {
  const OneDConstruction oned(profile(), build_eta(0.01, *profile()));
  for (double s : {0.0, 0.3, 0.8, 0.999}) {
    const OneDJet j = oned.jet(s);
    CHECK(j.f == doctest::Approx(oned.f(s)).epsilon(1e-13));
    CHECK(j.fp == doctest::Approx(oned.f_prime(s)).epsilon(1e-13));
    CHECK(j.h == doctest::Approx(oned.h(s)).epsilon(1e-13));
    const OneDJet jr = oned.jet_at_r(std::sqrt(1.0 - s));
    CHECK(jr.h == doctest::Approx(j.h).epsilon(1e-10));
  }
}

TEST_CASE("margins and junction") {
  const OneDConstruction oned(profile(), build_eta(0.01, *profile()));
  const EtaMargins m = oned.margins();
  CHECK(m.concavity_margin >= 0.0);
  CHECK(m.lower_bound_margin >= 0.0);
  CHECK(m.plateau_margin >= 0.0);
  CHECK(m.integral_error <= 1e-8);
  // At s = 1 the datum is parallel to (1, 1).
  const Vec2 t = oned.tangent_vector(1.0);
  CHECK(std::abs(cross(t, {1.0, 1.0})) <= 1e-8);
  for (int i = 0; i <= 100; ++i) CHECK(oned.h(i / 100.0) < 0.75);
}
