#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "degenlab/el_verifier.hpp"
#include "degenlab/rng.hpp"

using namespace degenlab;

namespace {

const OneDConstruction& oned() {
  static const OneDConstruction c(std::make_shared<const ProfileCurve>(),
                                  build_eta(0.01, ProfileCurve()));
  return c;
}

std::vector<double> random_point(std::mt19937_64& rng, int dim, double scale) {
  std::vector<double> y(dim);
  for (auto& c : y) c = scale * (2.0 * uniform01(rng) - 1.0);
  return y;
}

}  // namespace

TEST_CASE("identity residual vanishes and reacts to h") {
  for (double s : {0.05, 0.3, 0.6, 0.9, 0.99}) {
    const IdentityResidual r = reduced_identity_residual(oned(), s);
    CHECK(std::abs(r.residual) <= 1e-10);
    CHECK(std::abs(reduced_identity_residual(oned(), s, 1e-3).residual) > 1e-5);
  }
  CHECK_THROWS_AS(reduced_identity_residual(oned(), 0.0), DomainError);
  CHECK_THROWS_AS(reduced_identity_residual(oned(), 0.9995), DomainError);
}

TEST_CASE("profile curvature from an independent graph formula") {
  // Curvature of the graph (s, phi(s)) and of the rotation circles.
  const double s = 0.4;
  const PhiValue p = oned().profile().eval(s);
  const double q = std::sqrt(1.0 + p.d1 * p.d1);
  const IdentityResidual r = reduced_identity_residual(oned(), s);
  CHECK(r.curvature[0] == doctest::Approx(-p.d2 / (q * q * q)).epsilon(1e-12));
  CHECK(std::abs(r.curvature[2]) == doctest::Approx(1.0 / (p.phi * q)).epsilon(1e-12));
}

TEST_CASE("reduced Euler-Lagrange balance") {
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double th = kPi / 4 + 1e-3 + (kPi / 4 - 1e-3) * i / 200.0;
    worst = std::max(worst, std::abs(reduced_el_residual(oned(), th).residual));
  }
  CHECK(worst <= 1e-8);
  const ReducedELTerms t = reduced_el_residual(oned(), kPi / 3);
  CHECK(std::abs(t.tangential) >= 1e-3);
  CHECK(std::abs(t.radial) >= 1e-3);
  CHECK_THROWS_AS(reduced_el_residual(oned(), kPi / 4), DomainError);
}

TEST_CASE("w gradient matches differences and has zero-homogeneous gradient") {
  auto rng = block_rng(21, 0);
  for (int k : {1, 2}) {
    const int dim = 2 * k + 2;
    for (int i = 0; i < 50; ++i) {
      auto y = random_point(rng, dim, 1.0);
      std::vector<double> g(dim);
      w_gradient(y.data(), k, g.data());
      for (int c = 0; c < dim; ++c) {
        auto yp = y, ym = y;
        yp[c] += 1e-6;
        ym[c] -= 1e-6;
        CHECK(g[c] == doctest::Approx((w_value(yp.data(), k) - w_value(ym.data(), k)) / 2e-6)
                          .epsilon(1e-6));
      }
    }
  }
  CHECK(one_homogeneity_check(1, 2000, 3) <= 1e-14);
  const SaddleCheck sc = saddle_check(1, 300, 4);
  CHECK(sc.mixed == sc.points);
}

TEST_CASE("PolyBump gradient and support") {
  std::mt19937_64 rng(5);
  for (bool sym : {false, true}) {
    const PolyBump psi = PolyBump::random(1, rng, sym);
    auto r = block_rng(22, sym);
    for (int i = 0; i < 30; ++i) {
      auto y = random_point(r, 4, 0.5);
      std::vector<double> g(4);
      const double val = psi.gradient(y.data(), g.data());
      CHECK(val == doctest::Approx(psi.value(y.data())));
      for (int c = 0; c < 4; ++c) {
        auto yp = y, ym = y;
        yp[c] += 1e-6;
        ym[c] -= 1e-6;
        CHECK(g[c] == doctest::Approx((psi.value(yp.data()) - psi.value(ym.data())) / 2e-6)
                          .epsilon(1e-6));
      }
    }
    const double edge[4] = {1.0, 0.0, 0.0, 0.0};
    CHECK(psi.value(edge) == 0.0);
  }
}

TEST_CASE("block-symmetric bumps are invariant under block rotations") {
  std::mt19937_64 rng(6);
  const PolyBump psi = PolyBump::random(1, rng, true);
  const double a[4] = {0.3, 0.4, 0.1, -0.2};
  const double b[4] = {0.5, 0.0, std::hypot(0.1, 0.2), 0.0};
  CHECK(psi.value(a) == doctest::Approx(psi.value(b)).epsilon(1e-13));
}

TEST_CASE("weak form: radial test is within noise and sigma scales as N^-1/2") {
  std::vector<PolyBump> tests = {PolyBump::radial(1)};
  McOptions small{20000, 9, 64, Exec::kParallel};
  McOptions large{80000, 9, 64, Exec::kParallel};
  const McEstimate a = weak_form_residual(oned(), tests, small).front();
  const McEstimate b = weak_form_residual(oned(), tests, large).front();
  CHECK(a.finite);
  CHECK(std::abs(b.estimate) <= 4.0 * b.sigma);
  const double ratio = (a.sigma * std::sqrt(20000.0)) / (b.sigma * std::sqrt(80000.0));
  CHECK(ratio > 0.5);
  CHECK(ratio < 2.0);
}

TEST_CASE("weak form: serial and parallel give identical numbers") {
  std::mt19937_64 rng(8);
  std::vector<PolyBump> tests = {PolyBump::random(1, rng, false)};
  McOptions o{20000, 10, 64, Exec::kSerial};
  const McEstimate a = weak_form_residual(oned(), tests, o).front();
  o.exec = Exec::kParallel;
  const McEstimate b = weak_form_residual(oned(), tests, o).front();
  CHECK(a.estimate == b.estimate);
  CHECK(a.sigma == b.sigma);
}

TEST_CASE("weak form estimate does not depend on the stratification") {
  std::vector<PolyBump> tests = {PolyBump::radial(1)};
  const McEstimate a = weak_form_residual(oned(), tests, {50000, 12, 1, Exec::kParallel}).front();
  const McEstimate b = weak_form_residual(oned(), tests, {50000, 12, 64, Exec::kParallel}).front();
  CHECK(std::abs(a.estimate - b.estimate) <= 4.0 * std::hypot(a.sigma, b.sigma));
}

TEST_CASE("lifted flux is the planar flux on block norms") {
  const double y[4] = {0.3, 0.4, -0.6, 0.8};
  double out[4];
  flux_lift(oned(), y, 1, out);
  const Vec2 planar = flux_2d(oned(), 0.5, 1.0);
  CHECK(out[0] == doctest::Approx(planar.x * 0.6).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(planar.x * 0.8).epsilon(1e-12));
  CHECK(out[2] == doctest::Approx(planar.y * -0.6).epsilon(1e-12));
  CHECK(out[3] == doctest::Approx(planar.y * 0.8).epsilon(1e-12));
  // On the unit circle the flux is the tangency datum at grad v.
  for (double th : {0.9, 1.1, 1.3, 1.5}) {
    const Vec2 x{std::cos(th), std::sin(th)};
    const double s_par = grad_v2d(x).x;
    Vec2 datum = oned().tangent_vector(std::abs(s_par));
    if (s_par < 0.0) datum.x = -datum.x;
    CHECK(norm(flux_2d(oned(), x.x, x.y) - datum) <= 1e-10);
    CHECK(norm(flux_2d(oned(), 3.0 * x.x, 3.0 * x.y) - datum) <= 1e-10);
  }
}
