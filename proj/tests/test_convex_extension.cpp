#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "degenlab/convex_extension.hpp"
#include "degenlab/rng.hpp"

using namespace degenlab;

namespace {

struct Fixture {
  OneDConstruction oned{std::make_shared<const ProfileCurve>(), build_eta(0.01, ProfileCurve())};
  std::vector<SupportPoint> pts = build_support(oned, 1000);
  double gamma_emp = tangsep_scan(pts, 200000, 3).gamma;
  ParaboloidEnvelope env{pts, 0.5 * gamma_emp, gamma_emp};
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("envelope rejects gamma_tilde outside (0, gamma_emp)") {
  CHECK_THROWS_AS(ParaboloidEnvelope(fx().pts, fx().gamma_emp, fx().gamma_emp), ConstructionError);
  CHECK_THROWS_AS(ParaboloidEnvelope(fx().pts, 0.0, fx().gamma_emp), ConstructionError);
}

TEST_CASE("envelope interpolates the data at held-out points") {
  const auto held = build_support(fx().oned, 1000, 0.5);
  double ve = 0.0, ge = 0.0;
  for (const auto& p : held) {
    const EnvelopeEval e = fx().env.eval(p.p);
    ve = std::max(ve, std::abs(e.value - p.g));
    ge = std::max(ge, norm(e.grad - p.v));
  }
  CHECK(ve <= 1e-4);
  CHECK(ge <= 1e-2);
}

TEST_CASE("gradient matches central differences away from ridges") {
  auto rng = block_rng(11, 0);
  int tested = 0, eligible = 0;
  for (int i = 0; i < 400; ++i) {
    const Vec2 x{3.0 * uniform01(rng) - 1.5, 3.0 * uniform01(rng) - 1.5};
    const EnvelopeEval e = fx().env.eval(x);
    if (e.ridge || std::abs(std::abs(x.x) - std::abs(x.y)) < 1e-3 || std::abs(x.x) < 1e-3 ||
        std::abs(x.y) < 1e-3)
      continue;
    ++eligible;
    const double eps = 1e-6;
    const Vec2 fd{(fx().env.value({x.x + eps, x.y}) - fx().env.value({x.x - eps, x.y})) / (2 * eps),
                  (fx().env.value({x.x, x.y + eps}) - fx().env.value({x.x, x.y - eps})) / (2 * eps)};
    // Stencils straddling a ridge are not counted.
    if (norm(fd - e.grad) <= 1e-4) ++tested;
  }
  CHECK(eligible > 300);
  CHECK(tested >= 0.95 * eligible);
}

TEST_CASE("supporting planes lie below G") {
  // Convexity oracle: G(y) >= G(x) + grad G(x).(y - x).
  auto rng = block_rng(12, 0);
  for (int i = 0; i < 3000; ++i) {
    const Vec2 x{4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0};
    const Vec2 y{4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0};
    const EnvelopeEval e = fx().env.eval(x);
    CHECK(fx().env.value(y) >= e.value + dot(e.grad, y - x) - 1e-10);
  }
}

TEST_CASE("convexity certificate: serial and parallel agree") {
  const auto a = convexity_certificate(fx().env, 20000, 2.0, 5, Exec::kSerial);
  const auto b = convexity_certificate(fx().env, 20000, 2.0, 5, Exec::kParallel);
  CHECK(a.min_margin == b.min_margin);
  CHECK(a.min_margin >= -1e-12);
}

TEST_CASE("dihedral symmetry is exact") {
  auto rng = block_rng(13, 0);
  for (int i = 0; i < 500; ++i) {
    const double a = 4.0 * uniform01(rng) - 2.0, b = 4.0 * uniform01(rng) - 2.0;
    const double g = fx().env.value({a, b});
    CHECK(fx().env.value({-a, b}) == g);
    CHECK(fx().env.value({a, -b}) == g);
    CHECK(fx().env.value({b, a}) == g);
    CHECK(fx().env.value({-b, -a}) == g);
  }
}

TEST_CASE("lifted integrand gradient") {
  const LiftedIntegrand F(fx().env, 1);
  const double q[4] = {0.3, -0.4, 0.7, 0.2};
  double g[4];
  F.eval(q, g);
  const double eps = 1e-6;
  for (int i = 0; i < 4; ++i) {
    double qp[4], qm[4];
    std::copy(q, q + 4, qp);
    std::copy(q, q + 4, qm);
    qp[i] += eps;
    qm[i] -= eps;
    CHECK(g[i] == doctest::Approx((F.value(qp) - F.value(qm)) / (2 * eps)).epsilon(1e-5));
  }
  // F depends on the block norms only.
  const double r[4] = {0.5, 0.0, 0.0, std::hypot(0.7, 0.2)};
  CHECK(F.value(r) == doctest::Approx(F.value(q)).epsilon(1e-14));
}
