#include <doctest.h>

#include <cmath>
#include <random>

#include "degenlab/reduced_minimizer.hpp"
#include "degenlab/rng.hpp"

using namespace degenlab;

TEST_CASE("mesh weights integrate (r1 r2)^k over the quarter disk") {
  // int_0^1 r^{2k+1} dr * int_0^{pi/2} (cos t sin t)^k dt.
  const QuarterDiskMesh m1 = build_quarter_disk_mesh(1.0 / 64, 1);
  double w = 0.0;
  for (double x : m1.weights) w += x;
  CHECK(w == doctest::Approx(1.0 / 8.0).epsilon(2e-3));
  const QuarterDiskMesh m2 = build_quarter_disk_mesh(1.0 / 64, 2);
  w = 0.0;
  for (double x : m2.weights) w += x;
  CHECK(w == doctest::Approx((1.0 / 6.0) * (kPi / 16.0)).epsilon(3e-3));
}

TEST_CASE("mesh mirror map is an involution across the diagonal") {
  const QuarterDiskMesh m = build_quarter_disk_mesh(1.0 / 16, 1);
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const int j = m.mirror[i];
    CHECK(m.mirror[j] == static_cast<int>(i));
    CHECK(m.nodes[j].x == doctest::Approx(m.nodes[i].y).epsilon(1e-14));
    CHECK(m.nodes[j].y == doctest::Approx(m.nodes[i].x).epsilon(1e-14));
  }
}

TEST_CASE("energy gradient matches differences") {
  const QuarterDiskMesh m = build_quarter_disk_mesh(1.0 / 8, 1);
  const ReducedEnergy E(m, control_integrand());
  std::vector<double> u = interpolant_of_v(m);
  auto rng = block_rng(31, 0);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.1 * (uniform01(rng) - 0.5);
  std::vector<double> g;
  E.value_and_gradient(u, g);
  for (std::size_t i = 0; i < u.size(); i += 7) {
    auto up = u, um = u;
    up[i] += 1e-6;
    um[i] -= 1e-6;
    CHECK(g[i] == doctest::Approx((E.value(up) - E.value(um)) / 2e-6).epsilon(1e-6));
  }
  CHECK(E.value(u, Exec::kSerial) == E.value(u, Exec::kParallel));
}

TEST_CASE("prolongation reproduces fields linear in |r|") {
  const QuarterDiskMesh coarse = build_quarter_disk_mesh(1.0 / 8, 1);
  const QuarterDiskMesh fine = build_quarter_disk_mesh(1.0 / 32, 1);
  std::vector<double> u(coarse.nodes.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = 2.0 * norm(coarse.nodes[i]) - 1.0;
  const auto uf = prolongate(coarse, u, fine);
  const auto vf = interpolant_of_v(fine);
  for (std::size_t i = 0; i < uf.size(); ++i) {
    if (fine.on_arc[i]) {
      CHECK(uf[i] == doctest::Approx(vf[i]));
    } else {
      CHECK(uf[i] == doctest::Approx(2.0 * norm(fine.nodes[i]) - 1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("control problem: Newton and gradient descent agree") {
  const QuarterDiskMesh m = build_quarter_disk_mesh(1.0 / 16, 1);
  const ReducedEnergy E(m, control_integrand());
  MinimizeOptions o;
  o.tol = 1e-9;
  const MinimizeResult a = minimize(E, boundary_only_field(m), o);
  o.method = Optimizer::kGradientDescent;
  o.tol = 1e-7;
  o.max_iter = 20000;
  const MinimizeResult b = minimize(E, interpolant_of_v(m), o);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(a.monotone);
  CHECK(b.energy == doctest::Approx(a.energy).epsilon(1e-6));
  CHECK(field_difference(m, a.u, b.u).weighted_rms <= 1e-4);
  // Arc values are fixed.
  const auto v = interpolant_of_v(m);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (m.on_arc[i]) CHECK(a.u[i] == v[i]);
}

TEST_CASE("field difference") {
  const QuarterDiskMesh m = build_quarter_disk_mesh(1.0 / 8, 1);
  std::vector<double> a(m.nodes.size(), 0.0), b(m.nodes.size(), 0.25);
  const FieldDifference d = field_difference(m, a, b);
  CHECK(d.sup == 0.25);
  CHECK(d.weighted_rms == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("point set diameter against brute force") {
  std::mt19937_64 rng(4);
  std::vector<Vec2> pts(300);
  for (auto& p : pts) p = {uniform01(rng), uniform01(rng) * 0.3};
  double brute = 0.0;
  for (const auto& p : pts)
    for (const auto& q : pts) brute = std::max(brute, norm(p - q));
  CHECK(point_set_diameter(pts) == doctest::Approx(brute).epsilon(1e-15));
  CHECK(point_set_diameter({{1.0, 2.0}}) == 0.0);
}

TEST_CASE("localization rejects radii below three cells") {
  const QuarterDiskMesh m = build_quarter_disk_mesh(1.0 / 16, 1);
  const ReducedEnergy E(m, control_integrand());
  CHECK_THROWS_AS(localization_diagnostic(E, interpolant_of_v(m), {0.1}), DomainError);
  const auto pts = localization_diagnostic(E, interpolant_of_v(m), {0.5});
  CHECK(pts.front().elements > 0);
}
