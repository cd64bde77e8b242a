#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "degenlab/support_data.hpp"

using namespace degenlab;

namespace {

const OneDConstruction& oned() {
  static const OneDConstruction c(std::make_shared<const ProfileCurve>(),
                                  build_eta(0.01, ProfileCurve()));
  return c;
}

}  // namespace

TEST_CASE("theta derivatives match finite differences along the arc") {
  for (double r : {0.2, 0.5, 0.8}) {
    const double dr = 1e-6;
    const SupportPoint a = support_point(oned(), r - dr, 1, 0);
    const SupportPoint b = support_point(oned(), r + dr, 1, 0);
    const SupportPoint m = support_point(oned(), r, 1, 0);
    const double dth = b.theta - a.theta;
    CHECK(norm((b.p - a.p) * (1.0 / dth) - m.dp) <= 1e-6 * (1.0 + norm(m.dp)));
    CHECK(norm((b.v - a.v) * (1.0 / dth) - m.dv) <= 1e-5 * (1.0 + norm(m.dv)));
    // Tangency: dg/dtheta = v . dp/dtheta.
    CHECK((b.g - a.g) / dth == doctest::Approx(dot(m.v, m.dp)).epsilon(1e-6));
  }
}

TEST_CASE("arcs are quarter rotations of the top arc") {
  const SupportPoint top = support_point(oned(), 0.4, 1, 0);
  for (int arc = 1; arc < 4; ++arc) {
    const SupportPoint q = support_point(oned(), 0.4, 1, arc);
    Vec2 p = top.p, v = top.v;
    for (int i = 0; i < arc; ++i) {
      p = {p.y, -p.x};
      v = {v.y, -v.x};
    }
    CHECK(norm(q.p - p) <= 1e-15);
    CHECK(norm(q.v - v) <= 1e-15);
    CHECK(q.g == top.g);
  }
}

TEST_CASE("build_support sizes and ordering") {
  const auto pts = build_support(oned(), 256);
  CHECK(pts.size() == 4 * 256);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].arc == pts[i - 1].arc) CHECK(pts[i].theta > pts[i - 1].theta);
  }
  CHECK_THROWS_AS(build_support(oned(), 10), DomainError);
}

TEST_CASE("H equals the ratio of second differences") {
  for (auto [x, y] : {std::pair{0.1, 0.6}, {0.5, 0.9}, {0.0, 0.99}}) {
    const HResult r = h_quantity(oned(), x, y);
    CHECK(r.raw == doctest::Approx(r.weight * r.H).epsilon(1e-10));
    // Oracle weight: trapezoid of phi''(s)(y - s) in t = (1 - s)^{1/2}.
    const auto& prof = oned().profile();
    const int n = 20000;
    const double lo = std::min(x, y), hi = std::max(x, y);
    const double t0 = std::sqrt(1.0 - hi), t1 = std::sqrt(1.0 - lo);
    double w = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = t0 + (t1 - t0) * i / n;
      const double s = 1.0 - t * t;
      const double val = prof.eval(s).d2 * std::abs(y - s) * 2.0 * t;
      w += (i == 0 || i == n ? 0.5 : 1.0) * val;
    }
    w *= (t1 - t0) / n;
    CHECK(std::abs(r.weight) == doctest::Approx(w).epsilon(1e-6));
  }
}

TEST_CASE("hbound scan is positive and matches serial") {
  const HBoundResult par = hbound_scan(oned(), 100, Exec::kParallel);
  const HBoundResult ser = hbound_scan(oned(), 100, Exec::kSerial);
  CHECK(par.c0 > 0.0);
  CHECK(par.c0 == ser.c0);
  for (std::size_t i = 0; i < par.ratio.size(); ++i) {
    if (std::isnan(par.ratio[i])) continue;
    CHECK(par.ratio[i] == ser.ratio[i]);
  }
}

TEST_CASE("reflection margins are positive") {
  const ReflectionMargins m = reflection_check(oned(), 2000);
  CHECK(m.axis_min > 0.0);
  CHECK(m.diagonal_min > 0.0);
  CHECK(m.plateau_min > 0.0);
  CHECK(m.endpoint_min > 0.0);
}

TEST_CASE("tangential separation: sampled minimum bounds the exhaustive one") {
  const auto pts = build_support(oned(), 200);
  const TangsepResult ex = tangsep_scan(pts, 0, 7, Exec::kSerial);
  CHECK(ex.exhaustive);
  CHECK(ex.gamma > 0.0);
  // Brute force oracle on a subset.
  double brute = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); i += 7)
    for (std::size_t j = 0; j < pts.size(); j += 5) {
      if (i == j) continue;
      const Vec2 d = pts[j].p - pts[i].p;
      if (norm2(d) == 0.0) continue;
      brute = std::min(brute, (pts[j].g - pts[i].g - dot(pts[i].v, d)) / norm2(d));
    }
  CHECK(ex.gamma <= brute + 1e-12);
  const TangsepResult a = tangsep_scan(pts, 0, 7, Exec::kParallel);
  CHECK(a.gamma == ex.gamma);
}
