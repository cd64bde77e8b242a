#include "degenlab/support_data.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <tuple>

#include "degenlab/quadrature.hpp"
#include "degenlab/rng.hpp"

namespace degenlab {

SupportPoint support_point(const OneDConstruction& oned, double r, int sign,
                           int arc) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("support_point: r outside [0, 1]");
  const OneDJet j = oned.jet_at_r(r);
  const double d1 = j.phi.d1;
  // p1'(theta) / r, finite at the cusp where p1'(theta) -> 0.
  const double dp1_r = (1.0 + d1 * d1) / j.scaled_phi2;
  const double dp1 = r * dp1_r;
  const double dv1_r = (j.eta - j.h) * j.scaled_phi2 - j.scaled_dh * d1;
  const double dv2_r = j.scaled_dh;

  SupportPoint pt;
  pt.arc = arc & 3;
  pt.s = j.s;
  pt.theta = std::atan2(1.0, -d1);
  pt.p = {j.s, j.phi.phi};
  pt.g = j.f;
  pt.v = {j.fp - j.h * d1, j.h};
  pt.dp = {dp1, d1 * dp1};
  pt.dv = {dv1_r * dp1_r, dv2_r * dp1_r};
  pt.dv_next = pt.dv;
  if (sign < 0) {
    pt.s = -pt.s;
    pt.theta = kPi - pt.theta;
    pt.p.x = -pt.p.x;
    pt.v.x = -pt.v.x;
    pt.dp.y = -pt.dp.y;
    pt.dv.y = -pt.dv.y;
    pt.dv_next.y = -pt.dv_next.y;
  }
  pt.p = rotate_quarter(pt.p, arc);
  pt.v = rotate_quarter(pt.v, arc);
  pt.dp = rotate_quarter(pt.dp, arc);
  pt.dv = rotate_quarter(pt.dv, arc);
  pt.dv_next = rotate_quarter(pt.dv_next, arc);
  return pt;
}

std::vector<SupportPoint> build_support(const OneDConstruction& oned, int n_per_arc,
                                        double offset) {
  if (n_per_arc < 64) throw DomainError("build_support: n_per_arc must be >= 64");
  if (!(offset >= 0.0 && offset < 1.0)) throw DomainError("build_support: offset outside [0, 1)");
  const int n = n_per_arc;
  const int first = offset == 0.0 ? 1 : 0;
  // The top-arc samples, computed once and rotated onto the other arcs.
  auto r_of = [n](double q) {
    return 2.0 * q == n ? 1.0 : std::min(1.0, kSqrt2 * std::sin(kPi * q / (2.0 * n)));
  };
  // On the node grid, the sample nearest each kink of eta moves onto it and
  // carries one-sided derivatives.
  std::vector<std::pair<double, double>> snaps;  // (q, r)
  if (offset == 0.0) {
    for (double b : oned.eta_config().breakpoints()) {
      if (!(b > 0.0 && b < 1.0)) continue;
      const double rb = std::sqrt(1.0 - b);
      const double qb = std::round(2.0 * n / kPi * std::asin(std::min(1.0, rb / kSqrt2)));
      if (qb >= 1.0 && 2.0 * qb < n) snaps.emplace_back(qb, rb);
    }
  }
  std::vector<SupportPoint> top(static_cast<std::size_t>(n));
  for (int idx = 0; idx < n; ++idx) {
    const double jj = first + idx + offset;
    // Distance index to the nearer endpoint keeps the set mirror-exact.
    const bool positive = 2.0 * jj > n;
    const int sign = positive ? 1 : -1;
    const double q = positive ? n - jj : jj;
    auto& pt = top[static_cast<std::size_t>(idx)];
    const auto snap = std::find_if(snaps.begin(), snaps.end(),
                                   [q](const auto& sq) { return sq.first == q; });
    if (snap == snaps.end()) {
      pt = support_point(oned, r_of(q), sign, 0);
      continue;
    }
    const double rb = snap->second;
    pt = support_point(oned, rb, sign, 0);
    const Vec2 outer = support_point(oned, rb * (1.0 + 1e-12), sign, 0).dv;
    const Vec2 inner = support_point(oned, rb * (1.0 - 1e-12), sign, 0).dv;
    // theta grows toward s = 1, so toward smaller r on the positive side.
    pt.dv = positive ? outer : inner;
    pt.dv_next = positive ? inner : outer;
  }
  std::vector<SupportPoint> out;
  out.reserve(4 * top.size());
  for (int m = 0; m < 4; ++m) {
    for (SupportPoint pt : top) {
      pt.arc = m;
      pt.p = rotate_quarter(pt.p, m);
      pt.v = rotate_quarter(pt.v, m);
      pt.dp = rotate_quarter(pt.dp, m);
      pt.dv = rotate_quarter(pt.dv, m);
      pt.dv_next = rotate_quarter(pt.dv_next, m);
      out.push_back(pt);
    }
  }
  return out;
}

namespace {

double h_limit_from_jet(const OneDJet& j, int k) {
  const double c = 1.0 + 2.0 * k;
  return (2.0 * k / c) * (j.eta - 0.5) - (k / c) * (j.ratio - 1.0);
}

// Breakpoints of the integrands, in t.
std::vector<double> t_breaks(const OneDConstruction& oned) {
  std::vector<double> out;
  for (double b : oned.eta_config().breakpoints()) {
    if (b > 0.0 && b < 1.0) out.push_back(std::sqrt(1.0 - b));
  }
  return out;
}

HResult h_quantity_impl(const OneDConstruction& oned, const OneDJet& jx,
                        double tx, double ty, const std::vector<double>& breaks) {
  const int k = oned.k();
  HResult res;
  res.x = jx.s;
  res.y = 1.0 - ty * ty;
  const double scale = std::max(tx, ty);
  if (std::abs(tx * tx - ty * ty) < 1e-6) {
    res.H = h_limit_from_jet(jx, k);
    res.ratio = res.H / scale;
    return res;
  }
  const ProfileCurve& profile = oned.profile();
  const EtaConfig& cfg = oned.eta_config();
  // ds phi''(s) (y - s) = 2 (r phi'')(t) (t - ty)(t + ty) dt over t in [ty, tx].
  auto kernel = [&](double t) {
    return 2.0 * profile.scaled_d2_at_r(t) * (t - ty) * (t + ty);
  };
  const double lo = std::min(tx, ty), hi = std::max(tx, ty);
  std::vector<double> cuts{lo};
  for (double b : breaks) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  cuts.push_back(hi);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    num += integrate([&](double t) { return (cfg.eta_at_r(t) - 0.5) * kernel(t); },
                     cuts[i], cuts[i + 1], 1e-12, 1e-300).value;
    den += integrate(kernel, cuts[i], cuts[i + 1], 1e-12, 1e-300).value;
  }
  if (tx < ty) {
    num = -num;
    den = -den;
  }
  const double c = 1.0 + 2.0 * k;
  res.weight = den;
  res.H = num / den - (jx.eta - 0.5) / c - (k / c) * (jx.ratio - 1.0);
  res.ratio = res.H / scale;
  const OneDJet jy = oned.jet_at_r(ty);
  const double dx = tx * tx - ty * ty;  // y - x
  const double fdiff = jy.f - jx.f - jx.fp * dx;
  const double pdiff = jy.phi.phi - jx.phi.phi - jx.phi.d1 * dx;
  res.raw = fdiff - jx.h * pdiff;
  return res;
}

}  // namespace

double h_limit(const OneDConstruction& oned, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("h_limit: x outside [0, 1]");
  return h_limit_from_jet(oned.jet(x), oned.k());
}

HResult h_quantity_t(const OneDConstruction& oned, double tx, double ty) {
  if (!(tx >= 0.0 && tx <= 1.0 && ty >= 0.0 && ty <= 1.0)) {
    throw DomainError("h_quantity: abscissa outside [0, 1]");
  }
  return h_quantity_impl(oned, oned.jet_at_r(tx), tx, ty, t_breaks(oned));
}

HResult h_quantity(const OneDConstruction& oned, double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
    throw DomainError("h_quantity: abscissa outside [0, 1]");
  }
  HResult r = h_quantity_t(oned, std::sqrt(1.0 - x), std::sqrt(1.0 - y));
  r.x = x;
  r.y = y;
  return r;
}

HBoundResult hbound_scan(const OneDConstruction& oned, int n, Exec exec) {
  if (n < 100) throw DomainError("hbound_scan: grid_n must be >= 100");
  HBoundResult out;
  out.n = n;
  out.t_grid.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.t_grid[i] = static_cast<double>(i) / (n - 1);
  std::vector<OneDJet> jets(out.t_grid.size());
  for (int i = 0; i < n; ++i) jets[i] = oned.jet_at_r(out.t_grid[i]);
  const auto breaks = t_breaks(oned);
  out.ratio.assign(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> hvals(out.ratio.size(), std::numeric_limits<double>::quiet_NaN());

  const bool parallel = exec == Exec::kParallel;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == 0 && j == 0) continue;  // x = y = 1: H = 0 and the scale vanishes
      const HResult r = h_quantity_impl(oned, jets[i], out.t_grid[i], out.t_grid[j], breaks);
      out.ratio[static_cast<std::size_t>(i) * n + j] = r.ratio;
      hvals[static_cast<std::size_t>(i) * n + j] = r.H;
    }
  }

  out.c0 = INFINITY;
  out.plateau_min_H = INFINITY;
  const double t_plateau = std::sqrt(oned.eta_config().delta);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = out.ratio[static_cast<std::size_t>(i) * n + j];
      if (std::isnan(v)) continue;
      if (v < out.c0) {
        out.c0 = v;
        out.argmin_x = 1.0 - out.t_grid[i] * out.t_grid[i];
        out.argmin_y = 1.0 - out.t_grid[j] * out.t_grid[j];
      }
      if (out.t_grid[i] >= t_plateau && out.t_grid[j] >= t_plateau) {
        out.plateau_min_H = std::min(out.plateau_min_H, hvals[static_cast<std::size_t>(i) * n + j]);
      }
    }
  }
  return out;
}

ReflectionMargins reflection_check(const OneDConstruction& oned, int n) {
  if (n < 2) throw DomainError("reflection_check: grid too small");
  const int k = oned.k();
  const EtaConfig& cfg = oned.eta_config();
  const double phi2_0 = oned.profile().eval(0.0).d2;
  ReflectionMargins m;
  m.axis_min = m.diagonal_min = m.plateau_min = m.endpoint_min = INFINITY;
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    const OneDJet j = oned.jet(s);
    const double v1 = j.fp - j.h * j.phi.d1;
    const double vd = (1.0 + j.phi.d1) * j.h - j.fp;
    const double axis = i == 0 ? (cfg.plateau() - j.h) * phi2_0 : v1 / s;
    if (axis < m.axis_min) {
      m.axis_min = axis;
      m.axis_argmin = s;
    }
    if (i < n - 1) {  // the diagonal ratio diverges like (1 - s)^{-1} at s = 1
      const double diag = vd / (j.phi.phi - s);
      if (diag < m.diagonal_min) {
        m.diagonal_min = diag;
        m.diagonal_argmin = s;
      }
    }
    const double r = std::sqrt(1.0 - s);
    if (s <= 1.0 - cfg.delta) {
      m.plateau_min = std::min(m.plateau_min, (1.0 + j.phi.d1) * j.eta - j.fp);
    } else if (r > 0.0) {
      m.endpoint_min = std::min(m.endpoint_min, (1.0 + 2.0 * k) * vd / (0.5 * cfg.a * r));
    }
  }
  return m;
}

namespace {

struct Best {
  double ratio = INFINITY;
  std::size_t i = 0;
  std::size_t j = 0;

  void offer(double r, std::size_t a, std::size_t b) {
    if (std::tie(r, a, b) < std::tie(ratio, i, j)) {
      ratio = r;
      i = a;
      j = b;
    }
  }
  void merge(const Best& o) { offer(o.ratio, o.i, o.j); }
};

struct PairBests {
  Best all;
  Best same_arc;
  std::size_t pairs = 0;

  void merge(const PairBests& o) {
    all.merge(o.all);
    same_arc.merge(o.same_arc);
    pairs += o.pairs;
  }
};

inline void visit_pair(const std::vector<SupportPoint>& pts, std::size_t a,
                       std::size_t b, PairBests& acc) {
  const SupportPoint& p = pts[a];
  const SupportPoint& q = pts[b];
  const Vec2 d = q.p - p.p;
  const double d2 = norm2(d);
  if (d2 == 0.0) return;
  const double ratio = (q.g - p.g - dot(p.v, d)) / d2;
  ++acc.pairs;
  acc.all.offer(ratio, a, b);
  if (p.arc == q.arc) acc.same_arc.offer(ratio, a, b);
}

}  // namespace

TangsepResult tangsep_scan(const std::vector<SupportPoint>& points,
                           std::size_t n_pairs, std::uint64_t seed, Exec exec) {
  std::array<std::vector<std::size_t>, 4> by_arc;
  for (std::size_t i = 0; i < points.size(); ++i) by_arc[points[i].arc & 3].push_back(i);
  std::size_t max_arc = 0;
  for (const auto& a : by_arc) max_arc = std::max(max_arc, a.size());
  const bool parallel = exec == Exec::kParallel;
  const long n = static_cast<long>(points.size());

  PairBests total;
  TangsepResult res;
  res.exhaustive = max_arc <= 1500;
  if (res.exhaustive) {
#pragma omp parallel if (parallel)
    {
      PairBests local;
#pragma omp for schedule(static) nowait
      for (long a = 0; a < n; ++a) {
        for (long b = 0; b < n; ++b) {
          if (a != b) visit_pair(points, a, b, local);
        }
      }
#pragma omp critical
      total.merge(local);
    }
  } else {
    // Random pairs per arc combination, in fixed-size blocks with their own
    // generators; then every pair of samples within 8 places on the same arc
    // or across a junction, where the smallest ratios live.
    constexpr std::size_t kBlock = 4096;
    const std::size_t per_combo = (n_pairs + 15) / 16;
    const std::size_t blocks_per_combo = (per_combo + kBlock - 1) / kBlock;
    const long n_blocks = static_cast<long>(16 * blocks_per_combo);
#pragma omp parallel if (parallel)
    {
      PairBests local;
#pragma omp for schedule(static) nowait
      for (long blk = 0; blk < n_blocks; ++blk) {
        const auto combo = static_cast<std::size_t>(blk) / blocks_per_combo;
        const auto& A = by_arc[combo / 4];
        const auto& B = by_arc[combo % 4];
        if (A.empty() || B.empty()) continue;
        const std::size_t start = (static_cast<std::size_t>(blk) % blocks_per_combo) * kBlock;
        const std::size_t count = std::min(kBlock, per_combo - std::min(per_combo, start));
        auto rng = block_rng(seed, static_cast<std::uint64_t>(blk));
        for (std::size_t c = 0; c < count; ++c) {
          const std::size_t a = A[static_cast<std::size_t>(uniform01(rng) * A.size())];
          const std::size_t b = B[static_cast<std::size_t>(uniform01(rng) * B.size())];
          if (a != b) visit_pair(points, a, b, local);
        }
      }
#pragma omp critical
      total.merge(local);
    }
    // Points are stored arc by arc in parameter order, so index neighbours
    // (cyclically) are neighbours on Sigma_v.
    constexpr long kReach = 8;
    for (long a = 0; a < n; ++a) {
      for (long d = -kReach; d <= kReach; ++d) {
        if (d == 0) continue;
        const long b = ((a + d) % n + n) % n;
        visit_pair(points, a, b, total);
      }
    }
  }
  res.gamma = total.all.ratio;
  res.i = total.all.i;
  res.j = total.all.j;
  res.gamma_same_arc = total.same_arc.ratio;
  res.pairs = total.pairs;
  return res;
}

JunctionResiduals junction_residuals(const OneDConstruction& oned) {
  JunctionResiduals out;
  for (int m = 0; m < 4; ++m) {
    const SupportPoint end = support_point(oned, 0.0, 1, m);
    const SupportPoint start = support_point(oned, 0.0, -1, m + 1);
    out.position = std::max(out.position, norm(end.p - start.p));
    out.value = std::max(out.value, std::abs(end.g - start.g));
    out.vector = std::max(out.vector, norm(end.v - start.v));
  }
  const Vec2 t = oned.tangent_vector(1.0);
  out.parallel = std::abs(cross(t, {1.0, 1.0}));
  return out;
}

void write_support_csv(const std::vector<SupportPoint>& points,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "arc,s,theta,p1,p2,g,v1,v2\n";
  char buf[320];
  for (const SupportPoint& pt : points) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  pt.arc, pt.s, pt.theta, pt.p.x, pt.p.y, pt.g, pt.v.x, pt.v.y);
    out << buf;
  }
}

void write_hgrid_csv(const HBoundResult& scan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "x,y,ratio\n";
  char buf[128];
  for (int i = 0; i < scan.n; ++i) {
    for (int j = 0; j < scan.n; ++j) {
      const double v = scan.ratio[static_cast<std::size_t>(i) * scan.n + j];
      if (std::isnan(v)) continue;
      std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n",
                    1.0 - scan.t_grid[i] * scan.t_grid[i],
                    1.0 - scan.t_grid[j] * scan.t_grid[j], v);
      out << buf;
    }
  }
}

}  // namespace degenlab
