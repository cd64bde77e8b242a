#include "degenlab/convex_extension.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "degenlab/rng.hpp"

namespace degenlab {

namespace {

constexpr std::size_t kBlockSize = 32;

// Cubic Hermite basis on [0, 1] and its derivative.
struct Hermite {
  double h00, h10, h01, h11;
};

Hermite hermite(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2};
}

Hermite hermite_d(double t) {
  const double t2 = t * t;
  return {6 * t2 - 6 * t, 3 * t2 - 4 * t + 1, -6 * t2 + 6 * t, 3 * t2 - 2 * t};
}

template <class T>
T blend(const Hermite& w, T y0, T m0, T y1, T m1, double dt) {
  return y0 * w.h00 + m0 * (w.h10 * dt) + y1 * w.h01 + m1 * (w.h11 * dt);
}

SupportPoint mirrored(const SupportPoint& pt) {
  const int back = (4 - pt.arc) & 3;
  SupportPoint q = pt;
  q.p = rotate_quarter(pt.p, back);
  q.v = rotate_quarter(pt.v, back);
  q.dp = rotate_quarter(pt.dp, back);
  q.dv = rotate_quarter(pt.dv_next, back);
  q.dv_next = rotate_quarter(pt.dv, back);
  q.s = -q.s;
  q.theta = kPi - q.theta;
  q.p.x = -q.p.x;
  q.v.x = -q.v.x;
  q.dp.y = -q.dp.y;
  q.dv.y = -q.dv.y;
  q.dv_next.y = -q.dv_next.y;
  q.p = rotate_quarter(q.p, pt.arc);
  q.v = rotate_quarter(q.v, pt.arc);
  q.dp = rotate_quarter(q.dp, pt.arc);
  q.dv = rotate_quarter(q.dv, pt.arc);
  q.dv_next = rotate_quarter(q.dv_next, pt.arc);
  return q;
}

// Largest value of a t^3 + b t^2 + c t + d on [0, 1] and where it sits.
std::pair<double, double> cubic_max(double a, double b, double c, double d) {
  auto val = [&](double t) { return ((a * t + b) * t + c) * t + d; };
  double best_t = 0.0, best = d;
  auto consider = [&](double t) {
    if (!(t > 0.0 && t <= 1.0)) return;
    const double v = val(t);
    if (v > best) {
      best = v;
      best_t = t;
    }
  };
  consider(1.0);
  // Roots of 3a t^2 + 2b t + c.
  const double qa = 3.0 * a, qb = 2.0 * b, qc = c;
  const double scale = std::abs(qa) + std::abs(qb) + std::abs(qc);
  if (std::abs(qa) <= 1e-14 * scale) {
    if (qb != 0.0) consider(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double qq = -0.5 * (qb + std::copysign(sq, qb));
      if (qq != 0.0) {
        consider(qq / qa);
        consider(qc / qq);
      } else {
        consider(0.0);
      }
    }
  }
  return {best, best_t};
}

}  // namespace

ParaboloidEnvelope::ParaboloidEnvelope(const std::vector<SupportPoint>& samples,
                                       double gamma_tilde, double gamma_emp,
                                       EnvelopeOptions options)
    : gamma_(gamma_tilde), options_(options) {
  if (!(gamma_tilde > 0.0 && gamma_tilde < gamma_emp)) {
    std::ostringstream msg;
    msg << "build_envelope: gamma_tilde=" << gamma_tilde
        << " must lie in (0, gamma_emp=" << gamma_emp
        << "); interpolation at the samples would fail";
    throw ConstructionError(msg.str());
  }
  std::array<std::vector<SupportPoint>, 4> by_arc;
  for (const SupportPoint& pt : samples) by_arc[pt.arc & 3].push_back(pt);
  for (int m = 0; m < 4; ++m) {
    auto& pts = by_arc[m];
    if (pts.empty()) continue;
    if (pts.back().s == 1.0 && pts.front().s != -1.0) pts.insert(pts.begin(), mirrored(pts.back()));
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (!(pts[i].theta > pts[i - 1].theta)) {
        throw ConstructionError("build_envelope: samples not in increasing theta on an arc");
      }
    }
    auto& nodes = arcs_[m];
    nodes.reserve(pts.size());
    for (const SupportPoint& pt : pts) {
      Node nd;
      nd.theta = pt.theta;
      nd.p = pt.p;
      nd.g = pt.g;
      nd.v = pt.v;
      nd.dp = pt.dp;
      nd.dv = pt.dv;
      nd.c = pt.g - dot(pt.v, pt.p) + gamma_ * norm2(pt.p);
      nd.b = pt.v - 2.0 * gamma_ * pt.p;
      // dg = v.dp, so the v.dp terms cancel.
      nd.dc = -dot(pt.dv, pt.p) + 2.0 * gamma_ * dot(pt.p, pt.dp);
      nd.db = pt.dv - 2.0 * gamma_ * pt.dp;
      nd.dv_next = pt.dv_next;
      nd.dc_next = -dot(pt.dv_next, pt.p) + 2.0 * gamma_ * dot(pt.p, pt.dp);
      nd.db_next = pt.dv_next - 2.0 * gamma_ * pt.dp;
      nodes.push_back(nd);
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) flat_.push_back({m, k});
  }
  if (flat_.empty()) throw ConstructionError("build_envelope: no samples");
  if (!(options_.ridge_smoothing >= 0.0)) {
    throw ConstructionError("build_envelope: ridge_smoothing must be >= 0");
  }
  options_.candidate_gap = std::max(options_.candidate_gap, 40.0 * options_.ridge_smoothing);
  for (std::size_t begin = 0; begin < flat_.size(); begin += kBlockSize) {
    Block blk{begin, std::min(flat_.size(), begin + kBlockSize), -INFINITY,
              {INFINITY, INFINITY}, {-INFINITY, -INFINITY}};
    for (std::size_t i = blk.begin; i < blk.end; ++i) {
      const Node& nd = arcs_[flat_[i].arc][flat_[i].k];
      blk.c_max = std::max(blk.c_max, nd.c);
      blk.b_lo = {std::min(blk.b_lo.x, nd.b.x), std::min(blk.b_lo.y, nd.b.y)};
      blk.b_hi = {std::max(blk.b_hi.x, nd.b.x), std::max(blk.b_hi.y, nd.b.y)};
    }
    blocks_.push_back(blk);
  }
}

void ParaboloidEnvelope::discrete_candidates(Vec2 y, std::vector<Candidate>& out,
                                             double gap) const {
  thread_local std::vector<double> bounds;
  bounds.resize(blocks_.size());
  std::size_t top = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    bounds[i] = b.c_max + std::max(b.b_lo.x * y.x, b.b_hi.x * y.x) +
                std::max(b.b_lo.y * y.y, b.b_hi.y * y.y);
    if (bounds[i] > bounds[top]) top = i;
  }
  out.clear();
  double best = -INFINITY;
  auto scan = [&](std::size_t bi) {
    for (std::size_t i = blocks_[bi].begin; i < blocks_[bi].end; ++i) {
      const Node& nd = arcs_[flat_[i].arc][flat_[i].k];
      const double q = nd.c + dot(nd.b, y);
      if (q >= best - gap) out.push_back({q, flat_[i].arc, flat_[i].k});
      best = std::max(best, q);
    }
  };
  scan(top);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i != top && bounds[i] >= best - gap) scan(i);
  }
  std::erase_if(out, [&](const Candidate& c) { return c.q < best - gap; });
}

EnvelopeEval ParaboloidEnvelope::eval_discrete(Vec2 x) const {
  thread_local std::vector<Candidate> cands;
  discrete_candidates(x, cands, 0.0);
  // Lowest flat index on exact ties.
  const Candidate* best = &cands.front();
  for (const Candidate& c : cands) {
    if (c.q > best->q || (c.q == best->q && std::tie(c.arc, c.k) < std::tie(best->arc, best->k))) {
      best = &c;
    }
  }
  const Node& nd = arcs_[best->arc][best->k];
  EnvelopeEval e;
  e.value = best->q + gamma_ * norm2(x);
  e.grad = nd.b + 2.0 * gamma_ * x;
  e.hess = {2.0 * gamma_, 0.0, 2.0 * gamma_};
  e.arc = best->arc;
  e.node = best->k;
  for (const Candidate& c : cands) {
    if (c.q == best->q && norm(arcs_[c.arc][c.k].b - nd.b) > 1e-12) e.ridge = true;
  }
  return e;
}

EnvelopeEval ParaboloidEnvelope::eval_canonical(Vec2 y) const {
  if (!options_.refine) return eval_discrete(y);
  thread_local std::vector<Candidate> cands;
  thread_local std::vector<std::pair<int, std::size_t>> segs;
  discrete_candidates(y, cands, options_.candidate_gap);
  segs.clear();
  for (const Candidate& c : cands) {
    const std::size_t n = arcs_[c.arc].size();
    if (c.k > 0) segs.emplace_back(c.arc, c.k - 1);
    if (c.k + 1 < n) segs.emplace_back(c.arc, c.k);
  }
  std::sort(segs.begin(), segs.end());
  segs.erase(std::unique(segs.begin(), segs.end()), segs.end());

  struct Local {
    double q;
    int arc;
    std::size_t k;
    double t;
    Vec2 b;
  };
  thread_local std::vector<Local> locals;
  locals.clear();
  for (const auto& [arc, k] : segs) {
    const Node& n0 = arcs_[arc][k];
    const Node& n1 = arcs_[arc][k + 1];
    const double dt = n1.theta - n0.theta;
    const double q0 = n0.c + dot(n0.b, y), q1 = n1.c + dot(n1.b, y);
    const double m0 = dt * (n0.dc_next + dot(n0.db_next, y)), m1 = dt * (n1.dc + dot(n1.db, y));
    const double a = 2.0 * (q0 - q1) + m0 + m1;
    const double b = 3.0 * (q1 - q0) - 2.0 * m0 - m1;
    const auto [q, t] = cubic_max(a, b, m0, q0);
    const Vec2 bt = blend(hermite(t), n0.b, n0.db_next, n1.b, n1.db, dt);
    locals.push_back({q, arc, k, t, bt});
  }
  // One branch per arc: the sup over a fixed window is convex, so the
  // log-sum-exp of the branches stays convex and continuous.
  thread_local std::vector<const Local*> branches;
  branches.clear();
  for (const Local& l : locals) {
    if (branches.empty() || branches.back()->arc != l.arc) {
      branches.push_back(&l);
    } else if (l.q > branches.back()->q) {
      branches.back() = &l;
    }
  }

  // Rank-one curvature of the sup over a segment with an interior maximizer.
  auto branch_hessian = [&](const Local& l) {
    Sym2 hs;
    if (!(l.t > 0.0 && l.t < 1.0)) return hs;
    const Node& n0 = arcs_[l.arc][l.k];
    const Node& n1 = arcs_[l.arc][l.k + 1];
    const double dt = n1.theta - n0.theta;
    const Vec2 bl = blend(hermite_d(l.t), n0.b, n0.db_next, n1.b, n1.db, dt);
    const double q0 = n0.c + dot(n0.b, y), q1 = n1.c + dot(n1.b, y);
    const double m0 = dt * (n0.dc_next + dot(n0.db_next, y)), m1 = dt * (n1.dc + dot(n1.db, y));
    const double a = 2.0 * (q0 - q1) + m0 + m1;
    const double b = 3.0 * (q1 - q0) - 2.0 * m0 - m1;
    const double qtt = 6.0 * a * l.t + 2.0 * b;
    if (qtt < 0.0) hs = {-bl.x * bl.x / qtt, -bl.x * bl.y / qtt, -bl.y * bl.y / qtt};
    return hs;
  };

  const Local* best = branches.front();
  for (const Local* l : branches) {
    if (l->q > best->q) best = l;
  }
  EnvelopeEval e;
  e.arc = best->arc;
  e.node = best->k + (best->t > 0.5 ? 1 : 0);
  e.lambda = best->t;
  const double tie = 1e-12 * std::max(1.0, std::abs(best->q));
  for (const Local* l : branches) {
    if (l != best && best->q - l->q <= tie && norm(l->b - best->b) > 1e-8) e.ridge = true;
  }
  const double tau = options_.ridge_smoothing;
  double wsum = 0.0, value = best->q;
  Vec2 bbar;
  Sym2 hbar, bb;
  for (const Local* l : branches) {
    const double w = tau > 0.0 ? std::exp((l->q - best->q) / tau) : (l == best ? 1.0 : 0.0);
    if (w < 1e-300) continue;
    wsum += w;
    bbar = bbar + w * l->b;
    const Sym2 hl = branch_hessian(*l);
    hbar = {hbar.xx + w * hl.xx, hbar.xy + w * hl.xy, hbar.yy + w * hl.yy};
    bb = {bb.xx + w * l->b.x * l->b.x, bb.xy + w * l->b.x * l->b.y, bb.yy + w * l->b.y * l->b.y};
  }
  bbar = bbar * (1.0 / wsum);
  if (tau > 0.0) value += tau * std::log(wsum);
  e.value = value + gamma_ * norm2(y);
  e.grad = bbar + 2.0 * gamma_ * y;
  e.hess = {2.0 * gamma_ + hbar.xx / wsum, hbar.xy / wsum, 2.0 * gamma_ + hbar.yy / wsum};
  if (tau > 0.0) {
    e.hess.xx += (bb.xx / wsum - bbar.x * bbar.x) / tau;
    e.hess.xy += (bb.xy / wsum - bbar.x * bbar.y) / tau;
    e.hess.yy += (bb.yy / wsum - bbar.y * bbar.y) / tau;
  }
  return e;
}

EnvelopeEval ParaboloidEnvelope::eval(Vec2 x) const {
  Dihedral d;
  d.swap = std::abs(x.x) > std::abs(x.y);
  const Vec2 w = d.swap ? Vec2{x.y, x.x} : x;
  d.sx = w.x < 0.0 ? -1.0 : 1.0;
  d.sy = w.y < 0.0 ? -1.0 : 1.0;
  const Vec2 y = d.apply(x);
  EnvelopeEval e = eval_canonical(y);
  // Symmetric subgradient on the mirror lines of the canonical sector.
  if (y.y == 0.0) {
    e.grad = {0.0, 0.0};
    const double tr = 0.5 * (e.hess.xx + e.hess.yy);
    e.hess = {tr, 0.0, tr};
  } else if (y.x == 0.0) {
    e.grad.x = 0.0;
    e.hess.xy = 0.0;
  } else if (y.x == y.y) {
    const double g = 0.5 * (e.grad.x + e.grad.y);
    e.grad = {g, g};
    const double dd = 0.5 * (e.hess.xx + e.hess.yy);
    e.hess.xx = e.hess.yy = dd;
  }
  e.grad = d.apply_inverse(e.grad);
  e.hess = d.conjugate_inverse(e.hess);
  return e;
}

SelfInterpolation self_interpolation(const ParaboloidEnvelope& env,
                                     const std::vector<SupportPoint>& samples,
                                     Exec exec) {
  const long n = static_cast<long>(samples.size());
  std::vector<double> verr(samples.size()), gerr(samples.size());
  const bool parallel = exec == Exec::kParallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < n; ++i) {
    const EnvelopeEval e = env.eval(samples[i].p);
    verr[i] = std::abs(e.value - samples[i].g);
    gerr[i] = norm(e.grad - samples[i].v);
  }
  SelfInterpolation out;
  for (long i = 0; i < n; ++i) {
    out.max_value_error = std::max(out.max_value_error, verr[i]);
    out.max_grad_error = std::max(out.max_grad_error, gerr[i]);
    if (gerr[i] > 1e-8) ++out.wrong_argmax;
  }
  return out;
}

ConvexityCertificate convexity_certificate(const ParaboloidEnvelope& env,
                                           std::size_t triples, double radius,
                                           std::uint64_t seed, Exec exec) {
  constexpr std::size_t kBlock = 1024;
  const long n_blocks = static_cast<long>((triples + kBlock - 1) / kBlock);
  std::vector<double> block_min(static_cast<std::size_t>(n_blocks), INFINITY);
  const double gamma = env.gamma_tilde();
  const bool parallel = exec == Exec::kParallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (long blk = 0; blk < n_blocks; ++blk) {
    auto rng = block_rng(seed, static_cast<std::uint64_t>(blk));
    auto point = [&] {
      // Uniform in the disk of the given radius.
      const double rr = radius * std::sqrt(uniform01(rng));
      const double a = 2.0 * kPi * uniform01(rng);
      return Vec2{rr * std::cos(a), rr * std::sin(a)};
    };
    const std::size_t start = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t count = std::min(kBlock, triples - start);
    double worst = INFINITY;
    for (std::size_t c = 0; c < count; ++c) {
      const Vec2 x = point(), y = point();
      const double t = uniform01(rng);
      const Vec2 m = t * x + (1.0 - t) * y;
      const double margin = t * env.value(x) + (1.0 - t) * env.value(y) - env.value(m) -
                            gamma * t * (1.0 - t) * norm2(x - y);
      worst = std::min(worst, margin);
    }
    block_min[static_cast<std::size_t>(blk)] = worst;
  }
  ConvexityCertificate out;
  out.triples = triples;
  out.min_margin = *std::min_element(block_min.begin(), block_min.end());
  return out;
}

Projection project_to_sigma(const ParaboloidEnvelope& env, Vec2 x) {
  // Nearest node per arc, then a refinement on its two adjacent segments.
  std::array<Projection, 4> per_arc;
  for (int m = 0; m < 4; ++m) {
    const auto& nodes = env.arc_nodes(m);
    per_arc[m].distance = INFINITY;
    per_arc[m].arc = m;
    if (nodes.empty()) continue;
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double d = norm2(nodes[k].p - x);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    Projection pr{nodes[best].p, nodes[best].g, nodes[best].v, std::sqrt(best_d), m};
    for (std::size_t k : {best == 0 ? best : best - 1, best}) {
      if (k + 1 >= nodes.size()) continue;
      const auto& n0 = nodes[k];
      const auto& n1 = nodes[k + 1];
      const double dt = n1.theta - n0.theta;
      auto pos = [&](double t) { return blend(hermite(t), n0.p, n0.dp, n1.p, n1.dp, dt); };
      // Golden-section search; |p(t) - x|^2 is unimodal on one short segment.
      double lo = 0.0, hi = 1.0;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
      double fa = norm2(pos(a) - x), fb = norm2(pos(b) - x);
      for (int it = 0; it < 80; ++it) {
        if (fa < fb) {
          hi = b; b = a; fb = fa; a = hi - phi * (hi - lo); fa = norm2(pos(a) - x);
        } else {
          lo = a; a = b; fa = fb; b = lo + phi * (hi - lo); fb = norm2(pos(b) - x);
        }
      }
      const double t = 0.5 * (lo + hi);
      const Vec2 pt = pos(t);
      const double d = norm(pt - x);
      if (d < pr.distance) {
        const Hermite w = hermite(t);
        pr.point = pt;
        pr.distance = d;
        pr.g = blend(w, n0.g, dot(n0.v, n0.dp), n1.g, dot(n1.v, n1.dp), dt);
        pr.v = blend(w, n0.v, n0.dv_next, n1.v, n1.dv, dt);
      }
    }
    per_arc[m] = pr;
  }
  std::sort(per_arc.begin(), per_arc.end(),
            [](const Projection& a, const Projection& b) { return a.distance < b.distance; });
  return per_arc[0];
}

double local_extension_g0(const ParaboloidEnvelope& env, Vec2 x, double A) {
  std::array<double, 4> dist{};
  for (int m = 0; m < 4; ++m) {
    dist[m] = INFINITY;
    for (const auto& nd : env.arc_nodes(m)) dist[m] = std::min(dist[m], norm(nd.p - x));
  }
  std::array<int, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  if (dist[order[1]] < 2.0 * dist[order[0]] + 1e-12) {
    std::ostringstream msg;
    msg << "local_extension_g0: projection of (" << x.x << ", " << x.y
        << ") ambiguous between arcs " << order[0] << " and " << order[1];
    throw DomainError(msg.str());
  }
  const Projection pr = project_to_sigma(env, x);
  return pr.g + dot(pr.v, x - pr.point) + A * pr.distance * pr.distance;
}

std::vector<CurvatureProbe> second_difference_probe(const ParaboloidEnvelope& env,
                                                    const OneDConstruction& oned,
                                                    const std::vector<double>& s_values,
                                                    double eps) {
  std::vector<CurvatureProbe> out;
  for (double s : s_values) {
    const SupportPoint pt = support_point(oned, std::sqrt(1.0 - s), 1, 0);
    const Vec2 nu{std::cos(pt.theta), std::sin(pt.theta)};
    const Vec2 tau{-nu.y, nu.x};
    const double g0 = env.value(pt.p);
    CurvatureProbe pr;
    pr.s = s;
    pr.tangential = (env.value(pt.p + eps * tau) - 2.0 * g0 + env.value(pt.p - eps * tau)) / (eps * eps);
    pr.normal = (env.value(pt.p + eps * nu) - 2.0 * g0 + env.value(pt.p - eps * nu)) / (eps * eps);
    out.push_back(pr);
  }
  return out;
}

double LiftedIntegrand::eval(const double* q, double* grad) const {
  const int n = k_ + 1;
  double a2 = 0.0, b2 = 0.0;
  for (int i = 0; i < n; ++i) {
    a2 += q[i] * q[i];
    b2 += q[n + i] * q[n + i];
  }
  const double a = std::sqrt(a2), b = std::sqrt(b2);
  const EnvelopeEval e = env_->eval({a, b});
  if (grad != nullptr) {
    for (int i = 0; i < n; ++i) {
      grad[i] = a > 0.0 ? e.grad.x * q[i] / a : 0.0;
      grad[n + i] = b > 0.0 ? e.grad.y * q[n + i] / b : 0.0;
    }
  }
  return e.value;
}

void write_envelope_grid_csv(const ParaboloidEnvelope& env, double half_width,
                             int n, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "x1,x2,G\n";
  char buf[128];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 x{-half_width + 2.0 * half_width * i / (n - 1),
                   -half_width + 2.0 * half_width * j / (n - 1)};
      std::snprintf(buf, sizeof buf, "%.8g,%.8g,%.12g\n", x.x, x.y, env.value(x));
      out << buf;
    }
  }
}

}  // namespace degenlab
