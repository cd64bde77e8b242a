#include "degenlab/el_verifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include "degenlab/profile_curve.hpp"
#include "degenlab/rng.hpp"

namespace degenlab {

namespace {

struct BlockNorms {
  double r1 = 0.0;
  double r2 = 0.0;
};

BlockNorms block_norms(const double* y, int k) {
  double a = 0.0, b = 0.0;
  for (int i = 0; i <= k; ++i) {
    a += y[i] * y[i];
    b += y[k + 1 + i] * y[k + 1 + i];
  }
  return {std::sqrt(a), std::sqrt(b)};
}

// grad G on the top arc at the point whose normal is (r1, r2)/|r|, r1 <= r2.
// Writes r = sqrt(1 - |s|) without cancellation near the junction.
Vec2 top_arc_flux(const OneDConstruction& oned, double r1, double r2) {
  const double rad = std::hypot(r1, r2);
  const double c = kSqrt2 * r1 / rad;
  const double one_minus_c = (r2 - r1) * (r2 + r1) / (rad * (rad + kSqrt2 * r1));
  const double rho = one_minus_c * std::sqrt(0.5 * (2.0 + c));
  const OneDJet j = oned.jet_at_r(rho);
  // s = -(1 - rho^2) <= 0; f' and phi' are odd.
  return {-(j.fp - j.h * j.phi.d1), j.h};
}

// Uniform point of the unit ball in block-polar form: uniform block directions,
// radius with density r^{d-1}, and u = sin^2 of the cone angle, which is
// Beta((k+1)/2, (k+1)/2), drawn inside one equal-probability stratum.
struct BallSampler {
  int k;
  int strata;
  double a;  // Beta(a, a) for u

  void draw(std::mt19937_64& rng, int stratum, double* y) const {
    const int d = 2 * k + 2;
    const double p = (stratum + uniform01(rng)) / strata;
    const double u = k == 1 ? p : boost::math::ibeta_inv(a, a, p);
    const double ca = std::sqrt(std::max(0.0, 1.0 - u));
    const double sa = std::sqrt(std::max(0.0, u));
    const double rad = std::pow(uniform01(rng), 1.0 / d);
    for (int blk = 0; blk < 2; ++blk) {
      double* z = y + blk * (k + 1);
      double n2 = 0.0;
      do {
        n2 = 0.0;
        for (int i = 0; i <= k; i += 2) {
          // Box-Muller pair
          const double u1 = 1.0 - uniform01(rng);
          const double u2 = uniform01(rng);
          const double m = std::sqrt(-2.0 * std::log(u1));
          z[i] = m * std::cos(2.0 * std::numbers::pi * u2);
          if (i + 1 <= k) z[i + 1] = m * std::sin(2.0 * std::numbers::pi * u2);
        }
        for (int i = 0; i <= k; ++i) n2 += z[i] * z[i];
      } while (n2 == 0.0);
      const double scale = rad * (blk == 0 ? ca : sa) / std::sqrt(n2);
      for (int i = 0; i <= k; ++i) z[i] *= scale;
    }
  }
};

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

constexpr std::size_t kBlock = 4096;

// Per-stratum running sums for several integrands.
struct StratSums {
  int strata = 0;
  int m = 0;
  std::vector<double> s1, s2;
  std::vector<std::size_t> count;

  StratSums(int strata_, int m_)
      : strata(strata_), m(m_), s1(strata_ * m_, 0.0), s2(strata_ * m_, 0.0), count(strata_, 0) {}

  void merge(const StratSums& o) {
    for (std::size_t i = 0; i < s1.size(); ++i) {
      s1[i] += o.s1[i];
      s2[i] += o.s2[i];
    }
    for (int j = 0; j < strata; ++j) count[j] += o.count[j];
  }

  // Stratified mean and its standard error for integrand i.
  std::pair<double, double> mean_sigma(int i) const {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < strata; ++j) {
      const double n = static_cast<double>(count[j]);
      if (count[j] == 0) continue;
      const double mu = s1[j * m + i] / n;
      const double vj = count[j] > 1 ? std::max(0.0, (s2[j * m + i] - n * mu * mu) / (n - 1.0)) : 0.0;
      mean += mu / strata;
      var += vj / (n * strata * strata);
    }
    return {mean, std::sqrt(var)};
  }
};

// Runs body(y, values) over n stratified ball samples in deterministic blocks.
template <class Body>
StratSums run_blocks(int k, int m, const McOptions& opt, Body body) {
  const int strata = std::max(1, opt.strata);
  const BallSampler sampler{k, strata, 0.5 * (k + 1)};
  const std::size_t nblocks = (opt.n + kBlock - 1) / kBlock;
  std::vector<StratSums> partial(nblocks, StratSums(strata, m));
  const int d = 2 * k + 2;

#pragma omp parallel for schedule(dynamic) if (opt.exec == Exec::kParallel)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    auto rng = block_rng(opt.seed, static_cast<std::uint64_t>(b));
    StratSums& acc = partial[b];
    std::vector<double> y(d), vals(m);
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = std::min(opt.n, begin + kBlock);
    for (std::size_t i = begin; i < end; ++i) {
      const int stratum = static_cast<int>(i % strata);
      sampler.draw(rng, stratum, y.data());
      body(y.data(), vals.data());
      for (int t = 0; t < m; ++t) {
        acc.s1[stratum * m + t] += vals[t];
        acc.s2[stratum * m + t] += vals[t] * vals[t];
      }
      ++acc.count[stratum];
    }
  }
  StratSums total(strata, m);
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace

IdentityResidual reduced_identity_residual(const OneDConstruction& oned, double s,
                                           double h_offset) {
  if (!(s > 0.0 && s <= 1.0 - 1e-3)) throw DomainError("reduced_identity_residual: s outside (0, 1 - 1e-3]");
  const OneDJet j = oned.jet(s);
  const int k = oned.k();
  const double r = std::sqrt(1.0 - s);
  const double p1 = j.phi.d1;
  const double p2 = j.scaled_phi2 / r;
  const double fpp = j.scaled_fpp / r;
  const double h = j.h + h_offset;
  const double q = std::sqrt(1.0 + p1 * p1);

  IdentityResidual out;
  out.s = s;
  out.curvature = {-p2 / (q * q * q), -p1 / (s * q), 1.0 / (j.phi.phi * q)};
  out.eigenvalue = {(fpp - h * p2) / (q * q), (j.fp - h * p1) / s, h / j.phi.phi};
  out.residual = out.eigenvalue[0] / out.curvature[0] +
                 k * out.eigenvalue[1] / out.curvature[1] +
                 k * out.eigenvalue[2] / out.curvature[2];
  return out;
}

ReducedELTerms reduced_el_residual(const OneDConstruction& oned, double theta) {
  constexpr double kQuarter = 0.25 * std::numbers::pi;
  if (!(theta >= kQuarter + 1e-3 && theta <= 0.5 * std::numbers::pi + 1e-15))
    throw DomainError("reduced_el_residual: theta outside [pi/4 + 1e-3, pi/2]");
  const double c = kSqrt2 * std::cos(theta);
  const double one_minus_c =
      2.0 * kSqrt2 * std::sin(0.5 * (theta + kQuarter)) * std::sin(0.5 * (theta - kQuarter));
  const double rho = one_minus_c * std::sqrt(0.5 * (2.0 + c));
  const OneDJet j = oned.jet_at_r(rho);
  const int k = oned.k();

  ReducedELTerms out;
  out.theta = theta;
  out.s = -j.s;
  const double p1 = -j.phi.d1;  // phi'(s) at s <= 0
  const double x1 = std::cos(theta), x2 = std::sin(theta);
  // f''/phi'' from the scaled values, which share the factor 1/r.
  out.tangential = -std::sqrt(1.0 + p1 * p1) * (j.scaled_fpp / j.scaled_phi2 - j.h);
  double first;
  if (x1 > 1e-6) {
    first = -(j.fp - j.h * j.phi.d1) / x1;
  } else {
    // (f' - h phi')/x1 = (f'/phi' - h) phi'/x1 and phi' = -x1/x2 on the arc.
    first = -(j.ratio - j.h) / x2;
  }
  out.radial = k * (first + j.h / x2);
  out.residual = out.tangential + out.radial;
  return out;
}

double w_value(const double* y, int k) {
  const auto [r1, r2] = block_norms(y, k);
  const double rad = std::hypot(r1, r2);
  if (rad == 0.0) return 0.0;
  return (r2 - r1) * (r2 + r1) / (kSqrt2 * rad);
}

void w_gradient(const double* y, int k, double* out) {
  const auto [r1, r2] = block_norms(y, k);
  const Vec2 g = grad_v2d({r1, r2});
  for (int i = 0; i <= k; ++i) {
    out[i] = r1 > 0.0 ? g.x * y[i] / r1 : 0.0;
    out[k + 1 + i] = r2 > 0.0 ? g.y * y[k + 1 + i] / r2 : 0.0;
  }
}

Vec2 flux_2d(const OneDConstruction& oned, double r1, double r2) {
  if (r1 < 0.0 || r2 < 0.0 || (r1 == 0.0 && r2 == 0.0))
    throw DomainError("flux_2d: need r1, r2 >= 0, not both zero");
  if (r1 <= r2) return top_arc_flux(oned, r1, r2);
  // v is odd under the swap, so grad G(grad v(r)) = -swap of the swapped value.
  const Vec2 g = top_arc_flux(oned, r2, r1);
  return {-g.y, -g.x};
}

void flux_lift(const OneDConstruction& oned, const double* y, int k, double* out) {
  const auto [r1, r2] = block_norms(y, k);
  if (r1 == 0.0 && r2 == 0.0) {
    std::fill(out, out + 2 * k + 2, 0.0);
    return;
  }
  const Vec2 g = flux_2d(oned, r1, r2);
  for (int i = 0; i <= k; ++i) {
    out[i] = r1 > 0.0 ? g.x * y[i] / r1 : 0.0;
    out[k + 1 + i] = r2 > 0.0 ? g.y * y[k + 1 + i] / r2 : 0.0;
  }
}

PolyBump::PolyBump(int dim, double c0, std::vector<double> linear, std::vector<double> quadratic)
    : dim_(dim), c0_(c0), lin_(std::move(linear)), quad_(std::move(quadratic)) {
  if (static_cast<int>(lin_.size()) != dim_ || static_cast<int>(quad_.size()) != dim_ * dim_)
    throw DomainError("PolyBump: coefficient sizes do not match the dimension");
}

PolyBump PolyBump::random(int k, std::mt19937_64& rng, bool block_symmetric) {
  const int d = 2 * k + 2;
  auto normal = [&] {
    const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  const double c0 = normal();
  std::vector<double> lin(d, 0.0), quad(d * d, 0.0);
  if (block_symmetric) {
    const double a = normal(), b = normal();
    for (int i = 0; i < d; ++i) quad[i * d + i] = i <= k ? a : b;
  } else {
    for (int i = 0; i < d; ++i) lin[i] = normal();
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) quad[i * d + j] = quad[j * d + i] = normal();
  }
  PolyBump p(d, c0, std::move(lin), std::move(quad));
  p.block_symmetric_ = block_symmetric;
  return p;
}

PolyBump PolyBump::radial(int k) {
  const int d = 2 * k + 2;
  PolyBump p(d, 1.0, std::vector<double>(d, 0.0), std::vector<double>(d * d, 0.0));
  p.block_symmetric_ = true;
  return p;
}

double PolyBump::value(const double* y) const {
  double r2 = 0.0, p = c0_;
  for (int i = 0; i < dim_; ++i) {
    r2 += y[i] * y[i];
    double qi = 0.0;
    for (int j = 0; j < dim_; ++j) qi += quad_[i * dim_ + j] * y[j];
    p += lin_[i] * y[i] + 0.5 * qi * y[i];
  }
  if (r2 >= 1.0) return 0.0;
  const double b = 1.0 - r2;
  return p * b * b * b;
}

double PolyBump::gradient(const double* y, double* out) const {
  double r2 = 0.0, p = c0_;
  for (int i = 0; i < dim_; ++i) r2 += y[i] * y[i];
  if (r2 >= 1.0) {
    std::fill(out, out + dim_, 0.0);
    return 0.0;
  }
  const double b = 1.0 - r2;
  const double b2 = b * b;
  for (int i = 0; i < dim_; ++i) {
    double qi = 0.0;
    for (int j = 0; j < dim_; ++j) qi += quad_[i * dim_ + j] * y[j];
    p += lin_[i] * y[i] + 0.5 * qi * y[i];
    out[i] = lin_[i] + qi;  // grad P for now
  }
  for (int i = 0; i < dim_; ++i) out[i] = out[i] * b2 * b - 6.0 * p * b2 * y[i];
  return p * b2 * b;
}

std::vector<McEstimate> weak_form_residual(const OneDConstruction& oned,
                                           const std::vector<PolyBump>& tests,
                                           const McOptions& opt) {
  const int k = oned.k();
  const int d = 2 * k + 2;
  for (const auto& t : tests)
    if (t.dim() != d) throw DomainError("weak_form_residual: test function dimension mismatch");
  const int m = static_cast<int>(tests.size());
  const StratSums sums = run_blocks(k, m, opt, [&](const double* y, double* vals) {
    double flux[16], grad[16];
    flux_lift(oned, y, k, flux);
    for (int t = 0; t < m; ++t) {
      tests[t].gradient(y, grad);
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += flux[i] * grad[i];
      vals[t] = acc;
    }
  });
  const double vol = unit_ball_volume(d);
  std::vector<McEstimate> out(m);
  for (int t = 0; t < m; ++t) {
    const auto [mean, sig] = sums.mean_sigma(t);
    out[t].estimate = vol * mean;
    out[t].sigma = vol * sig;
    out[t].n = opt.n;
    out[t].seed = opt.seed;
    out[t].finite = std::isfinite(out[t].estimate) && std::isfinite(out[t].sigma);
  }
  return out;
}

std::vector<GapEstimate> minimality_test(const LiftedIntegrand& F,
                                         const std::vector<Perturbation>& perts,
                                         const McOptions& opt) {
  const int k = F.k();
  const int d = 2 * k + 2;
  const int m = static_cast<int>(perts.size());
  for (const auto& p : perts)
    if (p.psi.dim() != d) throw DomainError("minimality_test: perturbation dimension mismatch");
  // Columns: gap integrand, then |grad phi|^2.
  const StratSums sums = run_blocks(k, 2 * m, opt, [&](const double* y, double* vals) {
    double q[16], g[16], qp[16];
    w_gradient(y, k, q);
    const double base = F.value(q);
    for (int t = 0; t < m; ++t) {
      perts[t].psi.gradient(y, g);
      double n2 = 0.0;
      for (int i = 0; i < d; ++i) {
        const double gi = perts[t].t * g[i];
        qp[i] = q[i] + gi;
        n2 += gi * gi;
      }
      vals[t] = F.value(qp) - base;
      vals[m + t] = n2;
    }
  });
  const double vol = unit_ball_volume(d);
  std::vector<GapEstimate> out(m);
  for (int t = 0; t < m; ++t) {
    const auto [mean, sig] = sums.mean_sigma(t);
    out[t].t = perts[t].t;
    out[t].gap = vol * mean;
    out[t].sigma = vol * sig;
    out[t].grad_norm2 = vol * sums.mean_sigma(m + t).first;
    out[t].block_symmetric = perts[t].psi.block_symmetric();
  }
  return out;
}

namespace {

// Random point in the unit ball of R^d with relative cone distance above collar.
void draw_off_cone(std::mt19937_64& rng, int k, double collar, double* y) {
  const int d = 2 * k + 2;
  for (;;) {
    double n2 = 0.0;
    for (int i = 0; i < d; ++i) {
      y[i] = 2.0 * uniform01(rng) - 1.0;
      n2 += y[i] * y[i];
    }
    if (n2 > 1.0 || n2 < 1e-4) continue;
    const auto [r1, r2] = block_norms(y, k);
    if (std::abs(r1 - r2) > collar * std::sqrt(n2) && r1 > collar && r2 > collar) return;
  }
}

}  // namespace

double one_homogeneity_check(int k, std::size_t n, std::uint64_t seed) {
  const int d = 2 * k + 2;
  auto rng = block_rng(seed, 0);
  std::vector<double> y(d), ly(d);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double n2 = 0.0;
    for (int j = 0; j < d; ++j) {
      y[j] = 2.0 * uniform01(rng) - 1.0;
      n2 += y[j] * y[j];
    }
    if (n2 == 0.0) continue;
    const double lambda = std::exp(6.0 * uniform01(rng) - 3.0);
    for (int j = 0; j < d; ++j) ly[j] = lambda * y[j];
    const double err = std::abs(w_value(ly.data(), k) - lambda * w_value(y.data(), k)) /
                       (lambda * std::sqrt(n2));
    worst = std::max(worst, err);
  }
  return worst;
}

SaddleCheck saddle_check(int k, std::size_t n, std::uint64_t seed, double collar) {
  const int d = 2 * k + 2;
  auto rng = block_rng(seed, 0);
  std::vector<double> y(d), gp(d), gm(d);
  SaddleCheck out;
  const double eps = 1e-5;
  for (std::size_t i = 0; i < n; ++i) {
    draw_off_cone(rng, k, collar, y.data());
    Eigen::MatrixXd H(d, d);
    for (int j = 0; j < d; ++j) {
      const double yj = y[j];
      y[j] = yj + eps;
      w_gradient(y.data(), k, gp.data());
      y[j] = yj - eps;
      w_gradient(y.data(), k, gm.data());
      y[j] = yj;
      for (int l = 0; l < d; ++l) H(l, j) = (gp[l] - gm[l]) / (2.0 * eps);
    }
    const Eigen::MatrixXd S = 0.5 * (H + H.transpose());
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    ++out.points;
    if (ev.minCoeff() < -1e-6 * scale && ev.maxCoeff() > 1e-6 * scale) ++out.mixed;
  }
  return out;
}

double flux_consistency(const OneDConstruction& oned, const LiftedIntegrand& F, std::size_t n,
                        std::uint64_t seed, double collar) {
  const int k = oned.k();
  const int d = 2 * k + 2;
  auto rng = block_rng(seed, 0);
  std::vector<double> y(d), q(d), flux(d);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    draw_off_cone(rng, k, collar, y.data());
    w_gradient(y.data(), k, q.data());
    flux_lift(oned, y.data(), k, flux.data());
    // G is C^{1,1} with curvature up to ~1e3 near the junction and has a kink
    // on the mirror diagonal, so the stencil stays well inside one side.
    const auto [a1, a2] = block_norms(q.data(), k);
    const double eps = std::clamp(0.1 * std::abs(a1 - a2), 1e-10, 1e-8);
    for (int j = 0; j < d; ++j) {
      const double qj = q[j];
      q[j] = qj + eps;
      const double fp = F.value(q.data());
      q[j] = qj - eps;
      const double fm = F.value(q.data());
      q[j] = qj;
      worst = std::max(worst, std::abs((fp - fm) / (2.0 * eps) - flux[j]));
    }
  }
  return worst;
}

}  // namespace degenlab
