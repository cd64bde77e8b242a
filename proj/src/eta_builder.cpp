#include "degenlab/eta_builder.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "degenlab/quadrature.hpp"

namespace degenlab {

namespace {

// C-infinity step S on [0, 1] and the table of its running integral.
double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

class StepIntegralTable {
 public:
  static const StepIntegralTable& get() {
    static const StepIntegralTable table;
    return table;
  }

  // int_0^u S, for u in [0, 1].
  double operator()(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 0.5 + (u - 1.0);
    const double x = u * kN;
    const int i = std::min(static_cast<int>(x), kN - 1);
    const double lam = x - i;
    const double h = 1.0 / kN;
    const double y0 = values_[i], y1 = values_[i + 1];
    const double m0 = smooth_step(i * h) * h, m1 = smooth_step((i + 1) * h) * h;
    const double l2 = lam * lam, l3 = l2 * lam;
    return (2 * l3 - 3 * l2 + 1) * y0 + (l3 - 2 * l2 + lam) * m0 +
           (-2 * l3 + 3 * l2) * y1 + (l3 - l2) * m1;
  }

 private:
  static constexpr int kN = 1024;
  StepIntegralTable() : values_(kN + 1, 0.0) {
    for (int i = 0; i < kN; ++i) {
      values_[i + 1] = values_[i] +
                       integrate(smooth_step, static_cast<double>(i) / kN,
                                 static_cast<double>(i + 1) / kN, 1e-14, 1e-17)
                           .value;
    }
  }
  std::vector<double> values_;
};

// Smooth max(0, x) with transition on [-w, w]: convex, nondecreasing.
double smooth_relu(double x, double w) {
  if (w <= 0.0 || x <= -w) return std::max(0.0, x);
  if (x >= w) return x;
  return 2.0 * w * StepIntegralTable::get()(0.5 * (x / w + 1.0));
}

double smooth_relu_slope(double x, double w) {
  if (w <= 0.0) return x > 0.0 ? 1.0 : 0.0;
  return smooth_step(0.5 * (x / w + 1.0));
}

}  // namespace

double EtaConfig::crossing() const {
  const double r = (0.5 + mu) / a;
  return 1.0 - r * r;
}

double EtaConfig::blend_value_width() const {
  if (blend_width <= 0.0) return 0.0;
  const double r = (0.5 + mu) / a;
  return a * blend_width / (2.0 * r);
}

double EtaConfig::plateau_end() const {
  const double r = (0.5 + mu + blend_value_width()) / a;
  return 1.0 - r * r;
}

std::vector<double> EtaConfig::breakpoints() const {
  if (blend_width <= 0.0) return {crossing()};
  const double w = blend_value_width();
  const double r_end = std::max(0.0, (0.5 + mu - w) / a);
  return {plateau_end(), 1.0 - r_end * r_end};
}

double EtaConfig::eta_at_r(double r) const {
  const double top = plateau();
  const double branch = 0.5 + a * r;
  if (blend_width <= 0.0) return std::min(top, branch);
  return top - smooth_relu(top - branch, blend_value_width());
}

double EtaConfig::scaled_deta(double s) const {
  const double value = scaled_deta_at_r(std::sqrt(std::max(0.0, 1.0 - std::abs(s))));
  return s < 0.0 ? -value : value;
}

double EtaConfig::scaled_deta_at_r(double r) const {
  // d/ds (a r) = -a / (2 r) for s > 0.
  const double top = plateau();
  const double branch = 0.5 + a * r;
  double slope = 0.0;
  if (blend_width <= 0.0) {
    slope = branch < top ? 1.0 : 0.0;
  } else {
    slope = smooth_relu_slope(top - branch, blend_value_width());
  }
  return -0.5 * a * slope;
}

double eta_phi2_integral(const EtaConfig& cfg, const ProfileCurve& profile) {
  const double pe = cfg.plateau_end();
  const auto bps = cfg.breakpoints();
  const double tail =
      integrate_toward_one(
          [&](double, double t) {
            return cfg.eta_at_r(t) * profile.scaled_d2_at_r(t) / t;
          },
          pe, 1.0, bps)
          .value;
  return cfg.plateau() * profile.eval(pe).d1 + tail;
}

EtaConfig build_eta(double delta, const ProfileCurve& profile, int k,
                    double blend_width) {
  if (k < 1) throw DomainError("build_eta: k must be >= 1");
  if (!(delta > 0.0 && delta <= 0.2)) {
    std::ostringstream msg;
    msg << "build_eta: delta=" << delta
        << " outside the admissible cap width (0, 0.2]; the mu-bracket "
           "(0, 1/2) is not certified there";
    throw ConstructionError(msg.str());
  }
  EtaConfig cfg;
  cfg.delta = delta;
  cfg.a = 1.0 / std::sqrt(delta);
  cfg.k = k;
  cfg.blend_width = blend_width;

  auto residual = [&](double mu) {
    EtaConfig trial = cfg;
    trial.mu = mu;
    return eta_phi2_integral(trial, profile) - 1.0;
  };
  double lo = 0.0, hi = 0.5;
  double f_lo = residual(lo), f_hi = residual(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0)) {
    std::ostringstream msg;
    msg << "build_eta: cannot bracket mu in (0, 1/2) for delta=" << delta
        << " (residual " << f_lo << " at 0, " << f_hi << " at 1/2)";
    throw ConstructionError(msg.str());
  }
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) < 0.0) lo = mid; else hi = mid;
  }
  cfg.mu = 0.5 * (lo + hi);
  if (!(cfg.plateau_end() >= 1.0 - delta)) {
    throw ConstructionError("build_eta: plateau does not cover [0, 1 - delta]");
  }
  return cfg;
}

OneDConstruction::OneDConstruction(std::shared_ptr<const ProfileCurve> profile,
                                   EtaConfig cfg, int table_size)
    : profile_(std::move(profile)), cfg_(cfg) {
  plateau_end_ = cfg_.plateau_end();
  phi0_ = profile_->eval(0.0).phi;
  breaks_ = cfg_.breakpoints();
  t_start_ = std::sqrt(1.0 - plateau_end_);
  dt_ = t_start_ / table_size;
  node_s_.resize(static_cast<std::size_t>(table_size) + 1);
  node_c_.resize(node_s_.size());
  const double eta0 = cfg_.plateau();
  for (int i = 0; i <= table_size; ++i) {
    const double t = t_start_ - i * dt_;
    node_s_[i] = (i == 0) ? plateau_end_ : (i == table_size ? 1.0 : 1.0 - t * t);
  }
  for (std::size_t i = 1; i < node_s_.size(); ++i) {
    const double a = node_s_[i - 1], b = node_s_[i];
    const double c1 = integrate_toward_one(
        [&](double, double t) {
          return (cfg_.eta_at_r(t) - eta0) * profile_->scaled_d2_at_r(t) / t;
        }, a,
        b, breaks_, 1e-14, 1e-16).value;
    const double c3 = integrate_toward_one(
        [&](double u, double t) {
          return u * (cfg_.eta_at_r(t) - eta0) * profile_->scaled_d2_at_r(t) / t;
        },
        a, b, breaks_, 1e-14, 1e-16).value;
    node_c_[i].c1 = node_c_[i - 1].c1 + c1;
    node_c_[i].c3 = node_c_[i - 1].c3 + c3;
  }
}

OneDConstruction::Corrections OneDConstruction::corrections(double s) const {
  if (s <= plateau_end_) return {};
  const double t = std::sqrt(1.0 - s);
  std::size_t i = static_cast<std::size_t>(std::max(0.0, (t_start_ - t) / dt_));
  i = std::min(i, node_s_.size() - 1);
  while (i > 0 && node_s_[i] > s) --i;
  while (i + 1 < node_s_.size() && node_s_[i + 1] <= s) ++i;
  Corrections c = node_c_[i];
  if (node_s_[i] == s) return c;
  const double eta0 = cfg_.plateau();
  c.c1 += integrate_toward_one(
      [&](double, double t) {
          return (cfg_.eta_at_r(t) - eta0) * profile_->scaled_d2_at_r(t) / t;
        },
      node_s_[i], s, breaks_, 1e-14, 1e-16).value;
  c.c3 += integrate_toward_one(
      [&](double u, double t) {
          return u * (cfg_.eta_at_r(t) - eta0) * profile_->scaled_d2_at_r(t) / t;
        },
      node_s_[i], s, breaks_, 1e-14, 1e-16).value;
  return c;
}

double OneDConstruction::f_prime(double s) const {
  const double u = std::abs(s);
  const double value = cfg_.plateau() * profile_->eval(u).d1 + corrections(u).c1;
  return s < 0.0 ? -value : value;
}

double OneDConstruction::f(double s) const {
  const double u = std::abs(s);
  const Corrections c = corrections(u);
  return cfg_.plateau() * (profile_->eval(u).phi - phi0_) + u * c.c1 - c.c3;
}

double OneDConstruction::ratio(double s) const {
  const double u = std::abs(s);
  if (u <= plateau_end_) return cfg_.plateau();
  return cfg_.plateau() + corrections(u).c1 / profile_->eval(u).d1;
}

double OneDConstruction::h(double s) const {
  const int k = cfg_.k;
  return (cfg_.eta(s) + k * ratio(s)) / (1.0 + 2.0 * k);
}

Vec2 OneDConstruction::tangent_vector(double s) const {
  const double hv = h(s);
  return {f_prime(s) - hv * profile_->eval(s).d1, hv};
}

OneDJet OneDConstruction::jet(double s) const {
  OneDJet j = jet_impl(std::abs(s), std::sqrt(1.0 - std::abs(s)));
  if (s < 0.0) {
    j.s = s;
    j.phi.d1 = -j.phi.d1;
    j.phi.d3 = -j.phi.d3;
    j.scaled_deta = -j.scaled_deta;
    j.fp = -j.fp;
    j.scaled_dh = -j.scaled_dh;
  }
  return j;
}

OneDJet OneDConstruction::jet_at_r(double r) const {
  return jet_impl(1.0 - r * r, r);
}

OneDJet OneDConstruction::jet_impl(double u, double r) const {
  const int k = cfg_.k;
  const double eta0 = cfg_.plateau();
  const bool series = r * r < profile_->series_switch();
  OneDJet j;
  j.s = u;
  j.phi = series ? ProfileCurve::series_at_r(r) : profile_->eval(u);
  j.scaled_phi2 = series ? ProfileCurve::scaled_d2_series(r) : r * j.phi.d2;
  j.eta = cfg_.eta_at_r(r);
  j.scaled_deta = cfg_.scaled_deta_at_r(r);
  const Corrections c = corrections(u);
  j.fp = eta0 * j.phi.d1 + c.c1;
  j.f = eta0 * (j.phi.phi - phi0_) + u * c.c1 - c.c3;
  j.scaled_fpp = j.eta * j.scaled_phi2;
  j.ratio = (u <= plateau_end_) ? eta0 : eta0 + c.c1 / j.phi.d1;
  j.h = (j.eta + k * j.ratio) / (1.0 + 2.0 * k);
  // h' = (eta' + k phi'' (eta - ratio) / phi') / (1 + 2k); zero on the plateau.
  const double gap = (u <= plateau_end_) ? 0.0 : (j.eta - j.ratio) / j.phi.d1;
  j.scaled_dh = (j.scaled_deta + k * j.scaled_phi2 * gap) / (1.0 + 2.0 * k);
  return j;
}

EtaMargins OneDConstruction::margins(int grid) const {
  EtaMargins m;
  m.mu = cfg_.mu;
  m.eta_at_one_error = std::abs(cfg_.eta(1.0) - 0.5);
  const double step = 2.0 / grid;
  m.concavity_margin = INFINITY;
  m.lower_bound_margin = INFINITY;
  for (int i = 0; i <= grid; ++i) {
    const double s = -1.0 + i * step;
    const double e = cfg_.eta(s);
    m.evenness_error = std::max(m.evenness_error, std::abs(e - cfg_.eta(-s)));
    if (i > 0 && i < grid) {
      const double d2 = cfg_.eta(s - step) - 2.0 * e + cfg_.eta(s + step);
      m.concavity_margin = std::min(m.concavity_margin, 0.0 - d2 + 0.0);
    }
    const double lower =
        std::min(1.0, 0.5 * (1.0 + std::sqrt(std::max(0.0, 1.0 - std::abs(s))) /
                                       std::sqrt(cfg_.delta)));
    m.lower_bound_margin = std::min(m.lower_bound_margin, e - lower);
  }
  m.plateau_margin = plateau_end_ - (1.0 - cfg_.delta);
  m.integral_error =
      std::abs(integrate_toward_one(
                   [&](double, double t) {
                     return cfg_.eta_at_r(t) * profile_->scaled_d2_at_r(t) / t;
                   },
                   0.0, 1.0, breaks_, 1e-14, 1e-16)
                   .value -
               1.0);
  return m;
}

void OneDConstruction::write_csv(const std::string& path, int n) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "s,eta,f_prime,f,h\n";
  char buf[256];
  for (int i = 0; i < n; ++i) {
    const double s = -1.0 + 2.0 * i / (n - 1);
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", s,
                  eta(s), f_prime(s), f(s), h(s));
    out << buf;
  }
}

}  // namespace degenlab
