#include "degenlab/profile_curve.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

namespace degenlab {

namespace {

constexpr double kThetaLo = kPi / 4.0;
constexpr double kThetaHi = 3.0 * kPi / 4.0;

// Coefficients in r = (1 - s)^{1/2} of the expansions at s = 1:
//   phi      = sum c_i r^i
//   phi'     = sum d_i r^i
//   r phi''  = sum e_i r^i
// obtained from the exact triple-angle inversion of p1(theta).
const double kSqrt6 = std::sqrt(6.0);
constexpr int kSeriesTerms = 14;
const std::array<double, kSeriesTerms> kPhiSeries = {
    1.0, 0.0, -1.0, 4.0 * kSqrt6 / 9.0, -8.0 / 9.0, 37.0 * kSqrt6 / 81.0,
    -1072.0 / 729.0, 4979.0 * kSqrt6 / 5832.0, -20218.0 / 6561.0,
    10848547.0 * kSqrt6 / 5668704.0, -430510.0 / 59049.0,
    3848044273.0 * kSqrt6 / 816293376.0, -266231752.0 / 14348907.0,
    362000474041.0 * kSqrt6 / 29386561536.0};
const std::array<double, kSeriesTerms> kD1Series = {
    1.0, -2.0 * kSqrt6 / 3.0, 16.0 / 9.0, -185.0 * kSqrt6 / 162.0,
    1072.0 / 243.0, -34853.0 * kSqrt6 / 11664.0, 80872.0 / 6561.0,
    -10848547.0 * kSqrt6 / 1259712.0, 2152550.0 / 59049.0,
    -42328487003.0 * kSqrt6 / 1632586752.0, 532463504.0 / 4782969.0,
    -4706006162533.0 * kSqrt6 / 58773123072.0, 44809161544.0 / 129140163.0,
    -3192521069128745.0 * kSqrt6 / 12694994583552.0};
const std::array<double, kSeriesTerms - 1> kScaledD2Series = {
    kSqrt6 / 3.0, -16.0 / 9.0, 185.0 * kSqrt6 / 108.0, -2144.0 / 243.0,
    174265.0 * kSqrt6 / 23328.0, -80872.0 / 2187.0,
    75939829.0 * kSqrt6 / 2519424.0, -8610200.0 / 59049.0,
    42328487003.0 * kSqrt6 / 362797056.0, -2662317520.0 / 4782969.0,
    51766067787863.0 * kSqrt6 / 117546246144.0, -89618323088.0 / 43046721.0,
    41502773898673685.0 * kSqrt6 / 25389989167104.0};

double p1_of(double theta) {
  const double c = std::cos(theta);
  return -c * (2.0 - std::cos(2.0 * theta)) / kSqrt2;
}

double dp1_of(double theta) {
  return -3.0 * std::sin(theta) * std::cos(2.0 * theta) / kSqrt2;
}

// phi derivatives at the graph point with normal angle theta.
PhiValue phi_at_theta(double theta) {
  const ArcJet j = gamma1_jet(theta);
  const double sn = std::sin(theta);
  const double c = std::cos(theta);
  PhiValue out;
  out.phi = j.p.y;
  out.d1 = -c / sn;
  out.d2 = 1.0 / (sn * sn * j.dp.x);
  out.d3 = -(2.0 * sn * c * j.dp.x + sn * sn * j.ddp.x) /
           (sn * sn * sn * sn * j.dp.x * j.dp.x * j.dp.x);
  return out;
}

}  // namespace

double v2d(Vec2 x) {
  return (x.y * x.y - x.x * x.x) / (kSqrt2 * norm(x));
}

Vec2 grad_v2d(Vec2 x) {
  const double r = norm(x);
  const double q = x.y * x.y - x.x * x.x;
  return {(-2.0 * x.x / r - q * x.x / (r * r * r)) / kSqrt2,
          (2.0 * x.y / r - q * x.y / (r * r * r)) / kSqrt2};
}

Sym2 hess_v2d(Vec2 x) {
  // v = q / (sqrt2 r) with q = y^2 - x^2.
  const double r2 = norm2(x);
  const double r = std::sqrt(r2);
  const double r3 = r2 * r;
  const double r5 = r3 * r2;
  const double q = x.y * x.y - x.x * x.x;
  Sym2 h;
  h.xx = (-2.0 / r + 4.0 * x.x * x.x / r3 - q / r3 + 3.0 * q * x.x * x.x / r5);
  h.yy = (2.0 / r - 4.0 * x.y * x.y / r3 - q / r3 + 3.0 * q * x.y * x.y / r5);
  h.xy = (2.0 * x.x * x.y / r3 - 2.0 * x.x * x.y / r3 + 3.0 * q * x.x * x.y / r5);
  h.xx /= kSqrt2;
  h.yy /= kSqrt2;
  h.xy /= kSqrt2;
  return h;
}

Vec2 gamma1_point(double theta) {
  if (!(theta >= kThetaLo - 1e-14 && theta <= kThetaHi + 1e-14)) {
    throw DomainError("gamma1_point: theta outside [pi/4, 3pi/4]");
  }
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double c2 = std::cos(2.0 * theta);
  return {-c * (2.0 - c2) / kSqrt2, sn * (2.0 + c2) / kSqrt2};
}

ArcJet gamma1_jet(double theta) {
  ArcJet j;
  j.p = gamma1_point(theta);
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double c2 = std::cos(2.0 * theta);
  const double s2 = std::sin(2.0 * theta);
  const double k = 3.0 / kSqrt2;
  j.dp = {-k * sn * c2, k * c * c2};
  j.ddp = {-k * (c * c2 - 2.0 * sn * s2), k * (-sn * c2 - 2.0 * c * s2)};
  return j;
}

double parametric_curvature(double theta) {
  const ArcJet j = gamma1_jet(theta);
  const double speed = norm(j.dp);
  return -cross(j.dp, j.ddp) / (speed * speed * speed);
}

double curvature_residual(double theta) {
  const double formula = (kSqrt2 / 3.0) / std::cos(2.0 * theta);
  return std::abs(parametric_curvature(theta) - formula);
}

ProfileCurve::ProfileCurve(int grid_size, double series_switch)
    : series_switch_(series_switch) {
  if (grid_size < 8) throw DomainError("ProfileCurve: grid too small");
  grid_.resize(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    const double u = static_cast<double>(i) / (grid_size - 1);
    double theta = kPi / 2.0 - (kPi / 4.0) * std::cos(kPi * u);
    if (i == 0) theta = kThetaLo;
    if (i == grid_size - 1) theta = kThetaHi;
    ThetaSample& ts = grid_[static_cast<std::size_t>(i)];
    ts.theta = theta;
    ts.p = gamma1_point(theta);
    ts.kappa = (i == 0 || i == grid_size - 1) ? -INFINITY
                                              : parametric_curvature(theta);
  }
  // Pin the endpoints to their exact values so the bracket covers [-1, 1].
  grid_.front().p = {-1.0, 1.0};
  grid_.back().p = {1.0, 1.0};
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i].p.x > grid_[i - 1].p.x)) {
      throw NumericalError("ProfileCurve: p1 not strictly increasing on grid");
    }
  }
}

double ProfileCurve::theta_of(double s) const {
  if (!(std::abs(s) <= 1.0)) throw DomainError("theta_of: |s| > 1");
  if (s == -1.0) return kThetaLo;
  if (s == 1.0) return kThetaHi;
  auto it = std::lower_bound(
      grid_.begin(), grid_.end(), s,
      [](const ThetaSample& ts, double value) { return ts.p.x < value; });
  if (it == grid_.begin()) return kThetaLo;
  const ThetaSample& hi = *it;
  const ThetaSample& lo = *(it - 1);
  if (hi.p.x == s) return hi.theta;
  double a = lo.theta;
  double b = hi.theta;
  double theta = a + (b - a) * (s - lo.p.x) / (hi.p.x - lo.p.x);
  // Safeguarded Newton on p1(theta) - s inside the bracket.
  for (int iter = 0; iter < 100; ++iter) {
    const double f = p1_of(theta) - s;
    if (f == 0.0) return theta;
    if (f < 0.0) a = theta; else b = theta;
    const double df = dp1_of(theta);
    double next = theta - f / df;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - theta) <= 4e-16 * std::abs(theta) || b - a <= 4e-16) {
      return next;
    }
    theta = next;
  }
  std::ostringstream msg;
  msg << "theta_of: root find did not converge for s=" << s << " bracket=["
      << a << ", " << b << "]";
  throw NumericalError(msg.str());
}

PhiValue ProfileCurve::eval_grid(double s) const {
  return phi_at_theta(theta_of(s));
}

PhiValue ProfileCurve::series(double s) const {
  PhiValue out = series_at_r(std::sqrt(1.0 - std::abs(s)));
  if (s < 0.0) {
    out.d1 = -out.d1;
    out.d3 = -out.d3;
  }
  return out;
}

PhiValue ProfileCurve::series_at_r(double r) {
  double phi = 0.0, d1 = 0.0, e = 0.0, de = 0.0;
  double rp = 1.0;
  for (std::size_t i = 0; i < kPhiSeries.size(); ++i) {
    phi += kPhiSeries[i] * rp;
    d1 += kD1Series[i] * rp;
    if (i < kScaledD2Series.size()) e += kScaledD2Series[i] * rp;
    rp *= r;
  }
  // phi''' = d/ds (e / r) = -(1/(2r)) d/dr (e / r) = (e - r e_r) / (2 r^3)
  rp = 1.0;
  for (std::size_t i = 1; i < kScaledD2Series.size(); ++i) {
    de += static_cast<double>(i) * kScaledD2Series[i] * rp;
    rp *= r;
  }
  PhiValue out;
  out.phi = phi;
  out.d1 = d1;
  out.d2 = r > 0.0 ? e / r : INFINITY;
  out.d3 = r > 0.0 ? (e - r * de) / (2.0 * r * r * r) : INFINITY;
  return out;
}

double ProfileCurve::scaled_d2_series(double r) {
  double e = 0.0, rp = 1.0;
  for (double c : kScaledD2Series) {
    e += c * rp;
    rp *= r;
  }
  return e;
}

PhiValue ProfileCurve::eval_at_r(double r) const {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("phi_eval: r outside [0, 1]");
  if (r * r < series_switch_) return series_at_r(r);
  return eval_grid(1.0 - r * r);
}

double ProfileCurve::scaled_d2_at_r(double r) const {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("scaled_d2: r outside [0, 1]");
  if (r * r < series_switch_) return scaled_d2_series(r);
  return r * eval_grid(1.0 - r * r).d2;
}

PhiValue ProfileCurve::eval(double s) const {
  if (!(std::abs(s) <= 1.0)) throw DomainError("phi_eval: |s| > 1");
  if (1.0 - std::abs(s) < series_switch_) return series(s);
  return eval_grid(s);
}

double ProfileCurve::scaled_d2(double s) const {
  if (!(std::abs(s) <= 1.0)) throw DomainError("scaled_d2: |s| > 1");
  const double r = std::sqrt(1.0 - std::abs(s));
  if (r * r < series_switch_) return scaled_d2_series(r);
  return r * eval_grid(s).d2;
}

ExpansionFit ProfileCurve::expansion_check(int n_fit) const {
  // Fit y(r) = c0 + c1 r on s in [0.99, 0.9999], r = (1-s)^{1/2}, log-spaced.
  Eigen::MatrixXd A(n_fit, 2);
  Eigen::VectorXd y1(n_fit), y2(n_fit), y3(n_fit);
  const double lo = std::log(1e-4);
  const double hi = std::log(1e-2);
  for (int i = 0; i < n_fit; ++i) {
    const double one_minus_s = std::exp(lo + (hi - lo) * i / (n_fit - 1));
    const double s = 1.0 - one_minus_s;
    const double r = std::sqrt(one_minus_s);
    const PhiValue pv = eval(s);
    A(i, 0) = 1.0;
    A(i, 1) = r;
    y1(i) = (1.0 - pv.d1) / r;
    y2(i) = pv.d2 * r;
    y3(i) = pv.d3 * r * r * r;
  }
  const auto qr = A.colPivHouseholderQr();
  ExpansionFit fit;
  fit.d1_coeff = qr.solve(y1)(0);
  fit.d2_coeff = qr.solve(y2)(0);
  fit.d3_coeff = qr.solve(y3)(0);
  const double ref2 = std::sqrt(2.0 / 3.0);
  fit.d1_rel_dev = std::abs(fit.d1_coeff - 2.0 * ref2) / (2.0 * ref2);
  fit.d2_rel_dev = std::abs(fit.d2_coeff - ref2) / ref2;
  fit.d3_rel_dev = std::abs(fit.d3_coeff - 0.5 * ref2) / (0.5 * ref2);
  return fit;
}

void ProfileCurve::write_csv(const std::string& path, int stride) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "theta,p1,p2,phi_d1,phi_d2,kappa\n";
  char buf[256];
  for (std::size_t i = 0; i < grid_.size(); i += static_cast<std::size_t>(stride)) {
    const ThetaSample& ts = grid_[i];
    const bool endpoint = (i == 0 || i + 1 == grid_.size());
    const PhiValue pv = endpoint ? series(ts.p.x) : phi_at_theta(ts.theta);
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  ts.theta, ts.p.x, ts.p.y, pv.d1, pv.d2, ts.kappa);
    out << buf;
  }
}

}  // namespace degenlab
