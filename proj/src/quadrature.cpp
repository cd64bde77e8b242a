#include "degenlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "degenlab/common.hpp"

namespace degenlab {

namespace {

struct Panel {
  double a, b, value, error, l1;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// One 15/31-point Gauss-Kronrod panel. Boost supplies the nodes and weights;
// the error is scaled to [a, b] here.
Panel gk_panel(const std::function<double(double)>& f, double a, double b) {
  using K = boost::math::quadrature::gauss_kronrod<double, 31>;
  using G = boost::math::quadrature::gauss<double, 15>;
  const auto& x = K::abscissa();
  const auto& wk = K::weights();
  const auto& wg = G::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double f0 = f(mid);
  double kr = f0 * wk[0];
  double ga = f0 * wg[0];
  double l1 = std::abs(f0) * wk[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(mid + half * x[i]);
    const double fm = f(mid - half * x[i]);
    kr += (fp + fm) * wk[i];
    l1 += (std::abs(fp) + std::abs(fm)) * wk[i];
    if (i % 2 == 0) ga += (fp + fm) * wg[i / 2];
  }
  const double err = std::max(std::abs(kr - ga), 2.0 * 2.2e-16 * std::abs(kr));
  return {a, b, half * kr, half * err, half * l1};
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a,
                     double b, double rel_tol, double abs_tol) {
  if (a == b) return {};
  if (b < a) {
    QuadResult r = integrate(f, b, a, rel_tol, abs_tol);
    r.value = -r.value;
    return r;
  }
  std::priority_queue<Panel> heap;
  Panel first = gk_panel(f, a, b);
  double value = first.value, error = first.error, l1 = first.l1;
  heap.push(first);
  constexpr int kMaxPanels = 4096;
  auto target = [&] { return std::max(abs_tol, rel_tol * std::max(std::abs(value), l1)); };
  while (error > target() && static_cast<int>(heap.size()) < kMaxPanels) {
    const Panel worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      heap.push(worst);
      break;
    }
    const Panel left = gk_panel(f, worst.a, m);
    const Panel right = gk_panel(f, m, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  value = error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(value)) {
    throw NumericalError("integrate: non-finite result");
  }
  const double tol = std::max(abs_tol, 8.0 * rel_tol * std::max(std::abs(value), l1));
  if (error > tol) {
    std::ostringstream msg;
    msg << "integrate: tolerance not met on [" << a << ", " << b
        << "] error=" << error << " target=" << tol;
    throw NumericalError(msg.str());
  }
  return {value, error};
}

QuadResult integrate_toward_one(const std::function<double(double, double)>& g,
                                double x, double y,
                                std::span<const double> breakpoints,
                                double rel_tol, double abs_tol) {
  if (x == y) return {};
  const double sign = x < y ? 1.0 : -1.0;
  const double lo = std::min(x, y);
  const double hi = std::max(x, y);
  // t decreases as s increases; integrate t from t(hi) to t(lo).
  std::vector<double> cuts{lo, hi};
  for (double b : breakpoints) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  auto h = [&g](double t) { return g(1.0 - t * t, t) * 2.0 * t; };
  QuadResult total;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double t_hi = std::sqrt(1.0 - cuts[i]);
    const double t_lo = std::sqrt(1.0 - cuts[i + 1]);
    const QuadResult piece = integrate(h, t_lo, t_hi, rel_tol, abs_tol);
    total.value += piece.value;
    total.error += piece.error;
  }
  total.value *= sign;
  return total;
}

}  // namespace degenlab
