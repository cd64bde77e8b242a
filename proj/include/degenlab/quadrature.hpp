#pragma once

#include <functional>
#include <span>

namespace degenlab {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod on [a, b]. Throws NumericalError when the error
/// estimate exceeds max(abs_tol, rel_tol * |value|).
QuadResult integrate(const std::function<double(double)>& f, double a,
                     double b, double rel_tol = 1e-13, double abs_tol = 1e-15);

/// Integral over s in [x, y] (either order) of g(s) for integrands with a
/// (1-s)^{-1/2} singularity at s = 1. Uses s = 1 - t^2 and splits at the
/// given breakpoints (values of s). The integrand is called as g(s, t) with
/// s = 1 - t^2, so it can use t directly where 1 - s would lose digits.
QuadResult integrate_toward_one(const std::function<double(double, double)>& g,
                                double x, double y,
                                std::span<const double> breakpoints = {},
                                double rel_tol = 1e-13, double abs_tol = 1e-15);

}  // namespace degenlab
