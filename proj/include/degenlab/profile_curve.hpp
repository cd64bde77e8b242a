#pragma once

#include <string>
#include <vector>

#include "degenlab/common.hpp"

namespace degenlab {

/// One node of the normal-angle parametrization of the top arc.
struct ThetaSample {
  double theta = 0.0;
  Vec2 p;             // gradient of v at (cos theta, sin theta)
  double kappa = 0.0;  // signed curvature w.r.t. the upward normal
};

/// phi and its first three derivatives at one abscissa.
struct PhiValue {
  double phi = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// Parametrization of the top arc by normal angle, with analytic
/// first and second theta-derivatives.
struct ArcJet {
  Vec2 p;
  Vec2 dp;
  Vec2 ddp;
};

// Closed forms for the two-dimensional one-homogeneous function
// v(x) = (x2^2 - x1^2) / (sqrt(2) |x|).
double v2d(Vec2 x);
Vec2 grad_v2d(Vec2 x);
Sym2 hess_v2d(Vec2 x);

/// grad v on the unit circle for theta in [pi/4, 3pi/4].
Vec2 gamma1_point(double theta);
ArcJet gamma1_jet(double theta);

/// Curvature of the top arc from the parametrization, with the sign
/// convention kappa = -phi'' / (1 + phi'^2)^{3/2}.
double parametric_curvature(double theta);

/// |parametric curvature - (sqrt(2)/3) sec(2 theta)|.
double curvature_residual(double theta);

struct ExpansionFit {
  double d1_coeff = 0.0;   // limit of (1 - phi') / (1-s)^{1/2}
  double d2_coeff = 0.0;   // limit of phi'' (1-s)^{1/2}
  double d3_coeff = 0.0;   // limit of phi''' (1-s)^{3/2}
  double d1_rel_dev = 0.0;
  double d2_rel_dev = 0.0;
  double d3_rel_dev = 0.0;
};

/// The arc Gamma_1 written as the graph of an even convex function phi on
/// [-1, 1]. Immutable after construction.
class ProfileCurve {
 public:
  static constexpr int kDefaultGridSize = 4096;
  static constexpr double kDefaultSeriesSwitch = 1e-3;

  explicit ProfileCurve(int grid_size = kDefaultGridSize,
                        double series_switch = kDefaultSeriesSwitch);

  /// phi, phi', phi'', phi''' at s in [-1, 1].
  PhiValue eval(double s) const;

  /// Normal angle theta in [pi/4, 3pi/4] with p1(theta) = s.
  double theta_of(double s) const;

  /// (1 - |s|)^{1/2} * phi''(s); finite on the closed interval.
  double scaled_d2(double s) const;

  /// The same quantities at s = 1 - r^2, without rounding r through s.
  PhiValue eval_at_r(double r) const;
  double scaled_d2_at_r(double r) const;

  /// Endpoint series branch, valid for small r = (1 - |s|)^{1/2}.
  PhiValue series(double s) const;
  static PhiValue series_at_r(double r);
  static double scaled_d2_series(double r);

  const std::vector<ThetaSample>& grid() const { return grid_; }
  double series_switch() const { return series_switch_; }

  ExpansionFit expansion_check(int n_fit = 200) const;

  /// CSV with columns theta,p1,p2,phi_d1,phi_d2,kappa over the grid.
  void write_csv(const std::string& path, int stride = 16) const;

 private:
  PhiValue eval_grid(double s) const;

  std::vector<ThetaSample> grid_;
  double series_switch_;
};

}  // namespace degenlab
