#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "degenlab/eta_builder.hpp"

namespace degenlab {

/// One tangency datum on Sigma_v. Arc m is the image of the top arc under
/// rotate_quarter(., m); theta is the parent normal angle, and dp, dv are
/// derivatives with respect to it.
struct SupportPoint {
  int arc = 0;
  double s = 0.0;
  double theta = 0.0;
  Vec2 p;
  double g = 0.0;
  Vec2 v;
  Vec2 dp;
  Vec2 dv;       // d/dtheta of v from the side of decreasing theta
  Vec2 dv_next;  // from the side of increasing theta; differs at kinks of eta
};

/// Datum on arc `arc` at parent abscissa s = sign * (1 - r^2).
SupportPoint support_point(const OneDConstruction& oned, double r, int sign,
                           int arc);

/// n samples per arc at s_j = -cos(pi (j + offset) / n). With offset 0 the
/// indices run over j = 1..n, so each arc keeps s = 1 and drops the shared
/// s = -1 junction; with offset in (0, 1) they run over j = 0..n-1.
std::vector<SupportPoint> build_support(const OneDConstruction& oned, int n_per_arc,
                                        double offset = 0.0);

struct HResult {
  double x = 0.0;
  double y = 0.0;
  double H = 0.0;
  double ratio = 0.0;   // H / max{(1-x)^{1/2}, (1-y)^{1/2}}
  double weight = 0.0;  // int_x^y phi''(s) (y - s) ds
  double raw = 0.0;     // f and phi second differences, equal to weight * H
};

/// H at x = 1 - tx^2, y = 1 - ty^2. Takes the t-coordinates so pairs near
/// s = 1 keep their separation.
HResult h_quantity_t(const OneDConstruction& oned, double tx, double ty);
HResult h_quantity(const OneDConstruction& oned, double x, double y);
/// The diagonal value H(x, x).
double h_limit(const OneDConstruction& oned, double x);

struct HBoundResult {
  int n = 0;
  double c0 = 0.0;
  double argmin_x = 0.0;
  double argmin_y = 0.0;
  double plateau_min_H = 0.0;  // min of H with x, y <= 1 - delta
  std::vector<double> t_grid;  // x_i = 1 - t_i^2
  std::vector<double> ratio;   // row-major n x n, NaN at (1, 1)
};

/// Ratio scan on the n x n grid uniform in t = (1 - x)^{1/2}.
HBoundResult hbound_scan(const OneDConstruction& oned, int n,
                         Exec exec = Exec::kParallel);

struct ReflectionMargins {
  double axis_min = 0.0;  // min (f' - h phi') / s
  double axis_argmin = 0.0;
  double diagonal_min = 0.0;  // min ((1 + phi') h - f') / (phi - s)
  double diagonal_argmin = 0.0;
  double plateau_min = 0.0;   // min of (1 + phi') eta - f' on [0, 1 - delta]
  double endpoint_min = 0.0;  // min of (1+2k) v.(-1,1) / (a r / 2) on (1 - delta, 1)
};

ReflectionMargins reflection_check(const OneDConstruction& oned, int n);

struct TangsepResult {
  double gamma = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  double gamma_same_arc = 0.0;
  std::size_t pairs = 0;
  bool exhaustive = false;
};

/// Gap g(q) - g(p) - v(p).(q - p) over |q - p|^2, minimized over ordered
/// pairs. Exhaustive for at most 1500 samples per arc, otherwise n_pairs
/// random pairs stratified over the 16 arc combinations.
TangsepResult tangsep_scan(const std::vector<SupportPoint>& points,
                           std::size_t n_pairs, std::uint64_t seed,
                           Exec exec = Exec::kParallel);

struct JunctionResiduals {
  double position = 0.0;
  double value = 0.0;
  double vector = 0.0;
  double parallel = 0.0;  // |cross((f' - h phi', h)(1), (1, 1))|
};

JunctionResiduals junction_residuals(const OneDConstruction& oned);

void write_support_csv(const std::vector<SupportPoint>& points,
                       const std::string& path);
void write_hgrid_csv(const HBoundResult& scan, const std::string& path);

}  // namespace degenlab
