#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "degenlab/profile_curve.hpp"

namespace degenlab {

/// eta(s) = min{1 + mu, 1/2 + a (1 - |s|)^{1/2}}, optionally with the corner
/// replaced by a concave C-infinity blend of half-width blend_width (in s).
struct EtaConfig {
  double delta = 0.01;
  double a = 10.0;
  double mu = 0.0;
  double blend_width = 0.0;
  int k = 1;

  double plateau() const { return 1.0 + mu; }
  /// Crossing point of the plateau and the square-root branch.
  double crossing() const;
  /// Largest s on which eta equals the plateau value exactly.
  double plateau_end() const;
  /// Abscissas in (0, 1) where eta fails to be smooth or the blend starts/ends.
  std::vector<double> breakpoints() const;

  double eta(double s) const { return eta_at_r(std::sqrt(std::max(0.0, 1.0 - std::abs(s)))); }
  /// eta at |s| = 1 - r^2.
  double eta_at_r(double r) const;
  /// (1 - |s|)^{1/2} eta'(s), finite up to |s| = 1.
  double scaled_deta(double s) const;
  double scaled_deta_at_r(double r) const;

 private:
  double blend_value_width() const;
};

struct EtaMargins {
  double eta_at_one_error = 0.0;  // |eta(1) - 1/2|
  double evenness_error = 0.0;
  double concavity_margin = 0.0;  // min of -second differences
  double lower_bound_margin = 0.0;  // condition (ii)
  double plateau_margin = 0.0;      // plateau_end - (1 - delta)
  double mu = 0.0;
  double integral_error = 0.0;      // |int_0^1 eta phi'' - 1|
};

/// Solves for mu so that int_0^1 eta phi'' = 1. Throws ConstructionError when
/// delta is outside (0, 0.2] or the root cannot be bracketed in (0, 1/2).
EtaConfig build_eta(double delta, const ProfileCurve& profile, int k = 1,
                    double blend_width = 0.0);

double eta_phi2_integral(const EtaConfig& cfg, const ProfileCurve& profile);

/// Values of the one-dimensional data at a single abscissa, plus
/// derivatives scaled by r = (1-|s|)^{1/2} so they stay finite at |s| = 1.
struct OneDJet {
  double s = 0.0;
  PhiValue phi;
  double scaled_phi2 = 0.0;
  double eta = 0.0;
  double scaled_deta = 0.0;
  double f = 0.0;
  double fp = 0.0;
  double scaled_fpp = 0.0;
  double ratio = 0.0;  // f'/phi'
  double h = 0.0;
  double scaled_dh = 0.0;
};

/// f'' = eta phi'' with f'(0) = f(0) = 0, and h from the reduced
/// Euler-Lagrange relation. All evaluators are pure.
class OneDConstruction {
 public:
  OneDConstruction(std::shared_ptr<const ProfileCurve> profile, EtaConfig cfg,
                   int table_size = 256);

  double eta(double s) const { return cfg_.eta(s); }
  double f_prime(double s) const;
  double f(double s) const;
  /// f'/phi', with its limit eta(0) at s = 0.
  double ratio(double s) const;
  double h(double s) const;
  /// (f' - h phi', h): the gradient datum on the top arc.
  Vec2 tangent_vector(double s) const;

  OneDJet jet(double s) const;
  /// Jet at s = 1 - r^2 >= 0.
  OneDJet jet_at_r(double r) const;

  const EtaConfig& eta_config() const { return cfg_; }
  const ProfileCurve& profile() const { return *profile_; }
  std::shared_ptr<const ProfileCurve> profile_ptr() const { return profile_; }
  int k() const { return cfg_.k; }

  EtaMargins margins(int grid = 10000) const;

  void write_csv(const std::string& path, int n = 2001) const;

 private:
  struct Corrections {
    double c1 = 0.0;  // int_0^s (eta - eta0) phi''
    double c3 = 0.0;  // int_0^s u (eta - eta0) phi''
  };
  Corrections corrections(double s) const;  // s >= 0
  OneDJet jet_impl(double u, double r) const;

  std::shared_ptr<const ProfileCurve> profile_;
  EtaConfig cfg_;
  double plateau_end_ = 0.0;
  double phi0_ = 0.0;
  double t_start_ = 0.0;
  double dt_ = 0.0;
  std::vector<double> node_s_;
  std::vector<Corrections> node_c_;
  std::vector<double> breaks_;
};

}  // namespace degenlab
