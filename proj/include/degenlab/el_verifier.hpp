#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "degenlab/convex_extension.hpp"
#include "degenlab/eta_builder.hpp"

namespace degenlab {

/// Principal curvatures of the bi-rotational hypersurface through the top arc
/// and the tangential Hessian eigenvalues of F there, in the order
/// (profile, k copies around the q1 block, k copies around the q2 block).
struct IdentityResidual {
  double s = 0.0;
  std::array<double, 3> curvature{};
  std::array<double, 3> eigenvalue{};
  double residual = 0.0;  // sum over principal directions of eigenvalue / curvature
};

/// Throws DomainError unless 0 < s <= 1 - 1e-3. h_offset shifts h before the
/// assembly, to check that the residual reacts.
IdentityResidual reduced_identity_residual(const OneDConstruction& oned, double s,
                                           double h_offset = 0.0);

struct ReducedELTerms {
  double theta = 0.0;
  double s = 0.0;
  double tangential = 0.0;  // tr(D^2G(grad v) D^2v) on the unit circle
  double radial = 0.0;      // k grad G(grad v) . (1/x1, 1/x2)
  double residual = 0.0;
};

/// Throws DomainError unless pi/4 + 1e-3 <= theta <= pi/2.
ReducedELTerms reduced_el_residual(const OneDConstruction& oned, double theta);

/// w(y) = (|y2|^2 - |y1|^2) / (sqrt(2) |y|) on R^{k+1} x R^{k+1}.
double w_value(const double* y, int k);
void w_gradient(const double* y, int k, double* out);

/// grad G at grad v(r1, r2) for r1, r2 >= 0, from the one-dimensional data.
Vec2 flux_2d(const OneDConstruction& oned, double r1, double r2);
/// grad F(grad w(y)), the lift of flux_2d.
void flux_lift(const OneDConstruction& oned, const double* y, int k, double* out);

/// psi(y) = P(y) (1 - |y|^2)^3 on the unit ball, P quadratic.
class PolyBump {
 public:
  PolyBump(int dim, double c0, std::vector<double> linear, std::vector<double> quadratic);
  /// Standard normal coefficients. With block_symmetric, P depends on
  /// |y1|^2 and |y2|^2 only.
  static PolyBump random(int k, std::mt19937_64& rng, bool block_symmetric);
  static PolyBump radial(int k);

  int dim() const { return dim_; }
  bool block_symmetric() const { return block_symmetric_; }
  double value(const double* y) const;
  /// Returns psi and writes its gradient.
  double gradient(const double* y, double* out) const;

 private:
  int dim_;
  double c0_;
  std::vector<double> lin_;
  std::vector<double> quad_;  // dim x dim, symmetric
  bool block_symmetric_ = false;
};

struct McEstimate {
  double estimate = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool finite = true;
};

struct McOptions {
  std::size_t n = 1000000;
  std::uint64_t seed = 1;
  int strata = 64;  // equal-probability strata in sin^2 of the cone angle
  Exec exec = Exec::kParallel;
};

/// Monte Carlo estimates of int_{B1} grad F(grad w) . grad psi over the unit
/// ball of R^{2k+2}, one per test function, all on the same samples.
std::vector<McEstimate> weak_form_residual(const OneDConstruction& oned,
                                           const std::vector<PolyBump>& tests,
                                           const McOptions& options);

struct GapEstimate {
  double t = 0.0;
  double gap = 0.0;  // E(w + t psi) - E(w)
  double sigma = 0.0;
  double grad_norm2 = 0.0;  // int |t grad psi|^2
  bool block_symmetric = false;
};

struct Perturbation {
  PolyBump psi;
  double t = 1.0;
};

/// Paired estimator: both energies use the same samples.
std::vector<GapEstimate> minimality_test(const LiftedIntegrand& F,
                                         const std::vector<Perturbation>& perturbations,
                                         const McOptions& options);

/// Largest |w(lambda y) - lambda w(y)| / (lambda |y|) over random pairs.
double one_homogeneity_check(int k, std::size_t n, std::uint64_t seed);

struct SaddleCheck {
  std::size_t points = 0;
  std::size_t mixed = 0;  // Hessians with a positive and a negative eigenvalue
};
/// Finite-difference Hessian of w at random points outside a collar of the cone.
SaddleCheck saddle_check(int k, std::size_t n, std::uint64_t seed, double collar = 1e-3);

/// Largest |flux_lift - finite differences of F at grad w| over random points
/// outside the collar.
double flux_consistency(const OneDConstruction& oned, const LiftedIntegrand& F,
                        std::size_t n, std::uint64_t seed, double collar = 1e-3);

}  // namespace degenlab
