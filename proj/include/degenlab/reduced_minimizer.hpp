#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "degenlab/common.hpp"

namespace degenlab {

class ParaboloidEnvelope;

/// Polar structured triangulation of {r1, r2 >= 0, |r| <= 1}: rings of
/// radial spacing h, an even number of angular sectors, quads split along
/// diagonals mirrored about r1 = r2, and a fan at the origin.
struct QuarterDiskMesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<Vec2, 3>> shape_grads;  // gradients of the P1 basis
  std::vector<Vec2> centroids;
  std::vector<double> weights;  // (r1 r2)^k at the centroid times the area
  std::vector<bool> on_arc;
  std::vector<int> mirror;      // node index of the reflection r1 <-> r2
  double h = 0.0;
  int k = 1;
  int rings = 0;    // radial cells
  int sectors = 0;  // angular cells
};

QuarterDiskMesh build_quarter_disk_mesh(double h, int k);

/// Convex integrand on R^2 with value, gradient and Hessian.
struct Integrand {
  std::function<double(Vec2, Vec2*, Sym2*)> eval;
  std::string name;
};

Integrand control_integrand();  // |p|^2 / 2
Integrand envelope_integrand(const ParaboloidEnvelope& env);

/// E_h(u) = sum_e w_e G(grad u|_e) with its nodal gradient.
class ReducedEnergy {
 public:
  ReducedEnergy(const QuarterDiskMesh& mesh, Integrand integrand)
      : mesh_(&mesh), integrand_(std::move(integrand)) {}

  double value(const std::vector<double>& u, Exec exec = Exec::kParallel) const;
  double value_and_gradient(const std::vector<double>& u, std::vector<double>& grad,
                            Exec exec = Exec::kParallel) const;
  std::vector<Vec2> element_gradients(const std::vector<double>& u) const;
  const QuarterDiskMesh& mesh() const { return *mesh_; }
  const Integrand& integrand() const { return integrand_; }

 private:
  const QuarterDiskMesh* mesh_;
  Integrand integrand_;
};

enum class Optimizer { kNewton, kGradientDescent };

struct MinimizeOptions {
  double tol = 1e-6;
  int max_iter = 200;
  Optimizer method = Optimizer::kNewton;
  double armijo = 1e-4;
  Exec exec = Exec::kParallel;
  bool verbose = false;  // one line per iteration on stderr
  /// Stay in the odd subspace u(r1, r2) = -u(r2, r1) when the arc data is odd.
  bool exploit_symmetry = true;
};

struct MinimizeResult {
  std::vector<double> u;
  double energy = 0.0;
  double projected_gradient = 0.0;  // max over free nodes of |dE/du_i|
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
  bool symmetric = false;  // iterates were kept odd under r1 <-> r2
  std::string message;
  std::vector<double> energy_history;
};

/// Lumped weighted mass m_i = sum over incident elements of w_e / 3.
std::vector<double> lumped_mass(const QuarterDiskMesh& mesh);
/// Largest nodal derivative over the free (off-arc) nodes.
double projected_gradient(const QuarterDiskMesh& mesh, const std::vector<double>& grad);

/// Interpolant of v(r) = (r2^2 - r1^2) / (sqrt(2) |r|) at the nodes.
std::vector<double> interpolant_of_v(const QuarterDiskMesh& mesh);
/// Bilinear interpolation in (|r|, angle) of a field on a coarser mesh, with
/// the arc values of the fine mesh set to v.
std::vector<double> prolongate(const QuarterDiskMesh& coarse, const std::vector<double>& u,
                               const QuarterDiskMesh& fine);
/// v on the arc and zero elsewhere.
std::vector<double> boundary_only_field(const QuarterDiskMesh& mesh);

/// Newton (sparse LDLT on the free nodes) or gradient descent, each with
/// Armijo backtracking. Arc nodes keep the values of u0.
MinimizeResult minimize(const ReducedEnergy& energy, std::vector<double> u0,
                        const MinimizeOptions& options = {});

/// One solve of a staged minimization. A stage on a different mesh starts
/// from the previous result interpolated onto its mesh.
struct SolveStage {
  const ReducedEnergy* energy = nullptr;
  MinimizeOptions options;
};

/// Runs the stages in order. The result is the last stage's, with the
/// iteration counts and energy histories of all stages accumulated.
MinimizeResult minimize_staged(const std::vector<SolveStage>& stages, std::vector<double> u0);

struct FieldDifference {
  double sup = 0.0;           // max over nodes
  double weighted_rms = 0.0;  // sqrt(sum m_i d_i^2 / sum m_i) with the lumped mass
};
FieldDifference field_difference(const QuarterDiskMesh& mesh, const std::vector<double>& a,
                                 const std::vector<double>& b);

struct LocalizationPoint {
  double r = 0.0;
  double diameter = 0.0;
  std::size_t elements = 0;
};

/// Diameter of the element gradients with centroid in B_r(0). Throws
/// DomainError for r below three radial cells.
std::vector<LocalizationPoint> localization_diagnostic(const ReducedEnergy& energy,
                                                       const std::vector<double>& u,
                                                       const std::vector<double>& radii);

/// Diameter of a planar point set (convex hull, then all hull pairs).
double point_set_diameter(std::vector<Vec2> pts);

void write_field_csv(const QuarterDiskMesh& mesh, const std::vector<double>& u,
                     const std::string& path);

}  // namespace degenlab
