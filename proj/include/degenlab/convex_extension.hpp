#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "degenlab/support_data.hpp"

namespace degenlab {

struct EnvelopeEval {
  double value = 0.0;
  Vec2 grad;
  Sym2 hess;
  int arc = 0;
  std::size_t node = 0;  // nearest node of the active paraboloid on its arc
  double lambda = 0.0;   // position inside the segment [node, node + 1]
  bool ridge = false;    // a second, distinct maximizer ties the best one
};

struct EnvelopeOptions {
  /// Refine the discrete maximum over the cubic-Hermite interpolated family.
  bool refine = true;
  /// Candidates within this value gap of the best node seed a refinement.
  double candidate_gap = 1e-6;
  /// Temperature of a log-sum-exp over distinct local-maximum branches. Zero
  /// keeps the plain maximum; a positive value makes G smooth across ridges
  /// and leaves it unchanged wherever one branch dominates by many tau.
  double ridge_smoothing = 0.0;
};

/// G(x) = gamma |x|^2 + max_p [c(p) + b(p).x] with c = g - v.p + gamma |p|^2
/// and b = v - 2 gamma p, which is the pointwise maximum of the paraboloids
/// g(p) + v(p).(x - p) + gamma |x - p|^2. The refined variant takes the
/// supremum over the cubic-Hermite interpolant in the normal angle of
/// (c, b) between consecutive samples, which keeps G convex and makes it C^1
/// where the maximizer is unique. Evaluation folds x into the sector
/// 0 <= x1 <= x2, so the dihedral symmetry is exact.
class ParaboloidEnvelope {
 public:
  /// Samples must carry theta derivatives and list each arc in increasing
  /// theta. Arcs holding s = 1 but not s = -1 get the mirrored endpoint.
  /// Throws ConstructionError unless 0 < gamma_tilde < gamma_emp.
  ParaboloidEnvelope(const std::vector<SupportPoint>& samples, double gamma_tilde,
                     double gamma_emp, EnvelopeOptions options = {});

  double value(Vec2 x) const { return eval(x).value; }
  EnvelopeEval eval(Vec2 x) const;
  /// The plain maximum over sample paraboloids, without folding or refinement.
  EnvelopeEval eval_discrete(Vec2 x) const;

  double gamma_tilde() const { return gamma_; }
  const EnvelopeOptions& options() const { return options_; }
  std::size_t node_count() const { return flat_.size(); }

  struct Node {
    double theta = 0.0;
    Vec2 p;
    double g = 0.0;
    Vec2 v;
    Vec2 dp;
    Vec2 dv;
    double c = 0.0;
    double dc = 0.0;
    Vec2 b;
    Vec2 db;
    // Derivatives for the segment that starts at this node.
    Vec2 dv_next;
    double dc_next = 0.0;
    Vec2 db_next;
  };
  const std::vector<Node>& arc_nodes(int arc) const { return arcs_[arc & 3]; }

 private:
  struct Ref {
    int arc;
    std::size_t k;
  };
  struct Block {
    std::size_t begin, end;
    double c_max;
    Vec2 b_lo, b_hi;
  };
  struct Candidate {
    double q;
    int arc;
    std::size_t k;
  };

  EnvelopeEval eval_canonical(Vec2 y) const;
  void discrete_candidates(Vec2 y, std::vector<Candidate>& out, double gap) const;

  double gamma_;
  EnvelopeOptions options_;
  std::array<std::vector<Node>, 4> arcs_;
  std::vector<Ref> flat_;
  std::vector<Block> blocks_;
};

struct SelfInterpolation {
  double max_value_error = 0.0;
  double max_grad_error = 0.0;
  std::size_t wrong_argmax = 0;  // samples whose active paraboloid is not their own
};

/// G and grad G against the data at each sample used to build the envelope.
SelfInterpolation self_interpolation(const ParaboloidEnvelope& env,
                                     const std::vector<SupportPoint>& samples,
                                     Exec exec = Exec::kParallel);

struct ConvexityCertificate {
  double min_margin = 0.0;  // min of t G(x) + (1-t) G(y) - G(tx + (1-t)y) - gamma t(1-t)|x-y|^2
  std::size_t triples = 0;
};

/// Random triples in the ball of the given radius.
ConvexityCertificate convexity_certificate(const ParaboloidEnvelope& env,
                                           std::size_t triples, double radius,
                                           std::uint64_t seed,
                                           Exec exec = Exec::kParallel);

/// Local extension near the arcs: g(pi) + v(pi).(x - pi) + A d^2 with pi
/// the nearest point of Sigma_v. Throws DomainError when the projection is
/// ambiguous between arcs.
double local_extension_g0(const ParaboloidEnvelope& env, Vec2 x, double A);

/// Nearest point of the interpolated arc family, with its tangency data.
struct Projection {
  Vec2 point;
  double g = 0.0;
  Vec2 v;
  double distance = 0.0;
  int arc = 0;
};
Projection project_to_sigma(const ParaboloidEnvelope& env, Vec2 x);

/// Tangential and normal second differences of G at top-arc samples
/// approaching the cusp, with step eps.
struct CurvatureProbe {
  double s = 0.0;
  double tangential = 0.0;
  double normal = 0.0;
};
std::vector<CurvatureProbe> second_difference_probe(const ParaboloidEnvelope& env,
                                                    const OneDConstruction& oned,
                                                    const std::vector<double>& s_values,
                                                    double eps);

/// F(q) = G(|q1|, |q2|) on R^{k+1} x R^{k+1}.
class LiftedIntegrand {
 public:
  LiftedIntegrand(const ParaboloidEnvelope& env, int k) : env_(&env), k_(k) {}

  int k() const { return k_; }
  /// Value and gradient; q and grad have length 2k + 2.
  double eval(const double* q, double* grad) const;
  double value(const double* q) const { return eval(q, nullptr); }

 private:
  const ParaboloidEnvelope* env_;
  int k_;
};

void write_envelope_grid_csv(const ParaboloidEnvelope& env, double half_width,
                             int n, const std::string& path);

}  // namespace degenlab
