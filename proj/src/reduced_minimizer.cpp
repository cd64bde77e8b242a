#include "degenlab/reduced_minimizer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "degenlab/convex_extension.hpp"
#include "degenlab/profile_curve.hpp"

namespace degenlab {

namespace {
constexpr double kEps = 2.220446049250313e-16;
}  // namespace

QuarterDiskMesh build_quarter_disk_mesh(double h, int k) {
  if (!(h > 0.0 && h <= 0.25)) throw DomainError("mesh: h must lie in (0, 1/4]");
  if (k < 1) throw DomainError("mesh: k must be >= 1");
  const int nr = static_cast<int>(std::lround(1.0 / h));
  const int nt = 2 * static_cast<int>(std::ceil(kPi / (4.0 * h)));
  QuarterDiskMesh mesh;
  mesh.h = 1.0 / nr;
  mesh.k = k;
  mesh.rings = nr;
  mesh.sectors = nt;
  auto id = [nt](int i, int j) { return 1 + (i - 1) * (nt + 1) + j; };
  mesh.nodes.push_back({0.0, 0.0});
  for (int i = 1; i <= nr; ++i) {
    const double r = static_cast<double>(i) / nr;
    for (int j = 0; j <= nt; ++j) {
      // Upper half of each ring is the exact swap of the lower half.
      const int jj = std::min(j, nt - j);
      const double a = 0.5 * kPi * jj / nt;
      Vec2 p = 2 * jj == nt ? Vec2{r * std::sqrt(0.5), r * std::sqrt(0.5)}
                            : Vec2{r * std::cos(a), r * std::sin(a)};
      if (jj == 0) p = {r, 0.0};
      if (j != jj) p = {p.y, p.x};
      mesh.nodes.push_back(p);
    }
  }
  const int n_nodes = static_cast<int>(mesh.nodes.size());
  mesh.on_arc.assign(n_nodes, false);
  mesh.mirror.assign(n_nodes, 0);
  for (int i = 1; i <= nr; ++i) {
    for (int j = 0; j <= nt; ++j) {
      mesh.on_arc[id(i, j)] = i == nr;
      mesh.mirror[id(i, j)] = id(i, nt - j);
    }
  }
  for (int j = 0; j < nt; ++j) mesh.triangles.push_back({0, id(1, j), id(1, j + 1)});
  for (int i = 1; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if (2 * j < nt) {
        mesh.triangles.push_back({a, b, c});
        mesh.triangles.push_back({a, c, d});
      } else {
        mesh.triangles.push_back({a, b, d});
        mesh.triangles.push_back({b, c, d});
      }
    }
  }
  for (const auto& t : mesh.triangles) {
    const Vec2 a = mesh.nodes[t[0]], b = mesh.nodes[t[1]], c = mesh.nodes[t[2]];
    const double area2 = cross(b - a, c - a);
    if (!(std::abs(area2) > 1e-14)) {
      std::ostringstream msg;
      msg << "mesh: degenerate element at (" << a.x << ", " << a.y << ")";
      throw NumericalError(msg.str());
    }
    mesh.shape_grads.push_back({Vec2{b.y - c.y, c.x - b.x} * (1.0 / area2),
                                Vec2{c.y - a.y, a.x - c.x} * (1.0 / area2),
                                Vec2{a.y - b.y, b.x - a.x} * (1.0 / area2)});
    const Vec2 cen = (a + b + c) * (1.0 / 3.0);
    mesh.centroids.push_back(cen);
    mesh.weights.push_back(std::pow(cen.x * cen.y, k) * 0.5 * std::abs(area2));
  }
  return mesh;
}

Integrand control_integrand() {
  return {[](Vec2 p, Vec2* g, Sym2* H) {
            if (g) *g = p;
            if (H) *H = {1.0, 0.0, 1.0};
            return 0.5 * norm2(p);
          },
          "control"};
}

Integrand envelope_integrand(const ParaboloidEnvelope& env) {
  return {[&env](Vec2 p, Vec2* g, Sym2* H) {
            const EnvelopeEval e = env.eval(p);
            if (g) *g = e.grad;
            if (H) *H = e.hess;
            return e.value;
          },
          "counterexample"};
}

namespace {

Vec2 element_gradient(const QuarterDiskMesh& mesh, std::size_t e,
                      const std::vector<double>& u) {
  const auto& t = mesh.triangles[e];
  const auto& sg = mesh.shape_grads[e];
  return sg[0] * u[t[0]] + sg[1] * u[t[1]] + sg[2] * u[t[2]];
}

struct ElementData {
  double value;
  Vec2 grad;
  Sym2 hess;
};

// Integrand at every element gradient. Per-element results land in their own
// slots, so the assembly that follows is identical for both execution modes.
void evaluate_elements(const QuarterDiskMesh& mesh, const Integrand& f,
                       const std::vector<double>& u, bool want_hess, Exec exec,
                       std::vector<ElementData>& out) {
  const long n = static_cast<long>(mesh.triangles.size());
  out.resize(mesh.triangles.size());
  const bool parallel = exec == Exec::kParallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (long e = 0; e < n; ++e) {
    ElementData& d = out[e];
    d.value = f.eval(element_gradient(mesh, e, u), &d.grad, want_hess ? &d.hess : nullptr);
  }
}

double assemble(const QuarterDiskMesh& mesh, const std::vector<ElementData>& data,
                std::vector<double>* grad, double* abs_sum = nullptr) {
  double energy = 0.0, magnitude = 0.0;
  if (grad) grad->assign(mesh.nodes.size(), 0.0);
  for (std::size_t e = 0; e < data.size(); ++e) {
    const double w = mesh.weights[e];
    energy += w * data[e].value;
    magnitude += w * std::abs(data[e].value);
    if (grad) {
      for (int a = 0; a < 3; ++a) {
        (*grad)[mesh.triangles[e][a]] += w * dot(data[e].grad, mesh.shape_grads[e][a]);
      }
    }
  }
  if (abs_sum) *abs_sum = magnitude;
  return energy;
}

}  // namespace

double ReducedEnergy::value(const std::vector<double>& u, Exec exec) const {
  std::vector<ElementData> data;
  evaluate_elements(*mesh_, integrand_, u, false, exec, data);
  return assemble(*mesh_, data, nullptr);
}

double ReducedEnergy::value_and_gradient(const std::vector<double>& u,
                                         std::vector<double>& grad, Exec exec) const {
  std::vector<ElementData> data;
  evaluate_elements(*mesh_, integrand_, u, false, exec, data);
  return assemble(*mesh_, data, &grad);
}

std::vector<Vec2> ReducedEnergy::element_gradients(const std::vector<double>& u) const {
  std::vector<Vec2> out(mesh_->triangles.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = element_gradient(*mesh_, e, u);
  return out;
}

std::vector<double> lumped_mass(const QuarterDiskMesh& mesh) {
  std::vector<double> m(mesh.nodes.size(), 0.0);
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    for (int a : mesh.triangles[e]) m[a] += mesh.weights[e] / 3.0;
  }
  return m;
}

double projected_gradient(const QuarterDiskMesh& mesh, const std::vector<double>& grad) {
  double out = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!mesh.on_arc[i]) out = std::max(out, std::abs(grad[i]));
  }
  return out;
}

std::vector<double> interpolant_of_v(const QuarterDiskMesh& mesh) {
  std::vector<double> u(mesh.nodes.size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = norm(mesh.nodes[i]) > 0.0 ? v2d(mesh.nodes[i]) : 0.0;
  }
  return u;
}

std::vector<double> prolongate(const QuarterDiskMesh& coarse, const std::vector<double>& uc,
                               const QuarterDiskMesh& fine) {
  if (uc.size() != coarse.nodes.size()) throw DomainError("prolongate: field size mismatch");
  const int nr = coarse.rings, nt = coarse.sectors;
  auto at = [&](int i, int j) { return i == 0 ? uc[0] : uc[1 + (i - 1) * (nt + 1) + j]; };
  std::vector<double> u(fine.nodes.size(), 0.0);
  for (std::size_t n = 0; n < u.size(); ++n) {
    const Vec2 p = fine.nodes[n];
    if (fine.on_arc[n]) {
      u[n] = v2d(p);
      continue;
    }
    const double xr = norm(p) * nr;
    const double xt = std::atan2(p.y, p.x) / (0.5 * kPi) * nt;
    const int i = std::clamp(static_cast<int>(xr), 0, nr - 1);
    const int j = std::clamp(static_cast<int>(xt), 0, nt - 1);
    const double a = xr - i, b = xt - j;
    u[n] = (1 - a) * ((1 - b) * at(i, j) + b * at(i, j + 1)) +
           a * ((1 - b) * at(i + 1, j) + b * at(i + 1, j + 1));
  }
  return u;
}

std::vector<double> boundary_only_field(const QuarterDiskMesh& mesh) {
  std::vector<double> u(mesh.nodes.size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (mesh.on_arc[i]) u[i] = v2d(mesh.nodes[i]);
  }
  return u;
}

MinimizeResult minimize(const ReducedEnergy& energy, std::vector<double> u0,
                        const MinimizeOptions& opt) {
  const QuarterDiskMesh& mesh = energy.mesh();
  if (u0.size() != mesh.nodes.size()) throw DomainError("minimize: field size mismatch");
  if (!(opt.tol > 0.0)) throw DomainError("minimize: tol must be positive");
  const std::vector<double> mass = lumped_mass(mesh);
  std::vector<int> free_id(mesh.nodes.size(), -1);
  int n_free = 0;
  for (std::size_t i = 0; i < free_id.size(); ++i) {
    if (!mesh.on_arc[i]) free_id[i] = n_free++;
  }

  // With boundary data odd under r1 <-> r2 the minimizer is odd as well;
  // iterates are kept in that subspace so rounding cannot break the symmetry.
  bool antisym = opt.exploit_symmetry;
  double umax = 0.0;
  for (double x : u0) umax = std::max(umax, std::abs(x));
  for (std::size_t i = 0; i < u0.size() && antisym; ++i) {
    if (mesh.on_arc[i] && std::abs(u0[i] + u0[mesh.mirror[i]]) > 1e-14 * umax) antisym = false;
  }
  if (antisym) {
    const std::vector<double> src = u0;
    for (std::size_t i = 0; i < u0.size(); ++i) {
      if (!mesh.on_arc[i]) u0[i] = 0.5 * (src[i] - src[mesh.mirror[i]]);
    }
  }
  std::vector<int> mirror_free(n_free);
  for (std::size_t i = 0; i < free_id.size(); ++i) {
    if (free_id[i] >= 0) mirror_free[free_id[i]] = free_id[mesh.mirror[i]];
  }
  auto project = [&](Eigen::VectorXd& x) {
    const Eigen::VectorXd src = x;
    for (int i = 0; i < n_free; ++i) x[i] = 0.5 * (src[i] - src[mirror_free[i]]);
  };

  MinimizeResult res;
  res.symmetric = antisym;
  res.u = std::move(u0);
  std::vector<ElementData> data;
  std::vector<double> grad;
  const bool newton = opt.method == Optimizer::kNewton;
  evaluate_elements(mesh, energy.integrand(), res.u, newton, opt.exec, data);
  double magnitude = 0.0;
  double e_cur = assemble(mesh, data, &grad, &magnitude);
  res.energy_history.push_back(e_cur);
  double step_scale = 1.0;
  double damping = 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  std::vector<Eigen::Triplet<double>> trips;

  for (res.iterations = 0; res.iterations <= opt.max_iter; ++res.iterations) {
    res.projected_gradient = projected_gradient(mesh, grad);
    if (res.projected_gradient <= opt.tol) {
      res.converged = true;
      break;
    }
    if (res.iterations == opt.max_iter) break;

    Eigen::VectorXd g(n_free), d(n_free);
    for (std::size_t i = 0; i < free_id.size(); ++i) {
      if (free_id[i] >= 0) g[free_id[i]] = grad[i];
    }
    std::vector<double> trial(res.u.size());
    std::vector<double> trial_grad;
    double e_new = e_cur;
    double step = 1.0;
    bool accepted = false;
    auto try_step = [&](double scale) {
      trial = res.u;
      for (std::size_t i = 0; i < free_id.size(); ++i) {
        if (free_id[i] >= 0) trial[i] += scale * d[free_id[i]];
      }
      evaluate_elements(mesh, energy.integrand(), trial, newton, opt.exec, data);
      e_new = assemble(mesh, data, &trial_grad, &magnitude);
    };
    // Energy differences at rounding level: accept on gradient decrease.
    auto rounding_ok = [&] {
      return std::abs(e_new - e_cur) <= 16.0 * kEps * magnitude &&
             projected_gradient(mesh, trial_grad) < res.projected_gradient;
    };
    if (newton) {
      // Levenberg-Marquardt damping on the Hessian diagonal.
      trips.clear();
      for (std::size_t e = 0; e < data.size(); ++e) {
        const auto& t = mesh.triangles[e];
        const auto& sg = mesh.shape_grads[e];
        const double w = mesh.weights[e];
        for (int a = 0; a < 3; ++a) {
          if (free_id[t[a]] < 0) continue;
          const Vec2 ha = apply(data[e].hess, sg[a]);
          for (int b = 0; b < 3; ++b) {
            if (free_id[t[b]] < 0) continue;
            trips.emplace_back(free_id[t[a]], free_id[t[b]], w * dot(ha, sg[b]));
          }
        }
      }
      Eigen::SparseMatrix<double> H(n_free, n_free);
      H.setFromTriplets(trips.begin(), trips.end());
      Eigen::SparseMatrix<double> Hd = H;
      const Eigen::VectorXd diag = H.diagonal();
      for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
        for (int i = 0; i < n_free; ++i) Hd.coeffRef(i, i) = diag[i] * (1.0 + damping);
        solver.compute(Hd);
        if (solver.info() == Eigen::Success) {
          d = -solver.solve(g);
          if (antisym) project(d);
        }
        if (solver.info() != Eigen::Success || !(g.dot(d) < 0.0)) {
          damping = std::max(4.0 * damping, 1e-8);
          continue;
        }
        const double predicted = -(g.dot(d) + 0.5 * d.dot(H * d));
        try_step(1.0);
        const double actual = e_cur - e_new;
        if (predicted > 0.0 && actual >= opt.armijo * predicted) {
          accepted = true;
          if (actual > 0.75 * predicted) damping = damping < 1e-10 ? 0.0 : 0.25 * damping;
        } else if (rounding_ok()) {
          accepted = true;
        } else {
          damping = std::max(4.0 * damping, 1e-8);
        }
      }
      step = damping;
    } else {
      for (std::size_t i = 0; i < free_id.size(); ++i) {
        if (free_id[i] >= 0) d[free_id[i]] = -grad[i] / mass[i];
      }
      if (antisym) project(d);
      const double slope = g.dot(d);
      double alpha = step_scale;
      for (int bt = 0; bt < 60 && !accepted; ++bt) {
        try_step(alpha);
        if (e_new <= e_cur + opt.armijo * alpha * slope || rounding_ok()) {
          accepted = true;
        } else {
          alpha *= 0.5;
        }
      }
      step = alpha;
      step_scale = alpha * 2.0;
    }
    if (!accepted) {
      evaluate_elements(mesh, energy.integrand(), res.u, newton, opt.exec, data);
      res.message = newton ? "damped Newton step failed" : "line search failed";
      break;
    }
    if (e_new > e_cur) res.monotone = res.monotone && (e_new - e_cur) <= 16.0 * kEps * magnitude;
    if (opt.verbose) {
      std::fprintf(stderr, "iter %d E=%.15g pg=%.3e %s=%.3g\n", res.iterations, e_cur,
                   res.projected_gradient, newton ? "damping" : "alpha", step);
    }
    res.u.swap(trial);
    grad.swap(trial_grad);
    e_cur = e_new;
    res.energy_history.push_back(e_cur);
  }
  res.energy = e_cur;
  if (res.converged) res.message = "converged";
  else if (res.message.empty()) res.message = "iteration limit";
  return res;
}

MinimizeResult minimize_staged(const std::vector<SolveStage>& stages, std::vector<double> u0) {
  if (stages.empty()) throw DomainError("minimize_staged: no stages");
  MinimizeResult total;
  const QuarterDiskMesh* mesh = nullptr;
  int iterations = 0;
  std::vector<double> history;
  for (const SolveStage& st : stages) {
    if (st.energy == nullptr) throw DomainError("minimize_staged: stage without energy");
    const QuarterDiskMesh& m = st.energy->mesh();
    if (mesh != nullptr && mesh != &m) u0 = prolongate(*mesh, u0, m);
    mesh = &m;
    total = minimize(*st.energy, std::move(u0), st.options);
    iterations += total.iterations;
    history.insert(history.end(), total.energy_history.begin(), total.energy_history.end());
    u0 = total.u;
  }
  total.iterations = iterations;
  total.energy_history = std::move(history);
  return total;
}

FieldDifference field_difference(const QuarterDiskMesh& mesh, const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != mesh.nodes.size() || b.size() != mesh.nodes.size())
    throw DomainError("field_difference: size mismatch");
  const std::vector<double> m = lumped_mass(mesh);
  FieldDifference d;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = std::abs(a[i] - b[i]);
    d.sup = std::max(d.sup, e);
    num += m[i] * e * e;
    den += m[i];
  }
  d.weighted_rms = den > 0.0 ? std::sqrt(num / den) : 0.0;
  return d;
}

double point_set_diameter(std::vector<Vec2> pts) {
  if (pts.size() < 2) return 0.0;
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 2) return 0.0;
  // Andrew's monotone chain.
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double best = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    for (std::size_t j = i + 1; j < hull.size(); ++j) best = std::max(best, norm(hull[i] - hull[j]));
  }
  return best;
}

std::vector<LocalizationPoint> localization_diagnostic(const ReducedEnergy& energy,
                                                       const std::vector<double>& u,
                                                       const std::vector<double>& radii) {
  const QuarterDiskMesh& mesh = energy.mesh();
  const std::vector<Vec2> grads = energy.element_gradients(u);
  std::vector<LocalizationPoint> out;
  for (double r : radii) {
    if (r < 3.0 * mesh.h - 1e-12) {
      std::ostringstream msg;
      msg << "localization_diagnostic: radius " << r << " below three cells (h=" << mesh.h << ")";
      throw DomainError(msg.str());
    }
    std::vector<Vec2> inside;
    for (std::size_t e = 0; e < grads.size(); ++e) {
      if (norm(mesh.centroids[e]) < r) inside.push_back(grads[e]);
    }
    out.push_back({r, point_set_diameter(inside), inside.size()});
  }
  return out;
}

void write_field_csv(const QuarterDiskMesh& mesh, const std::vector<double>& u,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "r1,r2,u\n";
  char buf[128];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.12g\n", mesh.nodes[i].x, mesh.nodes[i].y, u[i]);
    out << buf;
  }
}

}  // namespace degenlab
