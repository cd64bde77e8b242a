#include "degenlab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <set>

#include "degenlab/convex_extension.hpp"
#include "degenlab/el_verifier.hpp"
#include "degenlab/eta_builder.hpp"
#include "degenlab/profile_curve.hpp"
#include "degenlab/reduced_minimizer.hpp"
#include "degenlab/rng.hpp"
#include "degenlab/support_data.hpp"
#include "degenlab/svg.hpp"

namespace degenlab {

namespace fs = std::filesystem;

const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> names = {"profile", "eta",      "support", "extension",
                                                 "el",      "minimize", "report"};
  return names;
}

namespace {

const std::map<std::string, std::vector<std::string>>& stage_deps() {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"profile", {}},
      {"eta", {"profile"}},
      {"support", {"eta"}},
      {"extension", {"support"}},
      {"el", {"extension"}},
      {"minimize", {"extension"}},
      {"report", {"profile"}},
  };
  return deps;
}

template <class T>
T get_positive(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number()) throw DomainError(std::string("config: '") + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw DomainError(std::string("config: '") + key + "' must be an integer");
  }
  const T out = v.get<T>();
  if (!(out > 0)) throw DomainError(std::string("config: '") + key + "' must be positive");
  return out;
}

}  // namespace

PipelineConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw DomainError("config: top level must be an object");
  static const std::set<std::string> known = {
      "delta", "k", "n_per_arc", "gamma_tilde_fraction", "mesh_h", "mc_samples", "seed",
      "output_dir", "stages", "theta_points", "hbound_grid", "reflection_points",
      "tangsep_pairs", "convexity_triples", "weak_form_tests", "perturbations",
      "minimality_samples", "tol", "max_iter", "coarse_h", "smoothing"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw DomainError("config: unknown key '" + key + "'");
  }
  PipelineConfig c;
  c.delta = get_positive(j, "delta", c.delta);
  c.k = get_positive(j, "k", c.k);
  c.n_per_arc = get_positive(j, "n_per_arc", c.n_per_arc);
  c.gamma_tilde_fraction = get_positive(j, "gamma_tilde_fraction", c.gamma_tilde_fraction);
  c.mesh_h = get_positive(j, "mesh_h", c.mesh_h);
  c.mc_samples = get_positive(j, "mc_samples", c.mc_samples);
  c.seed = get_positive(j, "seed", c.seed);
  c.theta_points = get_positive(j, "theta_points", c.theta_points);
  c.hbound_grid = get_positive(j, "hbound_grid", c.hbound_grid);
  c.reflection_points = get_positive(j, "reflection_points", c.reflection_points);
  c.tangsep_pairs = get_positive(j, "tangsep_pairs", c.tangsep_pairs);
  c.convexity_triples = get_positive(j, "convexity_triples", c.convexity_triples);
  c.weak_form_tests = get_positive(j, "weak_form_tests", c.weak_form_tests);
  c.perturbations = get_positive(j, "perturbations", c.perturbations);
  c.minimality_samples = get_positive(j, "minimality_samples", c.minimality_samples);
  c.tol = get_positive(j, "tol", c.tol);
  c.max_iter = get_positive(j, "max_iter", c.max_iter);
  c.coarse_h = get_positive(j, "coarse_h", c.coarse_h);
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw DomainError("config: 'output_dir' must be a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("smoothing")) {
    const Json& s = j["smoothing"];
    if (!s.is_array() || s.empty()) throw DomainError("config: 'smoothing' must be a non-empty array");
    c.smoothing.clear();
    for (const Json& v : s) {
      if (!v.is_number() || !(v.get<double>() > 0.0))
        throw DomainError("config: 'smoothing' entries must be positive numbers");
      c.smoothing.push_back(v.get<double>());
    }
  }
  if (j.contains("stages")) {
    const Json& s = j["stages"];
    if (!s.is_array() || s.empty()) throw DomainError("config: 'stages' must be a non-empty array");
    std::set<std::string> wanted;
    for (const Json& v : s) {
      if (!v.is_string()) throw DomainError("config: 'stages' entries must be strings");
      const std::string name = v.get<std::string>();
      if (!stage_deps().count(name)) throw DomainError("config: unknown stage '" + name + "'");
      wanted.insert(name);
    }
    c.stages.clear();
    for (const std::string& name : all_stages()) {
      if (!wanted.count(name)) continue;
      for (const std::string& dep : stage_deps().at(name)) {
        if (!wanted.count(dep))
          throw DomainError("config: stage '" + name + "' needs stage '" + dep + "'");
      }
      c.stages.push_back(name);
    }
  }
  if (c.delta > 1.0) throw DomainError("config: 'delta' must not exceed 1");
  if (c.gamma_tilde_fraction >= 1.0) throw DomainError("config: 'gamma_tilde_fraction' must be below 1");
  if (c.mesh_h > 0.25 || c.coarse_h > 0.25) throw DomainError("config: mesh sizes must not exceed 1/4");
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("config: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

Json config_to_json(const PipelineConfig& c) {
  Json j;
  j["delta"] = c.delta;
  j["k"] = c.k;
  j["n_per_arc"] = c.n_per_arc;
  j["gamma_tilde_fraction"] = c.gamma_tilde_fraction;
  j["mesh_h"] = c.mesh_h;
  j["mc_samples"] = c.mc_samples;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["stages"] = c.stages;
  j["theta_points"] = c.theta_points;
  j["hbound_grid"] = c.hbound_grid;
  j["reflection_points"] = c.reflection_points;
  j["tangsep_pairs"] = c.tangsep_pairs;
  j["convexity_triples"] = c.convexity_triples;
  j["weak_form_tests"] = c.weak_form_tests;
  j["perturbations"] = c.perturbations;
  j["minimality_samples"] = c.minimality_samples;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["coarse_h"] = c.coarse_h;
  j["smoothing"] = c.smoothing;
  return j;
}

Json reproducible_part(const Json& report) {
  Json out = report;
  out.erase("run_info");
  return out;
}

namespace {

// Objects shared between stages.
struct Context {
  PipelineConfig cfg;
  fs::path dir;
  std::shared_ptr<const ProfileCurve> profile;
  std::unique_ptr<OneDConstruction> oned;
  std::vector<SupportPoint> support;
  double gamma_emp = 0.0;
  double gamma_tilde = 0.0;
  std::unique_ptr<ParaboloidEnvelope> envelope;
  Json artifacts = Json::object();
  Json constants = Json::object();
  Json timing = Json::object();  // seconds; kept out of the reproducible part
};

// Collects named checks; the stage passes when all of them hold.
class Checks {
 public:
  void add(const std::string& name, bool ok) {
    all_ &= ok;
    if (!ok) failed_.push_back(name);
  }
  bool passed() const { return all_; }
  const std::vector<std::string>& failed() const { return failed_; }

 private:
  bool all_ = true;
  std::vector<std::string> failed_;
};

std::string artifact(Context& ctx, const std::string& kind, const std::string& file) {
  ctx.artifacts[kind] = file;
  return (ctx.dir / file).string();
}

double finite_or(double x, double fallback) { return std::isfinite(x) ? x : fallback; }

// ---------------------------------------------------------------- stages

void stage_profile(Context& ctx, Json& out, Checks& checks) {
  ctx.profile = std::make_shared<ProfileCurve>();
  const ProfileCurve& p = *ctx.profile;
  const Vec2 start = gamma1_point(0.25 * kPi);
  const double start_err = norm(start - Vec2{-1.0, 1.0});
  const double phi0_err = std::abs(p.eval(0.0).phi - std::sqrt(0.5));
  double curv = 0.0;
  const int n = ctx.cfg.theta_points;
  for (int i = 0; i < n; ++i) {
    // Endpoints excluded: sec(2 theta) blows up at pi/4 and 3pi/4.
    const double theta = 0.25 * kPi + 0.5 * kPi * (i + 0.5) / n;
    curv = std::max(curv, curvature_residual(theta));
  }
  const ExpansionFit fit = p.expansion_check();
  out["gamma1_start_error"] = start_err;
  out["phi0_error"] = phi0_err;
  out["curvature_residual_max"] = curv;
  out["theta_points"] = n;
  out["expansion"] = {{"d1_coeff", fit.d1_coeff}, {"d2_coeff", fit.d2_coeff},
                      {"d3_coeff", fit.d3_coeff}, {"d1_rel_dev", fit.d1_rel_dev},
                      {"d2_rel_dev", fit.d2_rel_dev}, {"d3_rel_dev", fit.d3_rel_dev}};
  checks.add("gamma1_start", start_err <= 1e-12);
  checks.add("phi0", phi0_err <= 1e-10);
  checks.add("curvature", curv <= 1e-9);
  checks.add("expansion", fit.d1_rel_dev <= 0.02 && fit.d2_rel_dev <= 0.02 && fit.d3_rel_dev <= 0.05);
  p.write_csv(artifact(ctx, "profile_csv", "profile.csv"));
}

void stage_eta(Context& ctx, Json& out, Checks& checks) {
  const PipelineConfig& c = ctx.cfg;
  const EtaConfig eta = build_eta(c.delta, *ctx.profile, c.k);
  ctx.oned = std::make_unique<OneDConstruction>(ctx.profile, eta);
  const EtaMargins m = ctx.oned->margins();
  double h_max = 0.0;
  for (int i = 0; i <= 2000; ++i) h_max = std::max(h_max, ctx.oned->h(i / 2000.0));
  const JunctionResiduals jr = junction_residuals(*ctx.oned);

  Json mus = Json::array();
  bool decreasing = true;
  double prev = INFINITY;
  for (double d : {0.1, 0.05, 0.01}) {
    const double mu = build_eta(d, *ctx.profile, c.k).mu;
    mus.push_back({{"delta", d}, {"mu", mu}});
    decreasing &= mu < prev;
    prev = mu;
  }
  out["mu"] = m.mu;
  out["crossing"] = eta.crossing();
  out["margins"] = {{"eta_at_one_error", m.eta_at_one_error},
                    {"evenness_error", m.evenness_error},
                    {"concavity", m.concavity_margin},
                    {"lower_bound", m.lower_bound_margin},
                    {"plateau", m.plateau_margin}};
  out["integral_error"] = m.integral_error;
  out["h_max"] = h_max;
  out["h0"] = ctx.oned->h(0.0);
  out["junction"] = {{"position", jr.position}, {"value", jr.value},
                     {"vector", jr.vector}, {"parallel", jr.parallel}};
  out["mu_by_delta"] = mus;
  out["mu_decreasing"] = decreasing;
  ctx.constants["mu"] = m.mu;
  checks.add("eta_at_one", m.eta_at_one_error <= 1e-12);
  checks.add("evenness", m.evenness_error <= 1e-12);
  checks.add("concavity", m.concavity_margin >= 0.0);
  checks.add("lower_bound", m.lower_bound_margin >= 0.0);
  checks.add("plateau", m.plateau_margin >= 0.0);
  checks.add("integral", m.integral_error <= 1e-8);
  checks.add("h_below_three_quarters", h_max < 0.75);
  checks.add("junction_parallel", jr.parallel <= 1e-8);
  checks.add("mu_decreasing", decreasing);
  ctx.oned->write_csv(artifact(ctx, "eta_csv", "eta.csv"));
}

void stage_support(Context& ctx, Json& out, Checks& checks) {
  const PipelineConfig& c = ctx.cfg;
  const OneDConstruction& o = *ctx.oned;
  ctx.support = build_support(o, c.n_per_arc);
  const HBoundResult hb = hbound_scan(o, c.hbound_grid);
  const ReflectionMargins rm = reflection_check(o, c.reflection_points);
  const TangsepResult ts =
      tangsep_scan(ctx.support, c.tangsep_pairs, substream_seed(c.seed, "tangsep"));
  ctx.gamma_emp = ts.gamma;
  out["samples"] = ctx.support.size();
  out["hbound"] = {{"grid", hb.n}, {"c0", hb.c0}, {"argmin_x", hb.argmin_x},
                   {"argmin_y", hb.argmin_y}, {"plateau_min_H", hb.plateau_min_H}};
  out["reflection"] = {{"points", c.reflection_points},
                       {"axis_min", rm.axis_min},
                       {"diagonal_min", rm.diagonal_min},
                       {"plateau_min", rm.plateau_min},
                       {"endpoint_min", rm.endpoint_min}};
  out["tangsep"] = {{"gamma_emp", ts.gamma},
                    {"gamma_same_arc", ts.gamma_same_arc},
                    {"pairs", ts.pairs},
                    {"exhaustive", ts.exhaustive}};
  ctx.constants["c0"] = hb.c0;
  ctx.constants["gamma_emp"] = ts.gamma;
  checks.add("c0_positive", hb.c0 > 0.0);
  checks.add("reflection_positive",
             rm.axis_min > 0.0 && rm.diagonal_min > 0.0 && rm.plateau_min > 0.0 && rm.endpoint_min > 0.0);
  checks.add("gamma_emp_positive", ts.gamma > 0.0);
  write_support_csv(ctx.support, artifact(ctx, "support_csv", "support.csv"));
  write_hgrid_csv(hb, artifact(ctx, "hgrid_csv", "hgrid.csv"));
}

void stage_extension(Context& ctx, Json& out, Checks& checks) {
  const PipelineConfig& c = ctx.cfg;
  ctx.gamma_tilde = c.gamma_tilde_fraction * ctx.gamma_emp;
  ctx.envelope = std::make_unique<ParaboloidEnvelope>(ctx.support, ctx.gamma_tilde, ctx.gamma_emp);
  const ParaboloidEnvelope& env = *ctx.envelope;
  const SelfInterpolation si = self_interpolation(env, ctx.support);

  const std::vector<SupportPoint> held = build_support(*ctx.oned, c.n_per_arc, 0.5);
  std::vector<double> verr(held.size()), gerr(held.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(held.size()); ++i) {
    const EnvelopeEval e = env.eval(held[i].p);
    verr[i] = std::abs(e.value - held[i].g);
    gerr[i] = norm(e.grad - held[i].v);
  }
  const double held_v = *std::max_element(verr.begin(), verr.end());
  const double held_g = *std::max_element(gerr.begin(), gerr.end());

  const ConvexityCertificate cc = convexity_certificate(
      env, c.convexity_triples, 2.0, substream_seed(c.seed, "convexity"));

  // Exact symmetry under the eight signed permutations.
  auto rng = block_rng(substream_seed(c.seed, "dihedral"), 0);
  std::size_t asym = 0;
  double grad_dev = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const Vec2 x{4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0};
    const EnvelopeEval base = env.eval(x);
    for (int m = 1; m < 8; ++m) {
      const Dihedral d{(m & 1) != 0, (m & 2) ? -1.0 : 1.0, (m & 4) ? -1.0 : 1.0};
      const EnvelopeEval e = env.eval(d.apply(x));
      if (e.value != base.value) ++asym;
      grad_dev = std::max(grad_dev, norm(e.grad - d.apply(base.grad)));
    }
  }
  out["gamma_tilde"] = ctx.gamma_tilde;
  out["nodes"] = env.node_count();
  out["self_interpolation"] = {{"value_error", si.max_value_error},
                               {"grad_error", si.max_grad_error},
                               {"wrong_argmax", si.wrong_argmax}};
  out["held_out"] = {{"samples", held.size()}, {"value_error", held_v}, {"grad_error", held_g}};
  out["convexity"] = {{"triples", cc.triples}, {"min_margin", cc.min_margin}};
  out["dihedral"] = {{"points", 2000}, {"value_mismatches", asym}, {"grad_deviation", grad_dev}};
  ctx.constants["gamma_tilde"] = ctx.gamma_tilde;
  checks.add("held_out_value", held_v <= 1e-4);
  checks.add("held_out_grad", held_g <= 1e-2);
  // Margins of exactly affine triples come out at the rounding level of G.
  checks.add("convexity", cc.min_margin >= -1e-12);
  checks.add("dihedral", asym == 0);
  write_envelope_grid_csv(env, 2.0, 121, artifact(ctx, "envelope_grid_csv", "envelope_grid.csv"));
}

void stage_el(Context& ctx, Json& out, Checks& checks) {
  const PipelineConfig& c = ctx.cfg;
  const OneDConstruction& o = *ctx.oned;
  const int n = c.theta_points;

  double id_max = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double s = (1.0 - 1e-3) * (static_cast<double>(i) / n);
    id_max = std::max(id_max, std::abs(reduced_identity_residual(o, s).residual));
  }
  const IdentityResidual pert = reduced_identity_residual(o, 0.5, 1e-3);
  const IdentityResidual mid = reduced_identity_residual(o, 0.5);
  double el_max = 0.0;
  for (int i = 0; i < n; ++i) {
    const double theta = 0.25 * kPi + 1e-3 + (0.25 * kPi - 1e-3) * i / (n - 1);
    el_max = std::max(el_max, std::abs(reduced_el_residual(o, theta).residual));
  }
  const ReducedELTerms third = reduced_el_residual(o, kPi / 3.0);
  const ReducedELTerms half = reduced_el_residual(o, 0.5 * kPi);

  const LiftedIntegrand F(*ctx.envelope, c.k);
  const double homog = one_homogeneity_check(c.k, 1000, substream_seed(c.seed, "homogeneity"));
  const SaddleCheck saddle = saddle_check(c.k, 1000, substream_seed(c.seed, "saddle"));
  const double flux = flux_consistency(o, F, 1000, substream_seed(c.seed, "flux"));

  out["identity"] = {{"points", n},
                     {"max_residual", id_max},
                     {"perturbed_residual", pert.residual},
                     {"curvature_s_half", mid.curvature},
                     {"eigenvalue_s_half", mid.eigenvalue}};
  out["reduced"] = {{"points", n},
                    {"max_residual", el_max},
                    {"tangential_pi_3", third.tangential},
                    {"radial_pi_3", third.radial},
                    {"residual_pi_2", half.residual}};
  out["homogeneity_error"] = homog;
  out["saddle"] = {{"points", saddle.points}, {"mixed", saddle.mixed}};
  out["flux_consistency"] = flux;
  checks.add("identity", id_max <= 1e-10);
  checks.add("identity_sensitivity", std::abs(pert.residual) >= 1e-4);
  checks.add("reduced", el_max <= 1e-8 && std::abs(half.residual) <= 1e-8);
  checks.add("reduced_terms_nonzero",
             std::abs(third.tangential) >= 1e-3 && std::abs(third.radial) >= 1e-3);
  checks.add("homogeneity", homog <= 1e-14);
  checks.add("saddle", saddle.mixed == saddle.points);
  checks.add("flux_consistency", flux <= 1e-5);

  // Weak form on a shared battery.
  auto trng = block_rng(substream_seed(c.seed, "test_functions"), 0);
  std::vector<PolyBump> tests{PolyBump::radial(c.k)};
  for (int i = 1; i < c.weak_form_tests; ++i) tests.push_back(PolyBump::random(c.k, trng, i % 3 == 0));
  std::vector<std::size_t> sizes;
  for (std::size_t s : {std::size_t{10000}, std::size_t{100000}}) {
    if (s < c.mc_samples) sizes.push_back(s);
  }
  sizes.push_back(c.mc_samples);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<McEstimate>> runs;
  for (std::size_t s : sizes) {
    McOptions mo;
    mo.n = s;
    mo.seed = substream_seed(c.seed, "weak_form/" + std::to_string(s));
    runs.push_back(weak_form_residual(o, tests, mo));
  }
  Json wf = Json::array();
  bool within = true, stable = true, finite = true;
  double worst_spread = 0.0;
  for (std::size_t t = 0; t < tests.size(); ++t) {
    Json row;
    row["block_symmetric"] = tests[t].block_symmetric();
    Json per_n = Json::array();
    double lo = INFINITY, hi = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const McEstimate& e = runs[r][t];
      per_n.push_back({{"estimate", e.estimate}, {"sigma", e.sigma}, {"N", e.n}, {"seed", e.seed}});
      const double scaled = e.sigma * std::sqrt(static_cast<double>(e.n));
      lo = std::min(lo, scaled);
      hi = std::max(hi, scaled);
      finite &= e.finite;
    }
    const McEstimate& last = runs.back()[t];
    within &= std::abs(last.estimate) <= 3.0 * last.sigma;
    const double spread = lo > 0.0 ? hi / lo : INFINITY;
    worst_spread = std::max(worst_spread, spread);
    stable &= spread <= 2.0;
    row["runs"] = per_n;
    row["z"] = last.sigma > 0.0 ? last.estimate / last.sigma : 0.0;
    row["sigma_sqrt_n_spread"] = finite_or(spread, -1.0);
    wf.push_back(row);
  }
  const double t_weak = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out["weak_form"] = {{"tests", wf}, {"sigma_sqrt_n_spread_max", finite_or(worst_spread, -1.0)}};
  checks.add("weak_form_within_3_sigma", within);
  checks.add("weak_form_sigma_scaling", stable);
  checks.add("weak_form_finite", finite);

  // Minimality: alternating block-symmetric and generic bumps at t = 1, plus
  // one generic direction at t = 0.5, 1, 2.
  auto prng = block_rng(substream_seed(c.seed, "perturbations"), 0);
  std::vector<Perturbation> perts;
  for (int i = 0; i < c.perturbations; ++i)
    perts.push_back({PolyBump::random(c.k, prng, i % 2 == 0), 1.0});
  const PolyBump dir = PolyBump::random(c.k, prng, false);
  for (double t : {0.5, 1.0, 2.0}) perts.push_back({dir, t});
  McOptions mo;
  mo.n = c.minimality_samples;
  mo.seed = substream_seed(c.seed, "minimality");
  const auto t1 = std::chrono::steady_clock::now();
  const std::vector<GapEstimate> gaps = minimality_test(F, perts, mo);
  const double t_min = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

  const std::size_t np = static_cast<std::size_t>(c.perturbations);
  std::vector<std::size_t> order(np);
  for (std::size_t i = 0; i < np; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return gaps[a].grad_norm2 > gaps[b].grad_norm2; });
  bool above = true, largest_positive = true, strong = true;
  Json gj = Json::array();
  for (std::size_t i = 0; i < np; ++i) {
    const GapEstimate& g = gaps[i];
    above &= g.gap >= -3.0 * g.sigma;
    strong &= g.gap >= ctx.gamma_tilde * g.grad_norm2 - 3.0 * g.sigma;
    gj.push_back({{"t", g.t}, {"block_symmetric", g.block_symmetric}, {"gap", g.gap},
                  {"sigma", g.sigma}, {"grad_norm2", g.grad_norm2}});
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(5, np); ++i) {
    const GapEstimate& g = gaps[order[i]];
    largest_positive &= g.gap > 3.0 * g.sigma;
  }
  Json tj = Json::array();
  double min_ratio = INFINITY;
  bool t_positive = true;
  for (std::size_t i = np; i < gaps.size(); ++i) {
    const GapEstimate& g = gaps[i];
    const double ratio = g.gap / (g.t * g.t);
    min_ratio = std::min(min_ratio, ratio);
    t_positive &= g.gap > 3.0 * g.sigma;
    tj.push_back({{"t", g.t}, {"gap", g.gap}, {"sigma", g.sigma}, {"gap_over_t2", ratio}});
  }
  out["minimality"] = {{"N", mo.n},           {"seed", mo.seed},
                       {"perturbations", gj}, {"t_sequence", tj},
                       {"min_gap_over_t2", finite_or(min_ratio, -1.0)},
                       {"strong_convexity_bound", strong}};
  checks.add("gap_above_minus_3_sigma", above);
  checks.add("largest_gaps_positive", largest_positive);
  checks.add("gap_t_sequence_positive", t_positive);
  ctx.timing["el"] = {{"weak_form", t_weak}, {"minimality", t_min}};
}

void stage_minimize(Context& ctx, Json& out, Checks& checks) {
  const PipelineConfig& c = ctx.cfg;
  std::vector<std::unique_ptr<ParaboloidEnvelope>> family;
  for (double tau : c.smoothing) {
    EnvelopeOptions eo;
    eo.ridge_smoothing = tau;
    family.push_back(std::make_unique<ParaboloidEnvelope>(ctx.support, ctx.gamma_tilde, ctx.gamma_emp, eo));
  }
  const QuarterDiskMesh fine = build_quarter_disk_mesh(c.mesh_h, c.k);
  // Coarse-to-fine ladder for the start that is far from the minimizer.
  std::vector<QuarterDiskMesh> ladder;
  std::vector<double> hs;
  if (c.coarse_h > fine.h * (1.0 + 1e-9)) {
    for (double h = c.coarse_h; h > fine.h * (1.0 + 1e-9); h *= 0.5) hs.push_back(h);
  }
  ladder.reserve(hs.size() + 1);
  for (double h : hs) ladder.push_back(build_quarter_disk_mesh(h, c.k));

  std::vector<std::unique_ptr<ReducedEnergy>> energies;
  auto energy = [&](const QuarterDiskMesh& m, Integrand f) {
    energies.push_back(std::make_unique<ReducedEnergy>(m, std::move(f)));
    return energies.back().get();
  };
  MinimizeOptions final_opt;
  final_opt.tol = c.tol;
  final_opt.max_iter = c.max_iter;
  MinimizeOptions inter_opt = final_opt;
  inter_opt.tol = std::max(10.0 * c.tol, 1e-5);
  inter_opt.max_iter = 60;

  const std::size_t nt = family.size();
  const ReducedEnergy* cex_fine = energy(fine, envelope_integrand(*family.back()));
  const ReducedEnergy* ctl_fine = energy(fine, control_integrand());

  std::vector<SolveStage> far;
  if (ladder.empty()) {
    for (std::size_t i = 0; i < nt; ++i)
      far.push_back({i + 1 == nt ? cex_fine : energy(fine, envelope_integrand(*family[i])),
                     i + 1 == nt ? final_opt : inter_opt});
  } else {
    for (std::size_t i = 0; i < nt; ++i)
      far.push_back({energy(ladder[0], envelope_integrand(*family[i])), i + 1 == nt ? final_opt : inter_opt});
    // Finer levels only need the last two smoothing levels.
    const std::size_t first = nt >= 2 ? nt - 2 : 0;
    for (std::size_t l = 1; l <= ladder.size(); ++l) {
      const QuarterDiskMesh& m = l < ladder.size() ? ladder[l] : fine;
      for (std::size_t i = first; i < nt; ++i) {
        const bool last = i + 1 == nt;
        const ReducedEnergy* e = (l == ladder.size() && last) ? cex_fine : energy(m, envelope_integrand(*family[i]));
        far.push_back({e, last ? final_opt : inter_opt});
      }
    }
  }

  std::vector<double> radii;
  for (double r : {0.4, 0.2, 0.1, 0.05}) {
    if (r >= 3.0 * fine.h - 1e-12) radii.push_back(r);
  }

  auto report_solve = [&](const MinimizeResult& r) {
    return Json{{"converged", r.converged}, {"iterations", r.iterations},
                {"projected_gradient", r.projected_gradient}, {"energy", r.energy},
                {"monotone", r.monotone}, {"message", r.message}};
  };
  auto timed = [](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = fn();
    return std::make_pair(std::move(r),
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };

  Json integrands = Json::object();
  Json timings = Json::object();
  std::ofstream loc(artifact(ctx, "localization_csv", "localization.csv"));
  loc << "integrand,r,diameter,elements\n";
  bool contrast = true;
  for (const std::string name : {"counterexample", "control"}) {
    const bool cex = name == "counterexample";
    const ReducedEnergy* e = cex ? cex_fine : ctl_fine;
    auto [r0, s0] = timed([&] { return minimize(*e, interpolant_of_v(fine), final_opt); });
    auto [r1, s1] = timed([&] {
      if (cex) return minimize_staged(far, boundary_only_field(far.front().energy->mesh()));
      return minimize(*e, boundary_only_field(fine), final_opt);
    });
    const FieldDifference diff = field_difference(fine, r0.u, r1.u);
    const std::vector<LocalizationPoint> lp = localization_diagnostic(*e, r0.u, radii);
    Json lj = Json::array();
    for (const LocalizationPoint& p : lp) {
      lj.push_back({{"r", p.r}, {"diameter", p.diameter}, {"elements", p.elements}});
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%.6g,%.12g,%zu\n", name.c_str(), p.r, p.diameter, p.elements);
      loc << buf;
      if (cex) contrast &= p.diameter >= 1.0;
    }
    if (!cex) contrast &= !lp.empty() && lp.back().r == 0.05 && lp.back().diameter <= 0.2;
    integrands[name] = {{"interpolant_start", report_solve(r0)},
                        {"boundary_start", report_solve(r1)},
                        {"difference_sup", diff.sup},
                        {"difference_weighted_rms", diff.weighted_rms},
                        {"localization", lj}};
    timings[name] = {{"interpolant_start", s0}, {"boundary_start", s1}};
    checks.add(name + "_converged", r0.converged && r1.converged);
    checks.add(name + "_starts_agree", diff.weighted_rms <= 10.0 * c.tol);
    write_field_csv(fine, r0.u, artifact(ctx, name + "_field_csv", name + "_field.csv"));
  }
  out["mesh"] = {{"h", fine.h}, {"nodes", fine.nodes.size()}, {"triangles", fine.triangles.size()},
                 {"ladder", hs}};
  out["smoothing"] = c.smoothing;
  out["integrands"] = integrands;
  out["localization_contrast"] = contrast;
  ctx.timing["minimize"] = timings;
}

void stage_report(Context& ctx, Json& out, Checks& checks) {
  Json plots = Json::object();
  for (const std::string& kind : plot_kinds()) {
    const std::string file = kind + ".svg";
    if (!plot_available(ctx.artifacts, kind)) continue;
    write_plot(ctx.artifacts, ctx.dir.string(), kind, (ctx.dir / file).string());
    plots[kind] = file;
  }
  for (const auto& [k, v] : plots.items()) ctx.artifacts["plot_" + k] = v;
  out["plots"] = plots;
  checks.add("any_plot", !plots.empty());
}

}  // namespace

RunResult run_pipeline(PipelineConfig cfg) {
  if (const char* env = std::getenv("DEGENLAB_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    cfg.output_dir = env;
  }
  Context ctx;
  ctx.cfg = cfg;
  ctx.dir = cfg.output_dir;
  fs::create_directories(ctx.dir);

  const std::map<std::string, std::function<void(Context&, Json&, Checks&)>> fns = {
      {"profile", stage_profile}, {"eta", stage_eta},   {"support", stage_support},
      {"extension", stage_extension}, {"el", stage_el}, {"minimize", stage_minimize},
      {"report", stage_report}};

  RunResult res;
  Json stages = Json::object();
  Json seconds = Json::object();
  std::set<std::string> failed;
  const auto t_start = std::chrono::steady_clock::now();
  for (const std::string& name : cfg.stages) {
    Json st;
    bool blocked = false;
    for (const std::string& dep : stage_deps().at(name)) blocked |= failed.count(dep) > 0;
    if (blocked) {
      st["status"] = "skipped";
      st["diagnostic"] = {{"reason", "a dependency failed"}};
      failed.insert(name);
      res.exit_code = std::max(res.exit_code, 1);
      stages[name] = st;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Json data = Json::object();
    Checks checks;
    try {
      fns.at(name)(ctx, data, checks);
      st["status"] = checks.passed() ? "passed" : "failed";
      if (!checks.passed()) st["diagnostic"] = {{"failed_checks", checks.failed()}};
    } catch (const ConstructionError& e) {
      st["status"] = "failed";
      st["diagnostic"] = {{"error", "construction"}, {"message", e.what()}};
    } catch (const DomainError& e) {
      st["status"] = "failed";
      st["diagnostic"] = {{"error", "domain"}, {"message", e.what()}};
    } catch (const std::exception& e) {
      st["status"] = "failed";
      st["diagnostic"] = {{"error", "internal"}, {"message", e.what()}};
      res.exit_code = 2;
    }
    if (st["status"] != "passed") {
      failed.insert(name);
      res.exit_code = std::max(res.exit_code, 1);
    }
    st["results"] = data;
    stages[name] = st;
    seconds[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  Json report;
  report["schema"] = kReportSchema;
  report["config"] = config_to_json(cfg);
  report["config"].erase("output_dir");
  report["constants"] = ctx.constants;
  report["stages"] = stages;
  report["artifacts"] = ctx.artifacts;
  report["passed"] = res.exit_code == 0;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  report["run_info"] = {
      {"timestamp", stamp},
      {"output_dir", cfg.output_dir},
      {"stage_seconds", seconds},
      {"details", ctx.timing},
      {"total_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count()}};
  res.report = report;
  res.report_path = (ctx.dir / "report.json").string();
  std::ofstream(res.report_path) << report.dump(2) << '\n';
  return res;
}

}  // namespace degenlab
