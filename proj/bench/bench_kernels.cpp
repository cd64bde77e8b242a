// Serial reference path against the OpenMP kernels on the hot loops.
#include <benchmark/benchmark.h>

#include <memory>

#include "degenlab/convex_extension.hpp"
#include "degenlab/el_verifier.hpp"
#include "degenlab/reduced_minimizer.hpp"
#include "degenlab/rng.hpp"

using namespace degenlab;

namespace {

struct Data {
  OneDConstruction oned{std::make_shared<const ProfileCurve>(), build_eta(0.01, ProfileCurve())};
  std::vector<SupportPoint> pts = build_support(oned, 4000);
  double gamma = tangsep_scan(pts, 200000, 1).gamma;
  ParaboloidEnvelope env{pts, 0.5 * gamma, gamma};
  QuarterDiskMesh mesh = build_quarter_disk_mesh(1.0 / 64, 1);
};

const Data& data() {
  static const Data d;
  return d;
}

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::kParallel : Exec::kSerial; }

void BM_HBoundScan(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(hbound_scan(data().oned, 300, exec_of(st)).c0);
}

void BM_Tangsep(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(tangsep_scan(data().pts, 200000, 2, exec_of(st)).gamma);
}

void BM_ConvexityCertificate(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(convexity_certificate(data().env, 20000, 2.0, 3, exec_of(st)).min_margin);
}

void BM_EnergyGradient(benchmark::State& st) {
  const ReducedEnergy E(data().mesh, envelope_integrand(data().env));
  const std::vector<double> u = interpolant_of_v(data().mesh);
  std::vector<double> g;
  for (auto _ : st) benchmark::DoNotOptimize(E.value_and_gradient(u, g, exec_of(st)));
}

void BM_WeakForm(benchmark::State& st) {
  std::mt19937_64 rng(4);
  const std::vector<PolyBump> tests = {PolyBump::radial(1), PolyBump::random(1, rng, false)};
  const McOptions o{100000, 5, 64, exec_of(st)};
  for (auto _ : st) benchmark::DoNotOptimize(weak_form_residual(data().oned, tests, o));
}

}  // namespace

BENCHMARK(BM_HBoundScan)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tangsep)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvexityCertificate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnergyGradient)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WeakForm)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
