#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace degenlab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "degenlab.report/v1";

/// Stage names in dependency order.
const std::vector<std::string>& all_stages();

struct PipelineConfig {
  double delta = 0.01;
  int k = 1;
  int n_per_arc = 4000;
  double gamma_tilde_fraction = 0.5;  // gamma_tilde = fraction * gamma_emp
  double mesh_h = 1.0 / 64.0;
  std::size_t mc_samples = 1000000;
  std::uint64_t seed = 20240611;
  std::string output_dir = "degenlab_out";
  std::vector<std::string> stages = all_stages();

  // Sizes of the individual checks.
  int theta_points = 1000;
  int hbound_grid = 300;
  int reflection_points = 10000;
  std::size_t tangsep_pairs = 1000000;
  std::size_t convexity_triples = 100000;
  int weak_form_tests = 10;
  int perturbations = 20;
  std::size_t minimality_samples = 100000;
  double tol = 1e-6;
  int max_iter = 300;
  double coarse_h = 1.0 / 16.0;
  std::vector<double> smoothing = {1e-3, 1e-4, 1e-5, 1e-6};
};

/// Throws DomainError with a readable message on unknown keys, wrong types,
/// non-positive numbers or a stage list that is not dependency-closed.
PipelineConfig config_from_json(const Json& j);
PipelineConfig load_config(const std::string& path);
Json config_to_json(const PipelineConfig& cfg);

struct RunResult {
  Json report;
  int exit_code = 0;  // 0 all stages passed, 1 a stage failed, 2 internal error
  std::string report_path;
};

/// Runs the requested stages in order, halting dependents of a failed stage,
/// and writes report.json into the output directory. DEGENLAB_OUTPUT_DIR,
/// when set, overrides cfg.output_dir.
RunResult run_pipeline(PipelineConfig cfg);

/// The report without its run_info block (timestamp, timings, host data).
Json reproducible_part(const Json& report);

}  // namespace degenlab
