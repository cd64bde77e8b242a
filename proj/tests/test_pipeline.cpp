#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "degenlab/common.hpp"
#include "degenlab/pipeline.hpp"
#include "degenlab/svg.hpp"

using namespace degenlab;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("degenlab_test_" + name);
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small sizes so the full chain runs in seconds.
Json small_config(const std::string& dir) {
  return Json{{"mc_samples", 20000},
              {"mesh_h", 0.0625},
              {"coarse_h", 0.125},
              {"theta_points", 100},
              {"hbound_grid", 100},
              {"reflection_points", 1000},
              {"tangsep_pairs", 50000},
              {"convexity_triples", 5000},
              {"weak_form_tests", 3},
              {"perturbations", 4},
              {"minimality_samples", 5000},
              {"output_dir", dir}};
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(config_from_json(Json::object()));
  CHECK_THROWS_AS(config_from_json(Json{{"deltta", 0.1}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json{{"delta", -0.1}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json{{"k", 1.5}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json{{"n_per_arc", "many"}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json{{"stages", {"eta"}}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json{{"stages", {"profile", "plotting"}}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json{{"mesh_h", 0.5}}), DomainError);
  CHECK_THROWS_AS(config_from_json(Json::array()), DomainError);
  const PipelineConfig c = config_from_json(Json{{"stages", {"eta", "profile"}}, {"delta", 0.05}});
  CHECK(c.stages == std::vector<std::string>{"profile", "eta"});
  CHECK(c.delta == 0.05);
  // Round trip.
  const PipelineConfig d = config_from_json(config_to_json(c));
  CHECK(config_to_json(d) == config_to_json(c));
}

TEST_CASE("stage filtering writes only the requested outputs") {
  const std::string dir = scratch("profile_only");
  PipelineConfig cfg = config_from_json(Json{{"stages", {"profile"}}, {"output_dir", dir}});
  const RunResult r = run_pipeline(cfg);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(fs::path(dir) / "profile.csv"));
  CHECK(fs::exists(fs::path(dir) / "report.json"));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 2);
  CHECK(r.report["stages"].size() == 1);
  CHECK(r.report["schema"] == kReportSchema);
}

TEST_CASE("delta = 0.5 fails the eta stage and halts dependents") {
  const std::string dir = scratch("delta_half");
  Json j = small_config(dir);
  j["delta"] = 0.5;
  const RunResult r = run_pipeline(config_from_json(j));
  CHECK(r.exit_code == 1);
  CHECK(r.report["stages"]["profile"]["status"] == "passed");
  CHECK(r.report["stages"]["eta"]["status"] == "failed");
  CHECK(r.report["stages"]["eta"]["diagnostic"].dump().find("bracket") != std::string::npos);
  CHECK(r.report["stages"]["support"]["status"] == "skipped");
  CHECK(r.report["stages"]["minimize"]["status"] == "skipped");
  CHECK(r.report["passed"] == false);
}

TEST_CASE("identical config and seed give identical reports and plots") {
  const std::string a = scratch("det_a"), b = scratch("det_b");
  const RunResult ra = run_pipeline(config_from_json(small_config(a)));
  const RunResult rb = run_pipeline(config_from_json(small_config(b)));
  CHECK(ra.exit_code == 0);
  CHECK(rb.exit_code == 0);
  CHECK(reproducible_part(ra.report).dump() == reproducible_part(rb.report).dump());
  for (const std::string& kind : plot_kinds()) {
    const fs::path pa = fs::path(a) / (kind + ".svg"), pb = fs::path(b) / (kind + ".svg");
    REQUIRE(fs::exists(pa));
    CHECK(slurp(pa.string()) == slurp(pb.string()));
  }
  // A different seed changes the sampled results.
  Json j = small_config(scratch("det_c"));
  j["seed"] = 7;
  const RunResult rc = run_pipeline(config_from_json(j));
  CHECK(reproducible_part(rc.report).dump() != reproducible_part(ra.report).dump());
}

TEST_CASE("plotting needs its artifact") {
  const std::string dir = scratch("plot_missing");
  const RunResult r = run_pipeline(config_from_json(Json{{"stages", {"profile"}}, {"output_dir", dir}}));
  const std::string out = (fs::path(dir) / "x.svg").string();
  CHECK_THROWS_AS(write_plot(r.report["artifacts"], dir, "sigma_v", out), DomainError);
  CHECK_THROWS_AS(write_plot(r.report["artifacts"], dir, "pie_chart", out), DomainError);
  CHECK_FALSE(fs::exists(out));
}
