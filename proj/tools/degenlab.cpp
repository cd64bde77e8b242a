// degenlab: run the pipeline from a JSON config, or render a plot from a report.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "degenlab/common.hpp"
#include "degenlab/pipeline.hpp"
#include "degenlab/svg.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& output_dir) {
  degenlab::PipelineConfig cfg;
  try {
    cfg = degenlab::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "degenlab run: invalid config: " << e.what() << "\n"
              << "usage: degenlab run --config <file.json> [--output-dir <dir>]\n";
    return 1;
  }
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  const auto result = degenlab::run_pipeline(cfg);
  for (const auto& [name, stage] : result.report.at("stages").items()) {
    std::cout << name << ": " << stage.at("status").get<std::string>();
    if (stage.contains("diagnostic")) std::cout << " " << stage.at("diagnostic").dump();
    std::cout << "\n";
  }
  std::cout << "report: " << result.report_path << "\n";
  return result.exit_code;
}

int cmd_plot(const std::string& report_path, const std::string& kind, std::string out) {
  degenlab::Json report;
  {
    std::ifstream in(report_path);
    if (!in) {
      std::cerr << "degenlab plot: cannot open " << report_path << "\n";
      return 1;
    }
    try {
      report = degenlab::Json::parse(in);
    } catch (const std::exception& e) {
      std::cerr << "degenlab plot: " << report_path << " is not valid JSON: " << e.what() << "\n";
      return 1;
    }
  }
  const std::string dir = std::filesystem::path(report_path).parent_path().string();
  if (out.empty()) out = (std::filesystem::path(dir) / (kind + ".svg")).string();
  try {
    degenlab::write_plot(report.value("artifacts", degenlab::Json::object()), dir, kind, out);
  } catch (const degenlab::DomainError& e) {
    std::cerr << "degenlab plot: " << e.what() << "\n";
    return 1;
  }
  std::cout << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Degenerate convex integrand pipeline"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "Run pipeline stages from a JSON config");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--output-dir", output_dir, "Override output_dir from the config");

  std::string report_path, kind, out;
  auto* plot = app.add_subcommand("plot", "Render an SVG plot from a report");
  plot->add_option("--report", report_path, "report.json written by run")->required();
  plot->add_option("--kind", kind, "Plot kind")
      ->required()
      ->check(CLI::IsMember(degenlab::plot_kinds()));
  plot->add_option("--out", out, "Output SVG (default <report dir>/<kind>.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, output_dir);
    return cmd_plot(report_path, kind, out);
  } catch (const std::exception& e) {
    std::cerr << "degenlab: internal error: " << e.what() << "\n";
    return 2;
  }
}
