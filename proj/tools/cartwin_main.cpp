// Command-line workbench for the scaled-car digital twin: system
// identification, federated-filter validation, controller comparison,
// agent training, KPI extraction, and reference-path export.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cartwin/errors.hpp"
#include "cartwin/harness.hpp"
#include "cartwin/io/config.hpp"

namespace {

cartwin::Config load_config(const std::string& file) {
  if (file.empty()) return cartwin::Config{};
  return cartwin::Config::from_file(file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cartwin - scaled robotic car digital-twin workbench"};
  app.require_subcommand(1);

  std::string config_file;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string tag = "run";
  app.add_option("--config", config_file, "key = value configuration file")
      ->capture_default_str();
  app.add_option("--seed", seed, "random seed (all runs are deterministic)")
      ->capture_default_str();
  app.add_option("--out", out, "output root directory")->capture_default_str();
  app.add_option("--tag", tag, "run tag used in the output layout")
      ->capture_default_str();

  auto* identify = app.add_subcommand(
      "identify", "two-stage least-squares parameter identification");
  auto* fekf = app.add_subcommand(
      "fekf", "federated filter validation on the noisy oval manoeuvre");
  auto* track = app.add_subcommand(
      "track", "benchmark controller comparison with KPI report");
  std::string policy_file;
  track->add_option("--policy", policy_file, "trained policy for the drl row");
  auto* train =
      app.add_subcommand("train", "train the steering agent on the S path");
  bool no_demonstrator = false;
  train->add_flag("--no-demonstrator", no_demonstrator,
                  "drop the demonstrator term from the reward");
  auto* kpi = app.add_subcommand("kpi", "recompute KPIs from a trace csv");
  std::string trace_file;
  kpi->add_option("--trace", trace_file, "csv with dy and delta columns")
      ->required();
  auto* paths = app.add_subcommand("paths", "reference path utilities");
  auto* paths_export =
      paths->add_subcommand("export", "write all reference paths as csv");
  paths->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const cartwin::Config cfg = load_config(config_file);
    if (identify->parsed()) {
      cartwin::run_identification(cfg, seed, out + "/identify/" + tag);
    } else if (fekf->parsed()) {
      cartwin::run_fekf_validation(cfg, seed, out + "/fekf/" + tag);
    } else if (track->parsed()) {
      cartwin::run_tracking_comparison(cfg, seed, out + "/track/" + tag,
                                       policy_file);
    } else if (train->parsed()) {
      cartwin::run_training(cfg, seed, out + "/train/" + tag,
                            !no_demonstrator);
    } else if (kpi->parsed()) {
      cartwin::run_kpi_tool(trace_file, out + "/kpi/" + tag);
    } else if (paths_export->parsed()) {
      cartwin::run_paths_export(cfg, out + "/paths/" + tag);
    }
  } catch (const cartwin::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
