#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "vokit/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vokit: two-view visual odometry toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(vokit::cli::csv_reference());

  std::string config_path;
  std::vector<std::string> assignments;
  app.add_option("-c,--config", config_path, "sectioned key-value config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", assignments, "override a key, e.g. --set sim.seed=3 (repeatable)");

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset (images, correspondences, ground truth)");
  auto* track = app.add_subcommand("track", "pyramidal Lucas-Kanade tracking between consecutive frames");
  auto* odometry = app.add_subcommand("odometry", "estimate the camera trajectory of a dataset");
  auto* evaluate = app.add_subcommand("evaluate", "compare an estimated trajectory with ground truth");
  auto* segment = app.add_subcommand("segment", "split one frame's correspondences into rigid motions");

  CLI11_PARSE(app, argc, argv);

  try {
    vokit::io::Config cfg = config_path.empty() ? vokit::io::Config{} : vokit::io::Config::load(config_path);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (simulate->parsed()) return vokit::cli::cmd_simulate(cfg);
    if (track->parsed()) return vokit::cli::cmd_track(cfg);
    if (odometry->parsed()) return vokit::cli::cmd_odometry(cfg);
    if (evaluate->parsed()) return vokit::cli::cmd_evaluate(cfg);
    if (segment->parsed()) return vokit::cli::cmd_segment(cfg);
  } catch (const vokit::Error& e) {
    std::cerr << "error [" << vokit::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
