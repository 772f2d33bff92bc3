#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "edgebandit/config.hpp"
#include "edgebandit/pipeline.hpp"
#include "edgebandit/report.hpp"

namespace fs = std::filesystem;
using namespace edgebandit;

int main(int argc, char** argv) {
  CLI::App app{"edgebandit: bandit recommendation engine and simulation harness"};
  app.require_subcommand(1);

  std::string config_path = "config.ini";
  std::string out_dir = "out";
  std::optional<std::int64_t> seed;
  app.add_option("--config", config_path, "configuration file (INI sections, key = value)")
      ->capture_default_str();
  app.add_option("--seed", seed, "override the master seed from the config");
  app.add_option("--out", out_dir, "artifact directory")->capture_default_str();

  auto* cmd_gen_world = app.add_subcommand("gen-world", "generate the synthetic ground truth");
  auto* cmd_gen_logs = app.add_subcommand("gen-logs", "simulate a logging policy over the world");
  auto* cmd_train = app.add_subcommand("train", "train the two-tower model on the logs");
  auto* cmd_cluster = app.add_subcommand("cluster", "cluster user embeddings");
  auto* cmd_build_graph = app.add_subcommand("build-graph", "build the sparse cluster-item graph");
  auto* cmd_run = app.add_subcommand("run", "run the configured experiment");
  auto* cmd_report = app.add_subcommand("report", "summarize a metrics file");

  std::string metrics_path;
  cmd_report->add_option("metrics", metrics_path, "metrics file (defaults to <out>/metrics.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    if (cmd_report->parsed()) {
      const fs::path path = metrics_path.empty() ? fs::path(out_dir) / "metrics.tsv"
                                                 : fs::path(metrics_path);
      if (!fs::exists(path)) {
        std::cerr << "report: " << path.string() << ": no such file\n";
        return 1;
      }
      print_report(std::cout, read_metrics_file(path));
      return 0;
    }

    RunConfig cfg = RunConfig::from_file(config_path);
    if (seed) cfg.override_seed(static_cast<std::uint64_t>(*seed));
    fs::create_directories(out_dir);
    const StagePaths paths = StagePaths::in(out_dir);

    if (cmd_gen_world->parsed()) {
      stage_gen_world(cfg, paths);
    } else if (cmd_gen_logs->parsed()) {
      stage_gen_logs(cfg, paths);
    } else if (cmd_train->parsed()) {
      stage_train(cfg, paths);
    } else if (cmd_cluster->parsed()) {
      stage_cluster(cfg, paths);
    } else if (cmd_build_graph->parsed()) {
      stage_build_graph(cfg, paths);
    } else if (cmd_run->parsed()) {
      stage_run(cfg, paths);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
