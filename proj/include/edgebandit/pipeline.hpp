#pragma once

#include <filesystem>

#include "edgebandit/config.hpp"
#include "edgebandit/sim.hpp"

namespace edgebandit {

// Artifact locations inside the output directory; every stage reads its
// inputs from here and writes its outputs here.
struct StagePaths {
  std::filesystem::path world;
  std::filesystem::path logs;
  std::filesystem::path user_table;
  std::filesystem::path item_table;
  std::filesystem::path centroids;
  std::filesystem::path graph;
  std::filesystem::path metrics;
  std::filesystem::path params;

  static StagePaths in(const std::filesystem::path& out_dir);
};

// Thrown by stages on missing or unparseable inputs; message names the stage
// and the offending file.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::filesystem::path& path,
             const std::string& what)
      : std::runtime_error(stage + ": " + path.string() + ": " + what) {}
};

void stage_gen_world(const RunConfig& cfg, const StagePaths& paths);
void stage_gen_logs(const RunConfig& cfg, const StagePaths& paths);
void stage_train(const RunConfig& cfg, const StagePaths& paths);
void stage_cluster(const RunConfig& cfg, const StagePaths& paths);
void stage_build_graph(const RunConfig& cfg, const StagePaths& paths);
void stage_run(const RunConfig& cfg, const StagePaths& paths);

// In-memory counterpart of stage_run used by tests and bindings: drives the
// experiment directly on provided artifacts.
RunResult run_experiment(const World& world, const TwoTowerModel& model,
                         const Centroids& centroids, const SparseGraph& graph,
                         const ExperimentConfig& config, const std::vector<double>& delay_sweep);

}  // namespace edgebandit
