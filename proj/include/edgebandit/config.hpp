#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edgebandit/sim.hpp"
#include "edgebandit/world.hpp"

namespace edgebandit {

// Pipeline-wide configuration, read from an INI-style file with [section]
// headers and key = value lines. Unknown sections or keys are rejected.
struct RunConfig {
  WorldSpec world;

  // [logs]
  std::int64_t log_events = 20000;
  LogPolicy log_policy = LogPolicy::Uniform;

  // [train]
  TwoTowerConfig train;
  int train_epochs = 10;
  int train_batch_size = 128;

  // [cluster]
  int n_clusters = 64;
  int cluster_max_iters = 50;

  // [graph]
  int items_per_cluster = 50;
  std::optional<int> max_item_degree;

  ExperimentConfig experiment;
  std::vector<double> delay_sweep;  // extra Type-I arms, one per delay

  static RunConfig from_string(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);

  // Overrides the master seed and re-derives the per-stage seeds.
  void override_seed(std::uint64_t seed);
};

}  // namespace edgebandit
