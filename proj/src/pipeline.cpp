#include "edgebandit/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

namespace edgebandit {

namespace fs = std::filesystem;

StagePaths StagePaths::in(const fs::path& out_dir) {
  StagePaths p;
  p.world = out_dir / "world.txt";
  p.logs = out_dir / "logs.tsv";
  p.user_table = out_dir / "users.emb";
  p.item_table = out_dir / "items.emb";
  p.centroids = out_dir / "centroids.emb";
  p.graph = out_dir / "graph.txt";
  p.metrics = out_dir / "metrics.tsv";
  p.params = out_dir / "params.txt";
  return p;
}

namespace {

template <typename Fn>
auto load_or_fail(const std::string& stage, const fs::path& path, Fn load) {
  if (!fs::exists(path)) throw StageError(stage, path, "input missing (run the earlier stage)");
  try {
    return load(path);
  } catch (const std::exception& e) {
    throw StageError(stage, path, e.what());
  }
}

}  // namespace

void stage_gen_world(const RunConfig& cfg, const StagePaths& paths) {
  const World world(cfg.world);
  world.save_file(paths.world);
}

void stage_gen_logs(const RunConfig& cfg, const StagePaths& paths) {
  const World world = load_or_fail("gen-logs", paths.world,
                                   [](const fs::path& p) { return World::load_file(p); });
  const auto res = generate_logs(world, cfg.log_policy, cfg.log_events,
                                 Rng::derive(cfg.world.seed, 0x1));
  write_interactions_file(paths.logs, res.log);
}

void stage_train(const RunConfig& cfg, const StagePaths& paths) {
  const World world = load_or_fail("train", paths.world,
                                   [](const fs::path& p) { return World::load_file(p); });
  const InteractionLog log =
      load_or_fail("train", paths.logs, [&](const fs::path& p) {
        return read_interactions_file(p, world.n_users(), world.total_items());
      });
  TwoTowerModel model(world.n_users(), world.spec().n_items_initial, cfg.train);
  model.fit(log, cfg.train_epochs, cfg.train_batch_size);
  write_table_file(paths.user_table, model.user_table());
  write_table_file(paths.item_table, model.item_table());
}

void stage_cluster(const RunConfig& cfg, const StagePaths& paths) {
  const IdTable users = load_or_fail("cluster", paths.user_table,
                                     [](const fs::path& p) { return read_table_file(p); });
  const auto res = kmeans(users.rows, cfg.n_clusters, cfg.cluster_max_iters,
                          Rng::derive(cfg.world.seed, 0x2));
  write_table_file(paths.centroids, res.centroids.to_table());
}

void stage_build_graph(const RunConfig& cfg, const StagePaths& paths) {
  const World world = load_or_fail("build-graph", paths.world,
                                   [](const fs::path& p) { return World::load_file(p); });
  const IdTable items = load_or_fail("build-graph", paths.item_table,
                                     [](const fs::path& p) { return read_table_file(p); });
  const Centroids centroids =
      load_or_fail("build-graph", paths.centroids,
                   [](const fs::path& p) { return Centroids::from_table(read_table_file(p)); });
  if (cfg.items_per_cluster > static_cast<int>(items.size())) {
    std::cerr << "build-graph: items_per_cluster (" << cfg.items_per_cluster
              << ") exceeds corpus size (" << items.size() << "); clusters hold the full corpus\n";
  }
  std::vector<ItemSpec> specs;
  specs.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const ItemId id = items.ids[i];
    specs.push_back({id, items.rows[i], world.scheduled_upload_time(id), true});
  }
  const SparseGraph graph =
      build_graph(centroids, specs, cfg.items_per_cluster, cfg.max_item_degree);
  write_graph_file(paths.graph, graph);
}

RunResult run_experiment(const World& world, const TwoTowerModel& model,
                         const Centroids& centroids, const SparseGraph& graph,
                         const ExperimentConfig& config, const std::vector<double>& delay_sweep) {
  if (config.type == ExperimentConfig::Type::CorpusExploration) {
    return run_type2(world, model, centroids, config);
  }
  if (delay_sweep.empty()) {
    return run_type1(world, model, centroids, graph, config);
  }
  RunResult combined;
  combined.thresholds = config.impression_thresholds;
  for (double delay : delay_sweep) {
    ExperimentConfig sweep = config;
    sweep.delay = DelaySpec::constant(delay);
    sweep.arm_name = "delay_" + fmt_double(delay);
    RunResult r = run_type1(world, model, centroids, graph, sweep);
    for (auto& row : r.rows) combined.rows.push_back(std::move(row));
    for (auto& arm : r.arms) combined.arms.push_back(std::move(arm));
  }
  return combined;
}

void stage_run(const RunConfig& cfg, const StagePaths& paths) {
  World world = load_or_fail("run", paths.world,
                             [](const fs::path& p) { return World::load_file(p); });
  const IdTable users = load_or_fail("run", paths.user_table,
                                     [](const fs::path& p) { return read_table_file(p); });
  const IdTable items = load_or_fail("run", paths.item_table,
                                     [](const fs::path& p) { return read_table_file(p); });
  const Centroids centroids =
      load_or_fail("run", paths.centroids,
                   [](const fs::path& p) { return Centroids::from_table(read_table_file(p)); });
  TwoTowerModel model(users, items, cfg.train);
  if (world.spec().linear_rewards) {
    world.plant_linear_model(centroids, cfg.experiment.context_k, cfg.experiment.context_tau);
  }
  SparseGraph graph;
  if (cfg.experiment.type == ExperimentConfig::Type::FreshDiscovery) {
    graph = load_or_fail("run", paths.graph,
                         [](const fs::path& p) { return read_graph_file(p); });
  }
  const RunResult result =
      run_experiment(world, model, centroids, graph, cfg.experiment, cfg.delay_sweep);
  write_metrics_file(paths.metrics, result);
  // Lookup-service view of the final bandit parameters, first arm.
  if (!result.arms.empty()) {
    write_params_file(paths.params, result.arms.front().final_snapshot);
  }
}

}  // namespace edgebandit
