#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edgebandit/param_store.hpp"
#include "edgebandit/world.hpp"

namespace edgebandit {

enum class Policy { DiagLinUcb, EqualWeight, Greedy, UniformRandom, Oracle };

std::string policy_name(Policy p);
Policy parse_policy(const std::string& name);

struct ExperimentConfig {
  enum class Type { FreshDiscovery, CorpusExploration };
  Type type = Type::FreshDiscovery;

  Policy policy = Policy::DiagLinUcb;        // Type-I policy
  double explore_fraction = 1.0;             // Type-I traffic split
  std::vector<Policy> arm_policies = {Policy::DiagLinUcb, Policy::Greedy};  // Type-II arms
  int n_corpus_slices = 2;                   // Type-II corpus partition

  double alpha = 1.0;
  int top_k = 5;
  int context_k = 10;
  double context_tau = 0.2;
  bool renormalize_context = false;
  ColdStart cold_start = ColdStart::Infinite;
  double r_max = 1.0;
  bool graded_rewards = false;  // observe the expected reward instead of a draw

  // Graph construction knobs for Type-II arms (Type-I receives a prebuilt graph).
  int items_per_cluster = 50;
  std::optional<int> max_item_degree;

  DelaySpec delay;
  int n_shards = 4;
  std::int64_t snapshot_every = 1;
  std::int64_t metrics_every = 10;
  std::vector<std::int64_t> impression_thresholds = {1, 10, 100, 1000};

  std::int64_t inject_step = -1;  // one-shot batch injection from the spare pool
  std::int64_t inject_count = 0;

  std::uint64_t seed = 1;
  std::string arm_name;  // metrics label override (Type-I)
};

struct MetricsRow {
  std::int64_t step = 0;
  std::string arm;
  std::uint64_t impressions = 0;
  std::uint64_t explore_impressions = 0;
  std::uint64_t exploit_impressions = 0;
  double cum_reward = 0.0;
  double explore_reward = 0.0;
  double exploit_reward = 0.0;
  double cum_policy_regret = 0.0;
  double cum_coverage_regret = 0.0;
  double ctr = 0.0;
  std::int64_t infinite_ucb_count = 0;
  std::vector<std::int64_t> discoverable;  // per impression threshold
  double mean_policy_latency = 0.0;
};

struct ArmResult {
  std::string name;
  Policy policy = Policy::DiagLinUcb;
  std::vector<MetricsRow> rows;

  std::uint64_t impressions = 0;
  std::uint64_t explore_impressions = 0;
  std::uint64_t exploit_impressions = 0;
  double total_reward = 0.0;
  double explore_reward = 0.0;
  double exploit_reward = 0.0;
  double policy_regret = 0.0;
  double coverage_regret = 0.0;
  std::vector<std::int64_t> discoverable;
  std::map<ItemId, std::int64_t> impressions_by_item;
  StoreStats store;
  Snapshot final_snapshot;
};

struct RunResult {
  std::vector<ArmResult> arms;
  std::vector<MetricsRow> rows;  // emission order, all arms interleaved
  std::vector<std::int64_t> thresholds;
};

// Fresh-discovery loop: each step routes one query to the exploration slot
// (UCB scoring, top-k randomization, delayed feedback into the store) with
// probability explore_fraction, otherwise to the exploitation slot (estimated
// reward only, top-1, no feedback). Item arrivals and age-outs flow through
// the graph as deltas and are synced into the store.
RunResult run_type1(const World& world, const TwoTowerModel& model, const Centroids& centroids,
                    const SparseGraph& graph, const ExperimentConfig& config);

// Corpus-exploration loop: the corpus is hash-partitioned into disjoint
// slices and each arm runs its policy on its own slice with its own user
// pool, in exploration mode. Queries round-robin across arms so traffic is
// equal by construction.
RunResult run_type2(const World& world, const TwoTowerModel& model, const Centroids& centroids,
                    const ExperimentConfig& config);

// Slice of the corpus partition; stable hash of the item id.
int corpus_slice(ItemId item, int n_slices);

void write_metrics(std::ostream& out, const RunResult& result);
void write_metrics_file(const std::filesystem::path& path, const RunResult& result);

}  // namespace edgebandit
