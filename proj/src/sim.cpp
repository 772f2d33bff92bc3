#include "edgebandit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace edgebandit {

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::DiagLinUcb: return "diag_linucb";
    case Policy::EqualWeight: return "equal_weight";
    case Policy::Greedy: return "greedy";
    case Policy::UniformRandom: return "uniform_random";
    case Policy::Oracle: return "oracle";
  }
  return "unknown";
}

Policy parse_policy(const std::string& name) {
  if (name == "diag_linucb") return Policy::DiagLinUcb;
  if (name == "equal_weight") return Policy::EqualWeight;
  if (name == "greedy") return Policy::Greedy;
  if (name == "uniform_random") return Policy::UniformRandom;
  if (name == "oracle") return Policy::Oracle;
  throw std::invalid_argument("unknown policy '" + name + "'");
}

int corpus_slice(ItemId item, int n_slices) {
  std::uint64_t z = static_cast<std::uint64_t>(item) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return static_cast<int>((z ^ (z >> 31)) % static_cast<std::uint64_t>(n_slices));
}

namespace {

std::uint64_t stable_hash(std::uint64_t v) {
  std::uint64_t z = v + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Per-arm mutable state for the closed loop.
struct Arm {
  std::string name;
  Policy policy = Policy::DiagLinUcb;
  int slice = -1;  // restricts the corpus when >= 0 (Type-II)
  SparseGraph graph;
  std::unique_ptr<ParamStore> store;
  Snapshot snap;
  Rng rng_select{0};
  Rng rng_reward{0};
  Rng rng_user{0};
  std::vector<UserId> user_pool;

  std::uint64_t impressions = 0;
  std::uint64_t explore_impressions = 0;
  std::uint64_t exploit_impressions = 0;
  std::uint64_t explore_hits = 0;
  double total_reward = 0.0;
  double explore_reward = 0.0;
  double exploit_reward = 0.0;
  double policy_regret = 0.0;
  double coverage_regret = 0.0;
  std::map<ItemId, std::int64_t> impressions_by_item;

  std::vector<MetricsRow> rows;
  std::vector<ItemId> fallback_items;
  std::int64_t fallback_version = -1;

  // Cache of the best live true-p per user; epoch advances when the live
  // item set changes.
  std::int64_t live_epoch = 0;
  std::unordered_map<UserId, std::pair<std::int64_t, double>> best_live_cache;
};

class Runner {
 public:
  Runner(const World& world, const TwoTowerModel& model, const Centroids& centroids,
         const ExperimentConfig& config)
      : world_(world), centroids_(centroids), config_(config) {
    contexts_.reserve(static_cast<std::size_t>(world.n_users()));
    for (UserId u = 0; u < world.n_users(); ++u) {
      contexts_.push_back(context_vector(model.encode_user(u), centroids, config.context_k,
                                         config.context_tau, config.renormalize_context));
    }
    upload_time_.resize(static_cast<std::size_t>(world.total_items()));
    for (ItemId j = 0; j < world.total_items(); ++j) {
      upload_time_[static_cast<std::size_t>(j)] = world.scheduled_upload_time(j);
    }
  }

  bool live_at(ItemId j, std::int64_t t) const {
    const double up = upload_time_[static_cast<std::size_t>(j)];
    const double now = static_cast<double>(t);
    return up <= now && now - up <= world_.spec().item_max_age;
  }

  double best_live_prob(Arm& arm, UserId u, std::int64_t t) {
    auto it = arm.best_live_cache.find(u);
    if (it != arm.best_live_cache.end() && it->second.first == arm.live_epoch) {
      return it->second.second;
    }
    double best = 0.0;
    for (ItemId j = 0; j < world_.total_items(); ++j) {
      if (!live_at(j, t)) continue;
      if (arm.slice >= 0 && corpus_slice(j, config_.n_corpus_slices) != arm.slice) continue;
      best = std::max(best, world_.true_reward_prob(u, j));
    }
    arm.best_live_cache[u] = {arm.live_epoch, best};
    return best;
  }

  const std::vector<ItemId>& fallback_items(Arm& arm) {
    if (arm.fallback_version != arm.graph.version()) {
      arm.fallback_items = arm.graph.active_items();
      arm.fallback_version = arm.graph.version();
    }
    return arm.fallback_items;
  }

  void sync_items_into(Arm& arm, const std::vector<ItemId>& ids, std::int64_t t) {
    std::vector<ItemSpec> specs;
    for (ItemId j : ids) {
      if (arm.slice >= 0 && corpus_slice(j, config_.n_corpus_slices) != arm.slice) continue;
      specs.push_back({j, world_.observed_item_embedding(j),
                       upload_time_[static_cast<std::size_t>(j)], true});
    }
    if (specs.empty() && std::isinf(world_.spec().item_max_age)) return;
    if (!specs.empty()) {
      const GraphDelta delta = arm.graph.merge_incremental(specs, centroids_);
      arm.store->sync_graph(delta);
      arm.live_epoch += 1;
    }
    const GraphDelta expired = arm.graph.expire_items(static_cast<double>(t),
                                                      world_.spec().item_max_age);
    if (!expired.empty()) arm.live_epoch += 1;
    arm.store->sync_graph(expired);
  }

  // One impression for user u on the arm; explore decides slot semantics.
  void query(Arm& arm, UserId u, std::int64_t t, bool explore) {
    const SparseContext& base_ctx = contexts_[static_cast<std::size_t>(u)];
    const SparseContext ctx =
        arm.policy == Policy::EqualWeight ? equal_weight(base_ctx) : base_ctx;

    std::vector<ScoredCandidate> cands;
    if (explore && (arm.policy == Policy::DiagLinUcb || arm.policy == Policy::EqualWeight)) {
      cands = score_ucb(ctx, arm.snap.edges, config_.alpha, config_.cold_start);
    } else {
      cands = score_exploit(ctx, arm.snap.edges);
    }

    ItemId chosen;
    double p_best_triggered;
    if (cands.empty()) {
      const auto& pool = fallback_items(arm);
      if (pool.empty()) return;  // nothing to show
      chosen = pool[static_cast<std::size_t>(
          arm.rng_select.uniform_int(static_cast<std::int64_t>(pool.size())))];
      p_best_triggered = world_.true_reward_prob(u, chosen);
    } else {
      std::vector<double> p_cands(cands.size());
      for (std::size_t i = 0; i < cands.size(); ++i) {
        p_cands[i] = world_.true_reward_prob(u, cands[i].item);
      }
      p_best_triggered = *std::max_element(p_cands.begin(), p_cands.end());
      if (!explore) {
        chosen = cands.front().item;  // top-1 by estimated reward
      } else {
        switch (arm.policy) {
          case Policy::DiagLinUcb:
          case Policy::EqualWeight:
            chosen = select_topk_random(cands, config_.top_k, arm.rng_select);
            break;
          case Policy::Greedy:
            chosen = cands.front().item;
            break;
          case Policy::UniformRandom:
            chosen = cands[static_cast<std::size_t>(arm.rng_select.uniform_int(
                             static_cast<std::int64_t>(cands.size())))].item;
            break;
          case Policy::Oracle: {
            std::size_t best = 0;
            for (std::size_t i = 1; i < cands.size(); ++i) {
              if (p_cands[i] > p_cands[best] ||
                  (p_cands[i] == p_cands[best] && cands[i].item < cands[best].item)) {
                best = i;
              }
            }
            chosen = cands[best].item;
            break;
          }
        }
      }
    }

    const double p_chosen = world_.true_reward_prob(u, chosen);
    const double reward =
        config_.graded_rewards ? p_chosen : world_.draw_reward(u, chosen, arm.rng_reward);

    arm.impressions += 1;
    arm.total_reward += reward;
    arm.impressions_by_item[chosen] += 1;
    arm.policy_regret += p_best_triggered - p_chosen;
    arm.coverage_regret += std::max(0.0, best_live_prob(arm, u, t) - p_best_triggered);
    if (explore) {
      arm.explore_impressions += 1;
      arm.explore_reward += reward;
      if (reward > 0.0) arm.explore_hits += 1;
      arm.store->ingest({ctx, chosen, reward, static_cast<double>(t)});
    } else {
      arm.exploit_impressions += 1;
      arm.exploit_reward += reward;
    }
  }

  MetricsRow emit(Arm& arm, std::int64_t step) const {
    MetricsRow row;
    row.step = step;
    row.arm = arm.name;
    row.impressions = arm.impressions;
    row.explore_impressions = arm.explore_impressions;
    row.exploit_impressions = arm.exploit_impressions;
    row.cum_reward = arm.total_reward;
    row.explore_reward = arm.explore_reward;
    row.exploit_reward = arm.exploit_reward;
    row.cum_policy_regret = arm.policy_regret;
    row.cum_coverage_regret = arm.coverage_regret;
    row.ctr = arm.explore_impressions == 0
                  ? 0.0
                  : static_cast<double>(arm.explore_hits) /
                        static_cast<double>(arm.explore_impressions);
    const StoreStats stats = arm.store->stats();
    row.infinite_ucb_count = stats.infinite_edges;
    row.mean_policy_latency = stats.mean_latency();
    row.discoverable.reserve(config_.impression_thresholds.size());
    for (std::int64_t th : config_.impression_thresholds) {
      std::int64_t count = 0;
      for (const auto& [item, n] : arm.impressions_by_item) {
        (void)item;
        if (n >= th) ++count;
      }
      row.discoverable.push_back(count);
    }
    return row;
  }

  void finalize(Arm& arm, RunResult& result, std::int64_t final_step) {
    MetricsRow row = emit(arm, final_step);
    result.rows.push_back(row);
    arm.rows.push_back(row);
    ArmResult res;
    res.name = arm.name;
    res.policy = arm.policy;
    res.rows = std::move(arm.rows);
    res.impressions = arm.impressions;
    res.explore_impressions = arm.explore_impressions;
    res.exploit_impressions = arm.exploit_impressions;
    res.total_reward = arm.total_reward;
    res.explore_reward = arm.explore_reward;
    res.exploit_reward = arm.exploit_reward;
    res.policy_regret = arm.policy_regret;
    res.coverage_regret = arm.coverage_regret;
    res.discoverable = row.discoverable;
    res.impressions_by_item = arm.impressions_by_item;
    res.store = arm.store->stats();
    res.final_snapshot = arm.store->snapshot();
    result.arms.push_back(std::move(res));
  }

  const World& world_;
  const Centroids& centroids_;
  ExperimentConfig config_;
  std::vector<SparseContext> contexts_;
  std::vector<double> upload_time_;
};

std::vector<ItemId> injection_batch(const World& world, const ExperimentConfig& config) {
  std::vector<ItemId> out;
  const std::int64_t start = world.n_scheduled_items();
  const std::int64_t n = std::min<std::int64_t>(config.inject_count, world.spec().spare_items);
  for (std::int64_t i = 0; i < n; ++i) out.push_back(start + i);
  return out;
}

}  // namespace

RunResult run_type1(const World& world, const TwoTowerModel& model, const Centroids& centroids,
                    const SparseGraph& graph, const ExperimentConfig& config) {
  if (config.explore_fraction < 0.0 || config.explore_fraction > 1.0) {
    throw std::invalid_argument("explore_fraction must be in [0, 1]");
  }
  Runner runner(world, model, centroids, config);
  RunResult result;
  result.thresholds = config.impression_thresholds;

  Arm arm;
  arm.name = config.arm_name.empty() ? policy_name(config.policy) : config.arm_name;
  arm.policy = config.policy;
  arm.graph = graph;
  arm.store = std::make_unique<ParamStore>(config.n_shards, config.delay,
                                           Rng::derive(config.seed, 0x57011), config.r_max);
  arm.store->sync_graph(full_graph_delta(graph));
  arm.rng_select = Rng(Rng::derive(config.seed, 0x5e1));
  arm.rng_reward = Rng(Rng::derive(config.seed, 0x4e4));
  arm.rng_user = Rng(Rng::derive(config.seed, 0x0575));
  Rng rng_route(Rng::derive(config.seed, 0x4073));

  const std::int64_t horizon = world.spec().horizon;
  for (std::int64_t t = 0; t < horizon; ++t) {
    std::vector<ItemId> incoming = world.arrivals_at(t);
    if (t == config.inject_step) {
      for (ItemId j : injection_batch(world, config)) {
        runner.upload_time_[static_cast<std::size_t>(j)] = static_cast<double>(t);
        incoming.push_back(j);
      }
    }
    runner.sync_items_into(arm, incoming, t);
    arm.store->advance(static_cast<double>(t));
    if (t % config.snapshot_every == 0) arm.snap = arm.store->snapshot();
    if (t % config.metrics_every == 0) {
      MetricsRow row = runner.emit(arm, t);
      result.rows.push_back(row);
      arm.rows.push_back(row);
    }

    const UserId u = arm.rng_user.uniform_int(world.n_users());
    const bool explore = rng_route.u01() < config.explore_fraction;
    runner.query(arm, u, t, explore);
  }
  runner.finalize(arm, result, horizon);
  return result;
}

RunResult run_type2(const World& world, const TwoTowerModel& model, const Centroids& centroids,
                    const ExperimentConfig& config) {
  if (config.arm_policies.empty()) throw std::invalid_argument("type-II needs at least one arm");
  if (config.n_corpus_slices < static_cast<int>(config.arm_policies.size())) {
    throw std::invalid_argument("need at least as many corpus slices as arms");
  }
  Runner runner(world, model, centroids, config);
  RunResult result;
  result.thresholds = config.impression_thresholds;

  const int n_arms = static_cast<int>(config.arm_policies.size());
  std::vector<Arm> arms(static_cast<std::size_t>(n_arms));
  for (int a = 0; a < n_arms; ++a) {
    Arm& arm = arms[static_cast<std::size_t>(a)];
    arm.policy = config.arm_policies[static_cast<std::size_t>(a)];
    arm.name = policy_name(arm.policy) + "_slice" + std::to_string(a);
    arm.slice = a;
    std::vector<ItemSpec> specs;
    for (ItemId j = 0; j < world.spec().n_items_initial; ++j) {
      if (corpus_slice(j, config.n_corpus_slices) != a) continue;
      specs.push_back({j, model.encode_item(j), world.scheduled_upload_time(j), true});
    }
    if (specs.empty()) throw std::invalid_argument("corpus slice " + std::to_string(a) + " is empty");
    arm.graph = build_graph(centroids, specs, config.items_per_cluster, config.max_item_degree);
    arm.store = std::make_unique<ParamStore>(
        config.n_shards, config.delay,
        Rng::derive(config.seed, 0x57011 + static_cast<std::uint64_t>(a)), config.r_max);
    arm.store->sync_graph(full_graph_delta(arm.graph));
    arm.rng_select = Rng(Rng::derive(config.seed, 0x5e1 + static_cast<std::uint64_t>(a)));
    arm.rng_reward = Rng(Rng::derive(config.seed, 0x4e4 + static_cast<std::uint64_t>(a)));
    arm.rng_user = Rng(Rng::derive(config.seed, 0x0575 + static_cast<std::uint64_t>(a)));
    for (UserId u = 0; u < world.n_users(); ++u) {
      if (static_cast<int>(stable_hash(static_cast<std::uint64_t>(u)) %
                           static_cast<std::uint64_t>(n_arms)) == a) {
        arm.user_pool.push_back(u);
      }
    }
    if (arm.user_pool.empty()) throw std::invalid_argument("user pool for arm " +
                                                           std::to_string(a) + " is empty");
  }

  const std::int64_t horizon = world.spec().horizon;
  for (std::int64_t t = 0; t < horizon; ++t) {
    std::vector<ItemId> incoming = world.arrivals_at(t);
    if (t == config.inject_step) {
      for (ItemId j : injection_batch(world, config)) {
        runner.upload_time_[static_cast<std::size_t>(j)] = static_cast<double>(t);
        incoming.push_back(j);
      }
    }
    for (auto& arm : arms) {
      runner.sync_items_into(arm, incoming, t);
      arm.store->advance(static_cast<double>(t));
      if (t % config.snapshot_every == 0) arm.snap = arm.store->snapshot();
      if (t % config.metrics_every == 0) {
        MetricsRow row = runner.emit(arm, t);
        result.rows.push_back(row);
        arm.rows.push_back(row);
      }
    }
    Arm& arm = arms[static_cast<std::size_t>(t % n_arms)];
    const UserId u = arm.user_pool[static_cast<std::size_t>(
        arm.rng_user.uniform_int(static_cast<std::int64_t>(arm.user_pool.size())))];
    runner.query(arm, u, t, /*explore=*/true);
  }
  for (auto& arm : arms) runner.finalize(arm, result, horizon);
  return result;
}

void write_metrics(std::ostream& out, const RunResult& result) {
  out << "step\tarm\timpressions\texplore_impressions\texploit_impressions\tcum_reward"
         "\texplore_reward\texploit_reward\tcum_policy_regret\tcum_coverage_regret\tctr"
         "\tinfinite_ucb_count";
  for (std::int64_t th : result.thresholds) out << "\tdisc_ge_" << th;
  out << "\tmean_policy_latency\n";
  for (const auto& r : result.rows) {
    out << r.step << '\t' << r.arm << '\t' << r.impressions << '\t' << r.explore_impressions
        << '\t' << r.exploit_impressions << '\t' << fmt_double(r.cum_reward) << '\t'
        << fmt_double(r.explore_reward) << '\t' << fmt_double(r.exploit_reward) << '\t'
        << fmt_double(r.cum_policy_regret) << '\t' << fmt_double(r.cum_coverage_regret) << '\t'
        << fmt_double(r.ctr) << '\t' << r.infinite_ucb_count;
    for (std::int64_t v : r.discoverable) out << '\t' << v;
    out << '\t' << fmt_double(r.mean_policy_latency) << '\n';
  }
}

void write_metrics_file(const std::filesystem::path& path, const RunResult& result) {
  AtomicFile f(path);
  write_metrics(f.stream(), result);
  f.commit();
}

}  // namespace edgebandit
