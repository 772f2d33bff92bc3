// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. Run directly or through ctest. An optional argument restricts the
// run to one criterion number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edgebandit/linucb.hpp"
#include "edgebandit/pipeline.hpp"
#include "edgebandit/sim.hpp"

using namespace edgebandit;

namespace {

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

IdTable latents_as_table(const World& w, bool users) {
  IdTable t;
  const std::int64_t n = users ? w.n_users() : w.total_items();
  for (std::int64_t i = 0; i < n; ++i) {
    t.ids.push_back(i);
    t.rows.push_back(users ? w.user_latent(i) : w.item_latent(i));
  }
  return t;
}

struct Artifacts {
  World world;
  TwoTowerModel model;
  Centroids centroids;
  SparseGraph graph;
};

// Oracle-embedding pipeline: clusters and graph are built from the true
// latents so the bandit-level criteria are isolated from embedding quality.
Artifacts latent_artifacts(const WorldSpec& spec, int n_clusters, int items_per_cluster) {
  World world(spec);
  TwoTowerConfig tt;
  tt.dim = spec.latent_dim;
  TwoTowerModel model(latents_as_table(world, true), latents_as_table(world, false), tt);
  std::vector<std::vector<double>> user_rows;
  for (UserId u = 0; u < world.n_users(); ++u) user_rows.push_back(world.user_latent(u));
  auto km = kmeans(user_rows, n_clusters, 50, spec.seed ^ 0xacce97);
  std::vector<ItemSpec> specs;
  for (ItemId j = 0; j < spec.n_items_initial; ++j) {
    specs.push_back({j, world.item_latent(j), 0.0, true});
  }
  SparseGraph graph = build_graph(km.centroids, specs, items_per_cluster);
  return {std::move(world), std::move(model), std::move(km.centroids), std::move(graph)};
}

SparseContext one_hot(ClusterId c) {
  SparseContext ctx;
  ctx.entries.push_back({c, 1.0});
  return ctx;
}

// --- criterion 1: one-hot equivalence of LinUCB and the diagonal variant ---
void criterion_one_hot_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  const int n_clusters = 16;
  const int n_items = 50;
  const int steps = 10000;

  LinUcb lin(n_items, n_clusters, 1.0);
  EdgeBag bag;
  for (ClusterId c = 0; c < n_clusters; ++c) {
    for (ItemId j = 0; j < n_items; ++j) bag.insert(c, j);
  }
  // A fixed reward table drives both algorithms identically.
  Rng table_rng(404);
  std::vector<std::vector<double>> p(static_cast<std::size_t>(n_items),
                                     std::vector<double>(static_cast<std::size_t>(n_clusters)));
  for (auto& row : p) {
    for (double& v : row) v = table_rng.u01();
  }
  Rng ctx_rng(405);
  Rng reward_rng(406);
  for (int t = 0; t < steps; ++t) {
    const auto c = static_cast<ClusterId>(ctx_rng.uniform_int(n_clusters));
    std::vector<double> x(static_cast<std::size_t>(n_clusters), 0.0);
    x[static_cast<std::size_t>(c)] = 1.0;

    const int lin_choice = lin.select(x);
    const auto scored = score_ucb(one_hot(c), bag, 1.0, ColdStart::Prior);
    require(!scored.empty(), "no candidates");
    const ItemId diag_choice = scored.front().item;
    require(lin_choice == static_cast<int>(diag_choice),
            "selection diverged at step " + std::to_string(t));

    const double reward =
        reward_rng.u01() < p[static_cast<std::size_t>(diag_choice)][static_cast<std::size_t>(c)]
            ? 1.0
            : 0.0;
    lin.update(lin_choice, x, reward);
    update_item_edges(bag, diag_choice, one_hot(c), reward);
  }
  for (ItemId j = 0; j < n_items; ++j) {
    const auto& cov = lin.covariance(static_cast<int>(j));
    const auto& bias = lin.bias(static_cast<int>(j));
    for (int c = 0; c < n_clusters; ++c) {
      const auto* ep = bag.find(static_cast<ClusterId>(c), j);
      const double a_cc = cov[static_cast<std::size_t>(c) * n_clusters + static_cast<std::size_t>(c)];
      require(std::abs(ep->d - a_cc) <= 1e-9, "covariance diagonal mismatch");
      require(std::abs(ep->b - bias[static_cast<std::size_t>(c)]) <= 1e-9, "bias mismatch");
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(secs < 10.0, "runtime " + std::to_string(secs) + "s exceeds 10s");
}

// --- criterion 2: graph builder equals brute force ---
void criterion_graph_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 3 + static_cast<int>(rng.uniform_int(6));
    const int n_clusters = 1 + static_cast<int>(rng.uniform_int(32));
    const int n_items = 1 + static_cast<int>(rng.uniform_int(1000));
    const int w = 1 + static_cast<int>(rng.uniform_int(20));

    Centroids cents;
    auto unit_vec = [&]() {
      std::vector<double> v(static_cast<std::size_t>(dim));
      for (double& x : v) x = rng.normal();
      normalize(v);
      return v;
    };
    for (int c = 0; c < n_clusters; ++c) cents.vectors.push_back(unit_vec());
    std::vector<ItemSpec> items;
    for (int j = 0; j < n_items; ++j) items.push_back({j, unit_vec(), 0.0, true});

    const auto g = build_graph(cents, items, w);
    for (int c = 0; c < n_clusters; ++c) {
      std::vector<std::pair<double, ItemId>> scored;
      for (const auto& it : items) {
        scored.emplace_back(dot(cents.vectors[static_cast<std::size_t>(c)], it.embedding), it.id);
      }
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      std::set<ItemId> expected;
      for (int i = 0; i < w && i < n_items; ++i) {
        expected.insert(scored[static_cast<std::size_t>(i)].second);
      }
      std::set<ItemId> got;
      for (const auto& e : g.items_for(static_cast<ClusterId>(c))) got.insert(e.item);
      require(got == expected, "top-W mismatch on trial " + std::to_string(trial));
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(secs < 30.0, "runtime " + std::to_string(secs) + "s exceeds 30s");
}

// --- criterion 3: sharding/commutativity of the parameter store ---
void criterion_sharding_commutativity() {
  Rng rng(888);
  const int n_clusters = 12;
  const int n_items = 40;
  GraphDelta graph;
  graph.new_version = 1;
  for (ClusterId c = 0; c < n_clusters; ++c) {
    for (ItemId j = 0; j < n_items; ++j) graph.added.push_back({c, j, 0.0});
  }
  std::vector<FeedbackEvent> events;
  for (int i = 0; i < 1000; ++i) {
    FeedbackEvent ev;
    SparseContext ctx;
    const int support = 1 + static_cast<int>(rng.uniform_int(4));
    std::set<ClusterId> used;
    while (static_cast<int>(used.size()) < support) {
      used.insert(static_cast<ClusterId>(rng.uniform_int(n_clusters)));
    }
    for (ClusterId c : used) ctx.entries.push_back({c, 0.05 + 0.9 * rng.u01() / support});
    ev.context = ctx;
    ev.item = rng.uniform_int(n_items);
    ev.reward = rng.u01() < 0.5 ? 1.0 : 0.0;
    ev.emit_time = 0.0;
    events.push_back(std::move(ev));
  }

  auto run = [&](int shards, const std::vector<std::size_t>& order) {
    ParamStore store(shards, DelaySpec::constant(0.0), 42);
    store.sync_graph(graph);
    for (std::size_t idx : order) store.ingest(events[idx]);
    store.advance(0.0);
    return store.snapshot();
  };
  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto base = run(1, order);

  auto check_same = [&](const Snapshot& other, const std::string& label) {
    for (const auto& [cluster, list] : base.edges.by_cluster) {
      for (const auto& [item, ep] : list) {
        const auto* o = other.edges.find(cluster, item);
        require(o != nullptr, label + ": missing edge");
        require(std::abs(o->d - ep.d) <= 1e-12 * ep.d, label + ": d diverged");
        require(std::abs(o->b - ep.b) <= 1e-12 * std::max(1.0, std::abs(ep.b)),
                label + ": b diverged");
        require(o->n == ep.n, label + ": n diverged");
      }
    }
  };
  for (int shards : {2, 8}) check_same(run(shards, order), std::to_string(shards) + " shards");
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(order);
    check_same(run(4, order), "permutation " + std::to_string(trial));
  }
}

// --- criterion 4: delay injection degrades explore reward ---
void criterion_delay_direction() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> delays = {0.0, 20.0, 40.0};
  const int n_seeds = 20;
  std::vector<std::vector<double>> rewards(delays.size());

  for (int seed = 0; seed < n_seeds; ++seed) {
    WorldSpec spec;
    spec.n_users = 300;
    spec.n_items_initial = 120;
    spec.latent_dim = 12;
    spec.n_components = 8;
    spec.component_noise = 0.3;
    spec.reward_scale = 6.0;
    spec.reward_bias = -3.0;
    spec.horizon = 1500;
    spec.seed = 9000 + static_cast<std::uint64_t>(seed);
    const auto art = latent_artifacts(spec, 8, 15);

    for (std::size_t di = 0; di < delays.size(); ++di) {
      ExperimentConfig cfg;
      cfg.explore_fraction = 1.0;
      cfg.context_k = 4;
      cfg.top_k = 5;
      cfg.metrics_every = 10000;
      cfg.delay = DelaySpec::constant(delays[di]);
      cfg.seed = 100 + static_cast<std::uint64_t>(seed);
      const auto res = run_type1(art.world, art.model, art.centroids, art.graph, cfg);
      rewards[di].push_back(res.arms[0].explore_reward);
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  require(mean(rewards[0]) > mean(rewards[1]), "mean reward not decreasing 0 -> 20");
  require(mean(rewards[1]) > mean(rewards[2]), "mean reward not decreasing 20 -> 40");
  auto pairwise = [&](std::size_t a, std::size_t b) {
    int wins = 0;
    for (int s = 0; s < n_seeds; ++s) {
      if (rewards[a][static_cast<std::size_t>(s)] > rewards[b][static_cast<std::size_t>(s)]) ++wins;
    }
    return wins;
  };
  const int w01 = pairwise(0, 1);
  const int w12 = pairwise(1, 2);
  require(w01 >= 16, "0 > 20 held on only " + std::to_string(w01) + "/20 seeds");
  require(w12 >= 16, "20 > 40 held on only " + std::to_string(w12) + "/20 seeds");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(secs < 300.0, "runtime " + std::to_string(secs) + "s exceeds 5 minutes");
}

// --- criterion 5: weighted contexts beat equal weights ---
void criterion_weighted_context() {
  const int n_seeds = 20;
  int diag_wins = 0;
  for (int seed = 0; seed < n_seeds; ++seed) {
    WorldSpec spec;
    spec.n_users = 300;
    spec.n_items_initial = 120;
    spec.latent_dim = 12;
    spec.n_components = 8;
    spec.component_noise = 0.3;
    spec.user_blend = 0.8;  // most users straddle two interest directions
    spec.reward_scale = 6.0;
    spec.reward_bias = -3.0;
    spec.horizon = 2000;
    spec.seed = 5000 + static_cast<std::uint64_t>(seed);
    const auto art = latent_artifacts(spec, 8, 15);

    auto run_policy = [&](Policy p) {
      ExperimentConfig cfg;
      cfg.policy = p;
      cfg.explore_fraction = 1.0;
      cfg.context_k = 4;
      cfg.top_k = 5;
      cfg.metrics_every = 10000;
      cfg.seed = 300 + static_cast<std::uint64_t>(seed);
      return run_type1(art.world, art.model, art.centroids, art.graph, cfg).arms[0].total_reward;
    };
    if (run_policy(Policy::DiagLinUcb) > run_policy(Policy::EqualWeight)) ++diag_wins;
  }
  require(diag_wins >= 15,
          "weighted contexts won on only " + std::to_string(diag_wins) + "/20 seeds");
}

// --- criterion 6: infinite-UCB spike and decay ---
void criterion_infinite_spike() {
  WorldSpec spec;
  spec.n_users = 400;
  spec.n_items_initial = 100;
  spec.latent_dim = 12;
  spec.n_components = 16;
  spec.horizon = 7000;
  spec.spare_items = 50;
  spec.seed = 31337;
  const int n_clusters = 16;
  const auto art = latent_artifacts(spec, n_clusters, 200);  // under-full clusters

  ExperimentConfig cfg;
  cfg.explore_fraction = 1.0;
  cfg.context_k = 8;
  cfg.top_k = 5;
  cfg.metrics_every = 1;
  cfg.inject_step = 1500;
  cfg.inject_count = 50;
  cfg.seed = 99;
  const auto res = run_type1(art.world, art.model, art.centroids, art.graph, cfg);
  const auto& rows = res.arms[0].rows;

  const auto& before = rows[static_cast<std::size_t>(cfg.inject_step - 1)];
  const auto& spike = rows[static_cast<std::size_t>(cfg.inject_step)];
  const std::int64_t jump = spike.infinite_ucb_count - before.infinite_ucb_count;
  // Every injected item lands in every cluster here, so the expected jump is
  //, cfg.inject_count * n_clusters new cold edges.
  require(jump == cfg.inject_count * n_clusters,
          "spike of " + std::to_string(jump) + " does not match the new edge count");
  require(before.infinite_ucb_count == 0, "gauge had not settled before injection");

  bool decayed = false;
  std::int64_t decay_step = -1;
  for (std::size_t i = static_cast<std::size_t>(cfg.inject_step);
       i < rows.size() && rows[i].step <= cfg.inject_step + 5000; ++i) {
    if (rows[i].infinite_ucb_count == 0) {
      decayed = true;
      decay_step = rows[i].step;
      break;
    }
  }
  require(decayed, "gauge did not return to zero within 5000 exploration steps");
  // Spike then decay: monotone non-increasing after the injection.
  for (std::size_t i = static_cast<std::size_t>(cfg.inject_step) + 1; i < rows.size(); ++i) {
    require(rows[i].infinite_ucb_count <= rows[i - 1].infinite_ucb_count,
            "gauge increased without an injection");
  }
  (void)decay_step;
}

// --- criterion 7: corpus growth under exploration ---
void criterion_corpus_growth() {
  const int n_seeds = 10;
  int larger_at_all_thresholds = 0;
  double bandit_rate_sum = 0.0;
  double greedy_rate_sum = 0.0;
  for (int seed = 0; seed < n_seeds; ++seed) {
    WorldSpec spec;
    spec.n_users = 300;
    spec.n_items_initial = 240;
    spec.latent_dim = 12;
    spec.n_components = 8;
    spec.reward_scale = 6.0;
    spec.reward_bias = -3.0;
    spec.horizon = 6000;
    spec.seed = 7000 + static_cast<std::uint64_t>(seed);
    const auto art = latent_artifacts(spec, 8, 40);

    ExperimentConfig cfg;
    cfg.type = ExperimentConfig::Type::CorpusExploration;
    cfg.arm_policies = {Policy::DiagLinUcb, Policy::Greedy};
    cfg.n_corpus_slices = 2;
    cfg.context_k = 4;
    cfg.top_k = 5;
    cfg.items_per_cluster = 40;
    cfg.metrics_every = 10000;
    cfg.impression_thresholds = {1, 10, 100};
    cfg.seed = 800 + static_cast<std::uint64_t>(seed);
    const auto res = run_type2(art.world, art.model, art.centroids, cfg);
    const auto& bandit = res.arms[0];
    const auto& greedy = res.arms[1];
    bool all = true;
    for (std::size_t i = 0; i < 3; ++i) {
      if (bandit.discoverable[i] <= greedy.discoverable[i]) all = false;
    }
    if (all) ++larger_at_all_thresholds;
    bandit_rate_sum += bandit.total_reward / static_cast<double>(bandit.impressions);
    greedy_rate_sum += greedy.total_reward / static_cast<double>(greedy.impressions);
  }
  require(larger_at_all_thresholds == n_seeds,
          "bandit corpus larger on only " + std::to_string(larger_at_all_thresholds) + "/10 seeds");
  const double deficit = (greedy_rate_sum - bandit_rate_sum) / greedy_rate_sum;
  require(deficit <= 0.10,
          "mean per-impression reward deficit " + std::to_string(deficit) + " exceeds 10%");
}

// --- criterion 8: two-tower gradient and retrieval quality ---
void criterion_two_tower() {
  // Gradient check on a 4x4 world, h = 1e-5.
  TwoTowerConfig cfg;
  cfg.dim = 4;
  cfg.temperature = 0.2;
  cfg.learning_rate = 1.0;
  cfg.seed = 2024;
  const std::vector<std::pair<std::int64_t, std::int64_t>> batch = {
      {0, 0}, {1, 1}, {2, 2}, {3, 3}, {1, 3}};
  TwoTowerModel analytic(4, 4, cfg);
  TwoTowerModel probe(4, 4, cfg);
  std::vector<std::vector<double>> before_u, before_v;
  for (int i = 0; i < 4; ++i) before_u.push_back(analytic.raw_user_row(i));
  for (int i = 0; i < 4; ++i) before_v.push_back(analytic.raw_item_row(i));
  analytic.train_step(batch);
  const double h = 1e-5;
  double max_rel = 0.0;
  for (int user_side = 0; user_side < 2; ++user_side) {
    for (int id = 0; id < 4; ++id) {
      for (int k = 0; k < 4; ++k) {
        auto& row = user_side ? probe.raw_user_row(id) : probe.raw_item_row(id);
        const double orig = row[static_cast<std::size_t>(k)];
        row[static_cast<std::size_t>(k)] = orig + h;
        const double up = probe.batch_softmax_loss(batch);
        row[static_cast<std::size_t>(k)] = orig - h;
        const double down = probe.batch_softmax_loss(batch);
        row[static_cast<std::size_t>(k)] = orig;
        const double fd = (up - down) / (2.0 * h);
        const auto& after = user_side ? analytic.raw_user_row(id) : analytic.raw_item_row(id);
        const auto& before =
            user_side ? before_u[static_cast<std::size_t>(id)] : before_v[static_cast<std::size_t>(id)];
        const double grad =
            before[static_cast<std::size_t>(k)] - after[static_cast<std::size_t>(k)];
        const double scale = std::max({std::abs(fd), std::abs(grad), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - grad) / scale);
      }
    }
  }
  require(max_rel < 1e-4, "gradient check rel err " + std::to_string(max_rel));

  // Retrieval: train on a separable world, demand 5x chance recall@10.
  const std::int64_t n = 200;
  TwoTowerConfig rc;
  rc.dim = 16;
  rc.temperature = 0.1;
  rc.learning_rate = 0.2;
  rc.seed = 2025;
  TwoTowerModel model(n, n, rc);
  InteractionLog log;
  double t = 0.0;
  Rng order(1);
  for (int rep = 0; rep < 20; ++rep) {
    for (std::int64_t i = 0; i < n; ++i) log.records.push_back({i, i, t++});
  }
  model.fit(log, 6, 64);
  std::vector<std::pair<std::int64_t, std::int64_t>> held;
  for (std::int64_t i = 0; i < n; ++i) held.emplace_back(i, i);
  const double recall = model.evaluate_recall(held, 10);
  const double chance = 10.0 / static_cast<double>(n);
  require(recall >= 5.0 * chance,
          "recall@10 " + std::to_string(recall) + " below 5x chance " + std::to_string(chance));
}

// --- criterion 9: k-means sanity ---
void criterion_kmeans() {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 2 + static_cast<int>(rng.uniform_int(8));
    const int m = 30 + static_cast<int>(rng.uniform_int(150));
    const int c = 2 + static_cast<int>(rng.uniform_int(8));
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < m; ++i) {
      std::vector<double> p(static_cast<std::size_t>(dim));
      for (double& x : p) x = rng.normal();
      normalize(p);
      pts.push_back(std::move(p));
    }
    const auto res = kmeans(pts, c, 40, rng.next_u64());
    for (std::size_t i = 1; i < res.inertia_history.size(); ++i) {
      require(res.inertia_history[i] <= res.inertia_history[i - 1] + 1e-9,
              "inertia increased on trial " + std::to_string(trial));
    }
  }

  int recovered = 0;
  for (int seed = 0; seed < 20; ++seed) {
    // Four well-separated directions, 50 points each.
    Rng drng(5000 + static_cast<std::uint64_t>(seed));
    std::vector<std::vector<double>> dirs;
    bool ok = false;
    while (!ok) {
      dirs.clear();
      for (int g = 0; g < 4; ++g) {
        std::vector<double> d(8);
        for (double& x : d) x = drng.normal();
        normalize(d);
        dirs.push_back(std::move(d));
      }
      ok = true;
      for (int g = 0; g < 4 && ok; ++g) {
        for (int h = 0; h < g; ++h) {
          if (dot(dirs[static_cast<std::size_t>(g)], dirs[static_cast<std::size_t>(h)]) > 0.5) {
            ok = false;
            break;
          }
        }
      }
    }
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int g = 0; g < 4; ++g) {
      for (int i = 0; i < 50; ++i) {
        std::vector<double> p = dirs[static_cast<std::size_t>(g)];
        for (double& x : p) x += 0.15 * drng.normal();
        normalize(p);
        pts.push_back(std::move(p));
        labels.push_back(g);
      }
    }
    const auto res = kmeans(pts, 4, 60, 42 + static_cast<std::uint64_t>(seed));
    // Perfect recovery up to permutation: every cluster maps to one label.
    std::map<ClusterId, std::set<int>> contents;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      contents[res.assignments[i]].insert(labels[i]);
    }
    bool pure = contents.size() == 4;
    for (const auto& [cid, ls] : contents) {
      (void)cid;
      if (ls.size() != 1) pure = false;
    }
    if (pure) ++recovered;
  }
  require(recovered >= 18, "planted clusters recovered on only " + std::to_string(recovered) +
                               "/20 seeds");
}

// --- criterion 10: top-k randomization frequencies ---
void criterion_topk_randomization() {
  std::vector<ScoredCandidate> cands;
  for (ItemId j = 0; j < 12; ++j) {
    cands.push_back({j, 5.0 - 0.3 * static_cast<double>(j), 0.0, 0.0});
  }
  Rng rng(20240501);
  std::map<ItemId, int> freq;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) freq[select_topk_random(cands, 5, rng)] += 1;
  require(freq.size() == 5, "draws left the top-5 pool");
  for (ItemId j = 0; j < 5; ++j) {
    const double f = static_cast<double>(freq[j]) / draws;
    require(f >= 0.19 && f <= 0.21,
            "frequency " + std::to_string(f) + " outside [0.19, 0.21] for item " +
                std::to_string(j));
  }
}

// --- criterion 11: end-to-end determinism ---
void criterion_determinism() {
  auto run_once = [&]() {
    WorldSpec spec;
    spec.n_users = 200;
    spec.n_items_initial = 80;
    spec.latent_dim = 8;
    spec.n_components = 6;
    spec.horizon = 500;
    spec.item_arrival_rate = 0.1;
    spec.item_max_age = 300.0;
    spec.seed = 2718;
    World world(spec);

    const auto logres = generate_logs(world, LogPolicy::Uniform, 4000, Rng::derive(spec.seed, 1));
    TwoTowerConfig tt;
    tt.dim = 8;
    tt.temperature = 0.08;
    tt.learning_rate = 0.1;
    tt.seed = Rng::derive(spec.seed, 0x7);
    TwoTowerModel model(world.n_users(), world.spec().n_items_initial, tt);
    model.fit(logres.log, 3, 64);

    std::vector<std::vector<double>> user_rows;
    for (UserId u = 0; u < world.n_users(); ++u) user_rows.push_back(model.encode_user(u));
    auto km = kmeans(user_rows, 12, 40, Rng::derive(spec.seed, 0x2));

    std::vector<ItemSpec> specs;
    for (ItemId j = 0; j < spec.n_items_initial; ++j) {
      specs.push_back({j, model.encode_item(j), 0.0, true});
    }
    auto graph = build_graph(km.centroids, specs, 15);

    ExperimentConfig cfg;
    cfg.explore_fraction = 0.8;
    cfg.context_k = 5;
    cfg.metrics_every = 25;
    cfg.delay = DelaySpec::uniform_range(0.0, 10.0);
    cfg.seed = Rng::derive(spec.seed, 0xe);
    const auto res = run_type1(world, model, km.centroids, graph, cfg);
    std::ostringstream out;
    write_metrics(out, res);
    return out.str();
  };
  const std::string a = run_once();
  const std::string b = run_once();
  require(!a.empty(), "empty metrics");
  require(a == b, "two identical runs produced different metrics bytes");
}

struct Criterion {
  int number;
  std::string name;
  std::function<void()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "one-hot equivalence of LinUCB and Diag-LinUCB", criterion_one_hot_equivalence},
      {2, "graph builder equals brute-force top-W", criterion_graph_oracle},
      {3, "sharding and event-order commutativity", criterion_sharding_commutativity},
      {4, "delay injection degrades explore reward", criterion_delay_direction},
      {5, "weighted contexts beat equal weights", criterion_weighted_context},
      {6, "infinite-UCB spike and decay", criterion_infinite_spike},
      {7, "corpus growth under exploration", criterion_corpus_growth},
      {8, "two-tower gradient and retrieval quality", criterion_two_tower},
      {9, "k-means inertia and planted recovery", criterion_kmeans},
      {10, "top-k randomization frequencies", criterion_topk_randomization},
      {11, "end-to-end determinism", criterion_determinism},
  };

  int only = -1;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (const auto& c : criteria) {
    if (only > 0 && c.number != only) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.fn();
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("PASS  criterion %2d  %-48s  (%.1fs)\n", c.number, c.name.c_str(), secs);
    } catch (const Failure& f) {
      std::printf("FAIL  criterion %2d  %-48s  %s\n", c.number, c.name.c_str(), f.what.c_str());
      ++failures;
    } catch (const std::exception& e) {
      std::printf("FAIL  criterion %2d  %-48s  unexpected error: %s\n", c.number, c.name.c_str(),
                  e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
