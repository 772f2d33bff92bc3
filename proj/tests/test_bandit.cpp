#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "edgebandit/bandit.hpp"
#include "edgebandit/linucb.hpp"

using namespace edgebandit;

namespace {

SparseContext ctx_of(std::vector<std::pair<ClusterId, double>> entries) {
  SparseContext ctx;
  for (const auto& [c, w] : entries) ctx.entries.push_back({c, w});
  std::sort(ctx.entries.begin(), ctx.entries.end(),
            [](const ContextEntry& a, const ContextEntry& b) { return a.cluster < b.cluster; });
  return ctx;
}

EdgeParams edge(double d, double b, std::uint64_t n) {
  EdgeParams e;
  e.d = d;
  e.b = b;
  e.n = n;
  return e;
}

}  // namespace

TEST_CASE("prior-only edge scores exactly alpha") {
  EdgeBag bag;
  bag.insert(0, 42, edge(1.0, 0.0, 1));
  const auto out = score_ucb(ctx_of({{0, 1.0}}), bag, 1.0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].item == 42);
  CHECK(out[0].mean_reward == doctest::Approx(0.0));
  CHECK(out[0].bonus == doctest::Approx(1.0));
  CHECK(out[0].score == doctest::Approx(1.0));
}

TEST_CASE("stored-example cell values score as expected") {
  // d = 54.4, b = 624.2 under a unit one-hot context.
  EdgeBag bag;
  bag.insert(1, 7, edge(54.4, 624.2, 12));
  const auto out = score_ucb(ctx_of({{1, 1.0}}), bag, 1.0);
  REQUIRE(out.size() == 1);
  const double mean = 624.2 / 54.4;
  const double bonus = std::sqrt(1.0 / 54.4);
  CHECK(out[0].mean_reward == doctest::Approx(mean).epsilon(1e-12));
  CHECK(out[0].bonus == doctest::Approx(bonus).epsilon(1e-12));
  CHECK(out[0].score == doctest::Approx(11.6099).epsilon(1e-4));
}

TEST_CASE("two-cluster weighted sums follow the closed form") {
  EdgeBag bag;
  bag.insert(0, 5, edge(2.0, 1.0, 3));
  bag.insert(1, 5, edge(4.0, 2.0, 2));
  const auto ctx = ctx_of({{0, 0.6}, {1, 0.4}});
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto out = score_ucb(ctx, bag, alpha);
    REQUIRE(out.size() == 1);
    CHECK(out[0].mean_reward == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out[0].bonus == doctest::Approx(alpha * std::sqrt(0.22)).epsilon(1e-12));
    CHECK(out[0].score == doctest::Approx(0.5 + alpha * std::sqrt(0.22)).epsilon(1e-12));
  }
  const auto exploit = score_exploit(ctx, bag);
  REQUIRE(exploit.size() == 1);
  CHECK(exploit[0].score == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exploit[0].bonus == 0.0);
}

TEST_CASE("cold edges are infinite in UCB mode and zero in exploit mode") {
  EdgeBag bag;
  bag.insert(0, 1, edge(1.0, 0.0, 0));
  bag.insert(0, 2, edge(3.0, 1.5, 4));
  bag.insert(1, 2, edge(1.0, 0.0, 0));  // item 2 has one cold edge too
  const auto ctx = ctx_of({{0, 0.7}, {1, 0.3}});

  const auto ucb = score_ucb(ctx, bag, 1.0, ColdStart::Infinite);
  REQUIRE(ucb.size() == 2);
  CHECK(std::isinf(ucb[0].score));
  CHECK(std::isinf(ucb[1].score));
  CHECK(ucb[0].item == 1);  // ties between infinities break by item id

  const auto prior = score_ucb(ctx, bag, 1.0, ColdStart::Prior);
  for (const auto& c : prior) CHECK(std::isfinite(c.score));

  const auto exploit = score_exploit(ctx, bag);
  REQUIRE(exploit.size() == 2);
  CHECK(exploit[0].item == 2);
  CHECK(exploit[0].score == doctest::Approx(0.7 * 0.5).epsilon(1e-12));
  CHECK(exploit[1].item == 1);
  CHECK(exploit[1].score == doctest::Approx(0.0));
  CHECK(std::isfinite(exploit[0].score));
}

TEST_CASE("exploit equals ucb minus the bonus and is alpha-free") {
  EdgeBag bag;
  bag.insert(0, 1, edge(5.0, 2.0, 4));
  bag.insert(1, 1, edge(2.0, 0.4, 1));
  bag.insert(0, 2, edge(7.0, 6.3, 6));
  const auto ctx = ctx_of({{0, 0.5}, {1, 0.2}});
  const auto ucb = score_ucb(ctx, bag, 1.3, ColdStart::Infinite);
  const auto exp = score_exploit(ctx, bag);
  std::map<ItemId, double> exp_by_item;
  for (const auto& c : exp) exp_by_item[c.item] = c.score;
  for (const auto& c : ucb) {
    CHECK(c.bonus >= 0.0);
    CHECK(c.score - c.bonus == doctest::Approx(exp_by_item.at(c.item)).epsilon(1e-12));
  }
}

TEST_CASE("candidate set is the union over supported clusters") {
  EdgeBag bag;
  bag.insert(0, 1, edge(2.0, 1.0, 1));
  bag.insert(1, 2, edge(2.0, 1.0, 1));
  bag.insert(5, 3, edge(2.0, 1.0, 1));  // outside the support
  const auto out = score_ucb(ctx_of({{0, 0.6}, {1, 0.4}}), bag, 1.0);
  REQUIRE(out.size() == 2);
  CHECK(out[0].item != 3);
  CHECK(out[1].item != 3);

  const auto none = score_ucb(ctx_of({{9, 1.0}}), bag, 1.0);
  CHECK(none.empty());  // "no triggered items"
}

TEST_CASE("update touches only supported edges with the squared weight") {
  EdgeBag bag;
  bag.insert(0, 1);
  bag.insert(1, 1);
  bag.insert(2, 1);
  auto ctx = ctx_of({{0, 0.6}, {1, 0.4}});
  update_item_edges(bag, 1, ctx, 0.0);
  CHECK(bag.find(0, 1)->d == doctest::Approx(1.36).epsilon(1e-12));
  CHECK(bag.find(0, 1)->b == doctest::Approx(0.0));
  CHECK(bag.find(0, 1)->n == 1);
  CHECK(bag.find(1, 1)->d == doctest::Approx(1.16).epsilon(1e-12));
  CHECK(bag.find(2, 1)->d == doctest::Approx(1.0));
  CHECK(bag.find(2, 1)->n == 0);

  update_item_edges(bag, 1, ctx_of({{0, 1.0}}), 1.0);
  CHECK(bag.find(0, 1)->d == doctest::Approx(2.36).epsilon(1e-12));
  CHECK(bag.find(0, 1)->b == doctest::Approx(1.0));
}

TEST_CASE("updates commute to machine precision") {
  Rng rng(3);
  std::vector<std::pair<SparseContext, double>> updates;
  for (int i = 0; i < 50; ++i) {
    updates.emplace_back(ctx_of({{0, rng.u01()}, {1, rng.u01()}, {2, rng.u01()}}), rng.u01());
  }
  auto run = [&](const std::vector<std::size_t>& order) {
    EdgeBag bag;
    bag.insert(0, 9);
    bag.insert(1, 9);
    bag.insert(2, 9);
    for (std::size_t idx : order) {
      update_item_edges(bag, 9, updates[idx].first, updates[idx].second);
    }
    return bag;
  };
  std::vector<std::size_t> order(updates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto base = run(order);
  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(order);
    const auto other = run(order);
    for (ClusterId c = 0; c < 3; ++c) {
      const auto* a = base.find(c, 9);
      const auto* b = other.find(c, 9);
      CHECK(std::abs(a->d - b->d) <= 1e-12 * std::abs(a->d));
      CHECK(std::abs(a->b - b->b) <= 1e-12 * std::max(1.0, std::abs(a->b)));
      CHECK(a->n == b->n);
    }
  }
}

TEST_CASE("each update strictly shrinks the bonus") {
  EdgeBag bag;
  bag.insert(0, 1, edge(1.0, 0.0, 1));
  const auto ctx = ctx_of({{0, 0.8}});
  double prev = score_ucb(ctx, bag, 1.0).front().bonus;
  for (int i = 0; i < 10; ++i) {
    update_item_edges(bag, 1, ctx, 0.5);
    const double bonus = score_ucb(ctx, bag, 1.0).front().bonus;
    CHECK(bonus < prev);
    prev = bonus;
  }
}

TEST_CASE("rewards are clamped to [0, r_max]") {
  EdgeBag bag;
  bag.insert(0, 1);
  update_item_edges(bag, 1, ctx_of({{0, 1.0}}), 100.0, 1.0);
  CHECK(bag.find(0, 1)->b == doctest::Approx(1.0));
  update_item_edges(bag, 1, ctx_of({{0, 1.0}}), -5.0, 1.0);
  CHECK(bag.find(0, 1)->b == doctest::Approx(1.0));
  CHECK_THROWS_AS(
      update_item_edges(bag, 1, ctx_of({{0, 1.0}}), std::numeric_limits<double>::quiet_NaN()),
      std::invalid_argument);
}

TEST_CASE("top-1 selection is the deterministic argmax") {
  std::vector<ScoredCandidate> cands = {{3, 0.5, 0.5, 0.0}, {1, 0.9, 0.9, 0.0}, {2, 0.9, 0.9, 0.0}};
  Rng rng(1);
  for (int i = 0; i < 20; ++i) CHECK(select_topk_random(cands, 1, rng) == 1);
}

TEST_CASE("top-5 randomization is uniform over the pool") {
  std::vector<ScoredCandidate> cands;
  for (ItemId j = 0; j < 9; ++j) {
    cands.push_back({j, 10.0 - static_cast<double>(j), 0.0, 0.0});
  }
  Rng rng(77);
  std::map<ItemId, int> freq;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) freq[select_topk_random(cands, 5, rng)] += 1;
  CHECK(freq.size() == 5);
  for (ItemId j = 0; j < 5; ++j) {
    const double f = static_cast<double>(freq[j]) / draws;
    CHECK(f > 0.19);
    CHECK(f < 0.21);
  }
}

TEST_CASE("infinite scores rank ahead of finite ones in the pool") {
  std::vector<ScoredCandidate> cands = {
      {10, 1.0, 1.0, 0.0},
      {11, kInfiniteScore, 0.0, kInfiniteScore},
      {12, 0.5, 0.5, 0.0},
  };
  Rng rng(5);
  std::map<ItemId, int> freq;
  for (int i = 0; i < 20000; ++i) freq[select_topk_random(cands, 2, rng)] += 1;
  CHECK(freq.count(12) == 0);
  CHECK(freq[11] > 9000);
  CHECK(freq[10] > 9000);
  CHECK_THROWS_AS(select_topk_random({}, 3, rng), std::invalid_argument);
}

TEST_CASE("positive scaling keeps the selection pool") {
  std::vector<ScoredCandidate> cands;
  for (ItemId j = 0; j < 8; ++j) {
    cands.push_back({j, 3.0 - 0.25 * static_cast<double>(j), 0.0, 0.0});
  }
  auto pool_of = [&](const std::vector<ScoredCandidate>& cs) {
    std::set<ItemId> pool;
    Rng rng(9);
    for (int i = 0; i < 5000; ++i) pool.insert(select_topk_random(cs, 3, rng));
    return pool;
  };
  auto scaled = cands;
  for (auto& c : scaled) c.score *= 17.0;
  CHECK(pool_of(cands) == pool_of(scaled));
}

TEST_CASE("equal-weight transform keeps support and forces unit weights") {
  const auto ctx = ctx_of({{2, 0.3}, {5, 0.6}});
  const auto eq = equal_weight(ctx);
  REQUIRE(eq.entries.size() == 2);
  CHECK(eq.entries[0].cluster == 2);
  CHECK(eq.entries[0].weight == 1.0);
  CHECK(eq.entries[1].cluster == 5);
  CHECK(eq.entries[1].weight == 1.0);

  // K = 1: equal-weight and weighted scoring coincide on a one-hot context.
  EdgeBag bag;
  bag.insert(2, 4, edge(3.0, 1.2, 2));
  const auto one_hot = ctx_of({{2, 1.0}});
  const auto a = score_ucb(one_hot, bag, 1.0);
  const auto b = score_ucb(equal_weight(one_hot), bag, 1.0);
  CHECK(a[0].score == doctest::Approx(b[0].score).epsilon(1e-15));

  // Heterogeneous weights diverge from equal weights.
  EdgeBag bag2;
  bag2.insert(0, 1, edge(2.0, 1.8, 3));
  bag2.insert(1, 1, edge(6.0, 0.6, 5));
  const auto hetero = ctx_of({{0, 0.7}, {1, 0.1}});
  const auto weighted = score_ucb(hetero, bag2, 1.0);
  const auto equal = score_ucb(equal_weight(hetero), bag2, 1.0);
  CHECK(weighted[0].score != doctest::Approx(equal[0].score));
}

TEST_CASE("equal-weight update adds exactly one per supported edge") {
  EdgeBag bag;
  bag.insert(0, 3);
  bag.insert(1, 3);
  const auto eq = equal_weight(ctx_of({{0, 0.25}, {1, 0.6}}));
  update_item_edges(bag, 3, eq, 1.0);
  for (ClusterId c : {0, 1}) {
    CHECK(bag.find(c, 3)->d == doctest::Approx(2.0));
    CHECK(bag.find(c, 3)->b == doctest::Approx(1.0));
  }
}

TEST_CASE("scalar linucb matches the hand computation") {
  LinUcb lin(2, 1, 1.0);
  // Never updated: theta = 0, ucb = alpha * sqrt(x' x).
  CHECK(lin.ucb(0, {1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lin.ucb(0, {2.0}) == doctest::Approx(2.0).epsilon(1e-12));

  const double r = 0.7;
  lin.update(0, {1.0}, r);
  CHECK(lin.covariance(0)[0] == doctest::Approx(2.0));
  CHECK(lin.bias(0)[0] == doctest::Approx(r));
  CHECK(lin.mean(0, {1.0}) == doctest::Approx(r / 2.0).epsilon(1e-12));
  CHECK(lin.ucb(0, {1.0}) == doctest::Approx(r / 2.0 + 1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("one-hot contexts keep linucb and the diagonal variant in lockstep") {
  const int n_clusters = 6;
  const int n_items = 12;
  LinUcb lin(n_items, n_clusters, 1.0);
  EdgeBag bag;
  for (ClusterId c = 0; c < n_clusters; ++c) {
    for (ItemId j = 0; j < n_items; ++j) bag.insert(c, j);
  }
  Rng rng(13);
  Rng reward_rng(14);
  for (int t = 0; t < 800; ++t) {
    const auto c = static_cast<ClusterId>(rng.uniform_int(n_clusters));
    std::vector<double> x(n_clusters, 0.0);
    x[static_cast<std::size_t>(c)] = 1.0;
    const auto ctx = ctx_of({{c, 1.0}});

    const int lin_choice = lin.select(x);
    const auto diag = score_ucb(ctx, bag, 1.0, ColdStart::Prior);
    REQUIRE_FALSE(diag.empty());
    const ItemId diag_choice = diag.front().item;
    REQUIRE(lin_choice == static_cast<int>(diag_choice));

    const double reward = reward_rng.u01() < 0.4 ? 1.0 : 0.0;
    lin.update(lin_choice, x, reward);
    update_item_edges(bag, diag_choice, ctx, reward);
  }
  for (ItemId j = 0; j < n_items; ++j) {
    const auto& cov = lin.covariance(static_cast<int>(j));
    for (int c = 0; c < n_clusters; ++c) {
      const auto* ep = bag.find(static_cast<ClusterId>(c), j);
      const double diag_entry =
          cov[static_cast<std::size_t>(c) * static_cast<std::size_t>(n_clusters) +
              static_cast<std::size_t>(c)];
      CHECK(std::abs(ep->d - diag_entry) < 1e-12);
      CHECK(std::abs(ep->b - lin.bias(static_cast<int>(j))[static_cast<std::size_t>(c)]) < 1e-12);
    }
  }
}

TEST_CASE("diag reduction with one cluster matches the scalar ucb oracle") {
  EdgeBag bag;
  bag.insert(0, 1, edge(1.0, 0.0, 1));
  const auto ctx = ctx_of({{0, 1.0}});
  double d = 1.0, b = 0.0;
  Rng rng(6);
  for (int i = 0; i < 30; ++i) {
    const double r = rng.u01();
    update_item_edges(bag, 1, ctx, r);
    d += 1.0;
    b += r;
    const auto out = score_ucb(ctx, bag, 1.0);
    CHECK(out[0].score == doctest::Approx(b / d + std::sqrt(1.0 / d)).epsilon(1e-12));
  }
}
