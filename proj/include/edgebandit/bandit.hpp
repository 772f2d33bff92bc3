#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "edgebandit/clustering.hpp"
#include "edgebandit/graph.hpp"
#include "edgebandit/rng.hpp"

namespace edgebandit {

// Per-(cluster, item) bandit state. d carries a 1.0 prior so the confidence
// bonus is finite from the first update; n distinguishes a never-updated edge
// from one that happens to sit at the prior.
struct EdgeParams {
  double d = 1.0;  // prior + accumulated sum of squared context weights
  double b = 0.0;  // accumulated weight-times-reward
  std::uint64_t n = 0;

  void apply(double w, double r) {
    d += w * w;
    b += w * r;
    n += 1;
  }
};

// How a never-updated edge scores in UCB mode. Infinite reproduces the
// deployed behavior (new edges are prioritized unconditionally); Prior keeps
// the finite bound implied by d's 1.0 prior.
enum class ColdStart { Prior, Infinite };

struct ScoredCandidate {
  ItemId item = 0;
  double score = 0.0;  // mean_reward + bonus; +inf for cold edges in UCB mode
  double mean_reward = 0.0;
  double bonus = 0.0;
};

// Cluster-major view of edge parameters used by the scoring path. Cluster
// lists are kept sorted by item id so scoring output is deterministic.
struct EdgeBag {
  std::map<ClusterId, std::vector<std::pair<ItemId, EdgeParams>>> by_cluster;

  const EdgeParams* find(ClusterId c, ItemId item) const;
  EdgeParams* find(ClusterId c, ItemId item);
  void insert(ClusterId c, ItemId item, EdgeParams p = {});
  std::size_t edge_count() const;
};

// UCB over the triggered items (every item with an edge to a supported
// cluster). Sums run over supported clusters that actually hold an edge to
// the item; missing edges contribute nothing. Output is sorted by
// (score desc, item id asc). Empty output signals "no triggered items".
std::vector<ScoredCandidate> score_ucb(const SparseContext& ctx, const EdgeBag& edges,
                                       double alpha, ColdStart cold_start = ColdStart::Infinite);

// Same traversal with the confidence term dropped; cold edges contribute a
// zero estimate instead of infinity, so exploitation never explores.
std::vector<ScoredCandidate> score_exploit(const SparseContext& ctx, const EdgeBag& edges);

// Uniform draw among the top-min(k, n) candidates by (score desc, id asc).
ItemId select_topk_random(const std::vector<ScoredCandidate>& candidates, int k, Rng& rng);

// Applies one observed reward to every supported edge of the item
// (d += w^2, b += w*r). The reward is clamped to [0, r_max] first.
void update_item_edges(EdgeBag& edges, ItemId item, const SparseContext& ctx, double reward,
                       double r_max = 1.0);

// The equal-weight baseline: same support, all weights forced to 1.
SparseContext equal_weight(const SparseContext& ctx);

inline constexpr double kInfiniteScore = std::numeric_limits<double>::infinity();

}  // namespace edgebandit
