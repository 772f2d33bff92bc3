#include "edgebandit/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace edgebandit {

namespace {

bool item_key_less(const std::pair<ItemId, EdgeParams>& a, ItemId b) { return a.first < b; }

}  // namespace

const EdgeParams* EdgeBag::find(ClusterId c, ItemId item) const {
  auto it = by_cluster.find(c);
  if (it == by_cluster.end()) return nullptr;
  auto pos = std::lower_bound(it->second.begin(), it->second.end(), item, item_key_less);
  if (pos == it->second.end() || pos->first != item) return nullptr;
  return &pos->second;
}

EdgeParams* EdgeBag::find(ClusterId c, ItemId item) {
  return const_cast<EdgeParams*>(static_cast<const EdgeBag*>(this)->find(c, item));
}

void EdgeBag::insert(ClusterId c, ItemId item, EdgeParams p) {
  auto& list = by_cluster[c];
  auto pos = std::lower_bound(list.begin(), list.end(), item, item_key_less);
  if (pos != list.end() && pos->first == item) {
    pos->second = p;
    return;
  }
  list.insert(pos, {item, p});
}

std::size_t EdgeBag::edge_count() const {
  std::size_t n = 0;
  for (const auto& [c, list] : by_cluster) n += list.size();
  return n;
}

namespace {

struct Accum {
  double mean = 0.0;
  double var = 0.0;
  bool cold = false;
};

template <typename Fn>
std::vector<ScoredCandidate> score_impl(const SparseContext& ctx, const EdgeBag& edges,
                                        Fn make_candidate) {
  std::unordered_map<ItemId, Accum> acc;
  for (const auto& entry : ctx.entries) {
    auto it = edges.by_cluster.find(entry.cluster);
    if (it == edges.by_cluster.end()) continue;
    const double w = entry.weight;
    for (const auto& [item, ep] : it->second) {
      auto& a = acc[item];
      a.mean += w * ep.b / ep.d;
      a.var += w * w / ep.d;
      a.cold = a.cold || ep.n == 0;
    }
  }
  std::vector<ScoredCandidate> out;
  out.reserve(acc.size());
  for (const auto& [item, a] : acc) out.push_back(make_candidate(item, a));
  std::sort(out.begin(), out.end(), [](const ScoredCandidate& x, const ScoredCandidate& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.item < y.item;
  });
  return out;
}

}  // namespace

std::vector<ScoredCandidate> score_ucb(const SparseContext& ctx, const EdgeBag& edges,
                                       double alpha, ColdStart cold_start) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  return score_impl(ctx, edges, [&](ItemId item, const Accum& a) {
    ScoredCandidate c;
    c.item = item;
    c.mean_reward = a.mean;
    if (a.cold && cold_start == ColdStart::Infinite) {
      c.bonus = kInfiniteScore;
      c.score = kInfiniteScore;
    } else {
      c.bonus = alpha * std::sqrt(a.var);
      c.score = c.mean_reward + c.bonus;
    }
    return c;
  });
}

std::vector<ScoredCandidate> score_exploit(const SparseContext& ctx, const EdgeBag& edges) {
  return score_impl(ctx, edges, [](ItemId item, const Accum& a) {
    ScoredCandidate c;
    c.item = item;
    c.mean_reward = a.mean;
    c.bonus = 0.0;
    c.score = a.mean;
    return c;
  });
}

ItemId select_topk_random(const std::vector<ScoredCandidate>& candidates, int k, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate list");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<ScoredCandidate> sorted = candidates;
  std::sort(sorted.begin(), sorted.end(), [](const ScoredCandidate& x, const ScoredCandidate& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.item < y.item;
  });
  const std::size_t pool = std::min<std::size_t>(static_cast<std::size_t>(k), sorted.size());
  return sorted[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(pool)))].item;
}

void update_item_edges(EdgeBag& edges, ItemId item, const SparseContext& ctx, double reward,
                       double r_max) {
  if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
  const double r = std::clamp(reward, 0.0, r_max);
  for (const auto& entry : ctx.entries) {
    if (EdgeParams* ep = edges.find(entry.cluster, item)) ep->apply(entry.weight, r);
  }
}

SparseContext equal_weight(const SparseContext& ctx) {
  SparseContext out = ctx;
  for (auto& e : out.entries) e.weight = 1.0;
  return out;
}

}  // namespace edgebandit
