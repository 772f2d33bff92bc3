#include "edgebandit/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "edgebandit/rng.hpp"
#include "edgebandit/two_tower.hpp"

namespace edgebandit {

IdTable Centroids::to_table() const {
  IdTable t;
  for (std::size_t c = 0; c < vectors.size(); ++c) {
    t.ids.push_back(static_cast<std::int64_t>(c));
    t.rows.push_back(vectors[c]);
  }
  return t;
}

Centroids Centroids::from_table(const IdTable& t) {
  Centroids c;
  c.vectors.assign(t.size(), {});
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto id = t.ids[i];
    if (id < 0 || id >= static_cast<std::int64_t>(t.size())) {
      throw std::invalid_argument("centroid ids must be dense 0..C-1");
    }
    c.vectors[static_cast<std::size_t>(id)] = t.rows[i];
  }
  return c;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> kmeanspp_seed(const std::vector<std::vector<double>>& points,
                                       int n_clusters, Rng& rng) {
  const std::size_t m = points.size();
  std::vector<std::size_t> chosen;
  std::vector<bool> is_chosen(m, false);
  std::vector<double> d2(m, std::numeric_limits<double>::infinity());

  auto pick = [&](std::size_t idx) {
    chosen.push_back(idx);
    is_chosen[idx] = true;
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], points[idx]));
    }
  };

  pick(static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(m))));
  while (chosen.size() < static_cast<std::size_t>(n_clusters)) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += d2[i];
    if (total <= 0.0) {
      // All remaining points coincide with a centroid; take the lowest
      // unchosen index so the result stays deterministic.
      for (std::size_t i = 0; i < m; ++i) {
        if (!is_chosen[i]) {
          pick(i);
          break;
        }
      }
      continue;
    }
    double target = rng.u01() * total;
    std::size_t idx = m - 1;
    for (std::size_t i = 0; i < m; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        idx = i;
        break;
      }
    }
    if (is_chosen[idx]) {
      // Can happen only through floating-point underflow of d2; fall back to
      // the lowest unchosen index.
      for (std::size_t i = 0; i < m; ++i) {
        if (!is_chosen[i]) {
          idx = i;
          break;
        }
      }
    }
    pick(idx);
  }
  return chosen;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int n_clusters,
                    int max_iters, std::uint64_t seed) {
  if (n_clusters < 1) throw std::invalid_argument("n_clusters must be >= 1");
  if (points.size() < static_cast<std::size_t>(n_clusters)) {
    throw std::invalid_argument("need at least as many points as clusters");
  }
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  const std::size_t m = points.size();
  const std::size_t d = points.front().size();
  for (const auto& p : points) {
    if (p.size() != d) throw std::invalid_argument("points must share one dimension");
    if (std::abs(l2_norm(p) - 1.0) > 1e-6) {
      throw std::invalid_argument("kmeans expects unit-norm inputs");
    }
  }

  Rng rng(Rng::derive(seed, 0xc1u));
  KMeansResult res;
  res.centroids.vectors.reserve(static_cast<std::size_t>(n_clusters));
  for (std::size_t idx : kmeanspp_seed(points, n_clusters, rng)) {
    res.centroids.vectors.push_back(points[idx]);
  }
  res.assignments.assign(m, 0);

  auto assign_pass = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      ClusterId best = 0;
      double best_dot = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_clusters; ++c) {
        const double s = dot(points[i], res.centroids.vectors[static_cast<std::size_t>(c)]);
        if (s > best_dot) {
          best_dot = s;
          best = static_cast<ClusterId>(c);
        }
      }
      if (res.assignments[i] != best) {
        res.assignments[i] = best;
        changed = true;
      }
      inertia += sq_dist(points[i], res.centroids.vectors[static_cast<std::size_t>(best)]);
    }
    res.inertia_history.push_back(inertia);
    return changed;
  };

  assign_pass();
  for (int iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;
    // Mean update, then renormalize onto the unit sphere.
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(n_clusters),
                                          std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_clusters), 0);
    for (std::size_t i = 0; i < m; ++i) {
      auto& s = sums[static_cast<std::size_t>(res.assignments[i])];
      for (std::size_t k = 0; k < d; ++k) s[k] += points[i][k];
      ++counts[static_cast<std::size_t>(res.assignments[i])];
    }
    for (int c = 0; c < n_clusters; ++c) {
      auto& sum = sums[static_cast<std::size_t>(c)];
      if (counts[static_cast<std::size_t>(c)] == 0) {
        // Reseed from the point farthest from its assigned centroid.
        std::size_t far_idx = 0;
        double far_d2 = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double d2 =
              sq_dist(points[i], res.centroids.vectors[static_cast<std::size_t>(res.assignments[i])]);
          if (d2 > far_d2) {
            far_d2 = d2;
            far_idx = i;
          }
        }
        if (far_d2 > 0.0) {
          res.centroids.vectors[static_cast<std::size_t>(c)] = points[far_idx];
          // Claim the point so a second empty cluster reseeds elsewhere.
          res.assignments[far_idx] = static_cast<ClusterId>(c);
        }
        continue;
      }
      if (l2_norm(sum) > 1e-12) {
        normalize(sum);
        res.centroids.vectors[static_cast<std::size_t>(c)] = sum;
      }
      // A vanishing mean (perfectly antipodal points) keeps the old centroid.
    }
    if (!assign_pass()) break;
  }
  return res;
}

double SparseContext::weight_sum() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.weight;
  return s;
}

bool SparseContext::has_cluster(ClusterId c) const {
  for (const auto& e : entries) {
    if (e.cluster == c) return true;
  }
  return false;
}

SparseContext softmax_topk(const std::vector<double>& logits, int k, double tau,
                           bool renormalize) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const auto weights = softmax(logits, tau);
  std::vector<ClusterId> order(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) order[i] = static_cast<ClusterId>(i);
  std::sort(order.begin(), order.end(), [&](ClusterId a, ClusterId b) {
    const double wa = weights[static_cast<std::size_t>(a)];
    const double wb = weights[static_cast<std::size_t>(b)];
    if (wa != wb) return wa > wb;
    return a < b;
  });
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), weights.size());
  SparseContext ctx;
  ctx.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    ctx.entries.push_back({order[i], weights[static_cast<std::size_t>(order[i])]});
  }
  std::sort(ctx.entries.begin(), ctx.entries.end(),
            [](const ContextEntry& a, const ContextEntry& b) { return a.cluster < b.cluster; });
  if (renormalize) {
    const double sum = ctx.weight_sum();
    for (auto& e : ctx.entries) e.weight /= sum;
  }
  return ctx;
}

SparseContext context_vector(const std::vector<double>& user_embedding,
                             const Centroids& centroids, int k, double tau, bool renormalize) {
  if (centroids.count() == 0) throw std::invalid_argument("no centroids");
  std::vector<double> logits(static_cast<std::size_t>(centroids.count()));
  for (int c = 0; c < centroids.count(); ++c) {
    logits[static_cast<std::size_t>(c)] =
        dot(user_embedding, centroids.vectors[static_cast<std::size_t>(c)]);
  }
  return softmax_topk(logits, k, tau, renormalize);
}

}  // namespace edgebandit
