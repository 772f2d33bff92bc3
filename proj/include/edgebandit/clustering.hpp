#pragma once

#include <cstdint>
#include <vector>

#include "edgebandit/io.hpp"

namespace edgebandit {

using ClusterId = std::int32_t;

struct Centroids {
  std::vector<std::vector<double>> vectors;  // unit L2 norm each

  int count() const { return static_cast<int>(vectors.size()); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }

  IdTable to_table() const;
  static Centroids from_table(const IdTable& t);
};

struct KMeansResult {
  Centroids centroids;
  std::vector<ClusterId> assignments;
  std::vector<double> inertia_history;  // recorded after every assignment pass
  int iterations = 0;
};

// Spherical k-means: k-means++ seeding, Lloyd's iterations, centroids
// renormalized to the unit sphere after every mean update so their dot
// products stay comparable with item embeddings. Deterministic per seed.
// An empty cluster is reseeded from the point farthest from its assigned
// centroid (ties to the lower point index).
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int n_clusters,
                    int max_iters, std::uint64_t seed);

// One (cluster, weight) entry of a sparse user context.
struct ContextEntry {
  ClusterId cluster = 0;
  double weight = 0.0;
};

// Top-K slice of the softmax distribution over cluster affinities. Weights
// are the untruncated softmax values by default, so they sum to < 1 unless
// renormalize was requested or K == C. Entries are sorted by cluster id.
struct SparseContext {
  std::vector<ContextEntry> entries;

  double weight_sum() const;
  bool has_cluster(ClusterId c) const;
};

// Softmax over all C centroid dot products at temperature tau, truncated to
// the K largest weights (ties at the boundary keep the lower cluster id).
SparseContext context_vector(const std::vector<double>& user_embedding,
                             const Centroids& centroids, int k, double tau,
                             bool renormalize = false);

// Keeps the K largest softmax weights of the given logits; shared helper so
// the softmax-level properties are testable without embeddings.
SparseContext softmax_topk(const std::vector<double>& logits, int k, double tau,
                           bool renormalize = false);

}  // namespace edgebandit
