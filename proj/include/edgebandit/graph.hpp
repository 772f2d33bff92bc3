#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "edgebandit/clustering.hpp"

namespace edgebandit {

using ItemId = std::int64_t;

struct EdgeEntry {
  ItemId item = 0;
  double score = 0.0;
};

struct ItemInfo {
  double upload_time = 0.0;
  bool eligible = true;
};

// Input record for graph construction and streaming injection.
struct ItemSpec {
  ItemId id = 0;
  std::vector<double> embedding;
  double upload_time = 0.0;
  bool eligible = true;
};

struct DeltaEdge {
  ClusterId cluster = 0;
  ItemId item = 0;
  double score = 0.0;
};

// Versioned difference between two graph states; the unit of synchronization
// between the graph builder and the bandit parameter store.
struct GraphDelta {
  std::vector<DeltaEdge> added;
  std::vector<std::pair<ClusterId, ItemId>> removed;
  std::vector<std::pair<ItemId, double>> added_items;  // (id, upload_time)
  std::int64_t new_version = 0;

  bool empty() const { return added.empty() && removed.empty(); }
};

// Sparse cluster-to-item adjacency. Each cluster holds at most W items,
// ordered by (score desc, item id asc). A per-cluster reservoir of up to W
// next-best candidates backs expiry backfill without rescoring the corpus.
class SparseGraph {
 public:
  SparseGraph() = default;

  std::int64_t version() const { return version_; }
  int n_clusters() const { return n_clusters_; }
  int target_per_cluster() const { return target_w_; }
  std::optional<int> max_item_degree() const { return max_degree_; }

  const std::vector<EdgeEntry>& items_for(ClusterId c) const;
  bool has_edge(ClusterId c, ItemId item) const;
  std::size_t edge_count() const;
  int item_degree(ItemId item) const;
  // Items currently holding at least one edge, ascending id.
  std::vector<ItemId> active_items() const;
  const ItemInfo* find_item(ItemId item) const;

  // Attaches each new item to every cluster where it beats the current
  // minimum (or the cluster is under capacity), evicting the lowest-scoring
  // incumbent at capacity. Ineligible items are skipped.
  GraphDelta merge_incremental(const std::vector<ItemSpec>& new_items, const Centroids& centroids);

  // Removes every edge of items older than max_age and backfills clusters
  // from their reservoirs. max_age may be infinity.
  GraphDelta expire_items(double now, double max_age);

  // Replays a delta produced elsewhere. Returns false (and leaves the graph
  // untouched) when the delta's version is not ahead of the graph's.
  bool apply_delta(const GraphDelta& delta);

  // Checks all structural invariants; throws std::logic_error on violation.
  void validate() const;

  friend SparseGraph build_graph(const Centroids& centroids, const std::vector<ItemSpec>& items,
                                 int target_w, std::optional<int> max_item_degree);
  friend void serialize_graph(std::ostream& out, const SparseGraph& g);
  friend SparseGraph deserialize_graph(std::istream& in);

 private:
  void insert_sorted(std::vector<EdgeEntry>& list, EdgeEntry e);
  void add_to_reserve(ClusterId c, EdgeEntry e);
  void backfill(ClusterId c, GraphDelta& delta);

  std::int64_t version_ = 1;
  int n_clusters_ = 0;
  int target_w_ = 0;
  std::optional<int> max_degree_;
  std::vector<std::vector<EdgeEntry>> active_;
  std::vector<std::vector<EdgeEntry>> reserve_;
  std::unordered_map<ItemId, ItemInfo> meta_;
  std::unordered_map<ItemId, int> degree_;
};

// Algorithm: per cluster, keep the top-W items by centroid-item dot product
// (ties to the lower item id). W may exceed the corpus size, in which case
// every cluster simply holds the full corpus. When max_item_degree is set, a
// repair pass trims over-connected items to their best clusters and backfills
// the affected clusters.
SparseGraph build_graph(const Centroids& centroids, const std::vector<ItemSpec>& items,
                        int target_w, std::optional<int> max_item_degree = std::nullopt);

// Text format:
//   graph v1 <version> <C> <W>
//   edge <cluster_id> <item_id> <score>
//   item <item_id> <upload_time>
void serialize_graph(std::ostream& out, const SparseGraph& g);
std::string serialize_graph_string(const SparseGraph& g);
void write_graph_file(const std::filesystem::path& path, const SparseGraph& g);
SparseGraph deserialize_graph(std::istream& in);
SparseGraph deserialize_graph_string(const std::string& text);
SparseGraph read_graph_file(const std::filesystem::path& path);

}  // namespace edgebandit
