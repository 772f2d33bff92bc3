#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <queue>
#include <string>
#include <vector>

#include "edgebandit/bandit.hpp"
#include "edgebandit/graph.hpp"

namespace edgebandit {

struct FeedbackEvent {
  SparseContext context;
  ItemId item = 0;
  double reward = 0.0;
  double emit_time = 0.0;
};

struct DelaySpec {
  enum class Kind { Constant, Uniform };
  Kind kind = Kind::Constant;
  double value = 0.0;  // constant delay
  double lo = 0.0;
  double hi = 0.0;  // uniform bounds

  static DelaySpec constant(double d);
  static DelaySpec uniform_range(double lo, double hi);
  // "0", "12.5", or "uniform:<lo>:<hi>"
  static DelaySpec parse(const std::string& text);
  std::string to_string() const;
  double draw(Rng& rng) const;
};

struct StoreStats {
  std::uint64_t ingested = 0;
  std::uint64_t applied = 0;
  std::uint64_t dropped = 0;
  std::uint64_t queued = 0;
  std::int64_t infinite_edges = 0;  // gauge: edges never updated (n == 0)
  double latency_sum = 0.0;         // sum of (apply time - emit time) over applied

  double mean_latency() const { return applied == 0 ? 0.0 : latency_sum / static_cast<double>(applied); }
};

// Immutable copy of the edge parameters; the scoring path works exclusively
// against snapshots so concurrent updates never affect an in-flight query.
struct Snapshot {
  std::uint64_t version = 0;
  std::int64_t graph_version = 0;
  double created_at = 0.0;  // last advanced simulation time
  EdgeBag edges;
  std::int64_t infinite_edges = 0;
};

// Snapshot wire format: "params v1 <version> <graph_version>" then one
// "pe <cluster> <item> <d> <b> <n>" line per edge.
void write_params(std::ostream& out, const Snapshot& snap);
void write_params_file(const std::filesystem::path& path, const Snapshot& snap);
Snapshot read_params(std::istream& in);
Snapshot read_params_file(const std::filesystem::path& path);

// Edge-keyed aggregation store. Feedback events queue until their maturity
// time (emit time plus a drawn delay) and are then folded into the edge
// parameters in maturity order. Edges are partitioned across shards by
// cluster id; because the update rule is purely additive per edge, the final
// state is independent of the sharding layout.
//
// Thread safety: ingest(), advance(), snapshot(), sync_graph() and stats()
// may be called concurrently. The atomicity unit for parameter updates is a
// single edge read-modify-write; snapshot() and sync_graph() are linearizable
// with respect to each other.
class ParamStore {
 public:
  ParamStore(int n_shards, DelaySpec delay, std::uint64_t seed, double r_max = 1.0);

  // Queues the event; drops it immediately (with a counter increment) when
  // the item has no edge in the store.
  void ingest(FeedbackEvent ev);

  // Applies every queued event with maturity <= now, in (maturity, sequence)
  // order; returns how many were applied. Idempotent for a repeated now.
  std::size_t advance(double now);

  Snapshot snapshot();

  // Applies a graph delta: new edges enter cold (n = 0), removed edges are
  // deleted together with their learned state. Returns false and leaves the
  // store untouched when the delta version is not ahead of the store's.
  bool sync_graph(const GraphDelta& delta);

  StoreStats stats() const;
  std::int64_t current_graph_version() const;

 private:
  struct Pending {
    double maturity;
    std::uint64_t seq;
    FeedbackEvent ev;
    bool operator>(const Pending& other) const {
      if (maturity != other.maturity) return maturity > other.maturity;
      return seq > other.seq;
    }
  };

  struct Shard {
    mutable std::mutex mu;
    std::map<ClusterId, std::map<ItemId, EdgeParams>> edges;
  };

  std::size_t shard_of(ClusterId c) const;
  void apply_event(const Pending& p, double now);

  int n_shards_;
  DelaySpec delay_;
  double r_max_;
  std::vector<Shard> shards_;

  mutable std::mutex queue_mu_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue_;
  Rng delay_rng_;
  std::uint64_t next_seq_ = 0;

  mutable std::mutex registry_mu_;
  std::unordered_map<ItemId, int> item_degree_;

  // Held across snapshot() and sync_graph() so the pair is linearizable.
  mutable std::mutex store_mu_;
  std::int64_t graph_version_ = 0;
  std::atomic<std::uint64_t> snapshot_version_{0};
  std::atomic<std::int64_t> infinite_edges_{0};

  mutable std::mutex stats_mu_;
  std::uint64_t ingested_ = 0;
  std::uint64_t applied_ = 0;
  std::uint64_t dropped_ = 0;
  double latency_sum_ = 0.0;
  double last_now_ = 0.0;
};

// Delta covering every edge of a freshly built graph; used to seed a store
// from the batch pipeline output.
GraphDelta full_graph_delta(const SparseGraph& g);

}  // namespace edgebandit
