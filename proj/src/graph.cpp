#include "edgebandit/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace edgebandit {

namespace {

bool edge_before(const EdgeEntry& a, const EdgeEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

}  // namespace

const std::vector<EdgeEntry>& SparseGraph::items_for(ClusterId c) const {
  return active_.at(static_cast<std::size_t>(c));
}

bool SparseGraph::has_edge(ClusterId c, ItemId item) const {
  const auto& list = active_.at(static_cast<std::size_t>(c));
  return std::any_of(list.begin(), list.end(),
                     [&](const EdgeEntry& e) { return e.item == item; });
}

std::size_t SparseGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& list : active_) n += list.size();
  return n;
}

int SparseGraph::item_degree(ItemId item) const {
  auto it = degree_.find(item);
  return it == degree_.end() ? 0 : it->second;
}

std::vector<ItemId> SparseGraph::active_items() const {
  std::vector<ItemId> out;
  for (const auto& [item, deg] : degree_) {
    if (deg > 0) out.push_back(item);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const ItemInfo* SparseGraph::find_item(ItemId item) const {
  auto it = meta_.find(item);
  return it == meta_.end() ? nullptr : &it->second;
}

void SparseGraph::insert_sorted(std::vector<EdgeEntry>& list, EdgeEntry e) {
  auto pos = std::lower_bound(list.begin(), list.end(), e, edge_before);
  list.insert(pos, e);
}

void SparseGraph::add_to_reserve(ClusterId c, EdgeEntry e) {
  auto& res = reserve_[static_cast<std::size_t>(c)];
  insert_sorted(res, e);
  if (res.size() > static_cast<std::size_t>(target_w_)) res.pop_back();
}

SparseGraph build_graph(const Centroids& centroids, const std::vector<ItemSpec>& items,
                        int target_w, std::optional<int> max_item_degree) {
  if (target_w < 1) throw std::invalid_argument("target_w must be >= 1");
  if (centroids.count() == 0) throw std::invalid_argument("no centroids");
  if (max_item_degree && *max_item_degree < 1) {
    throw std::invalid_argument("max_item_degree must be >= 1");
  }
  SparseGraph g;
  g.n_clusters_ = centroids.count();
  g.target_w_ = target_w;
  g.max_degree_ = max_item_degree;
  g.active_.resize(static_cast<std::size_t>(g.n_clusters_));
  g.reserve_.resize(static_cast<std::size_t>(g.n_clusters_));

  std::vector<const ItemSpec*> pool;
  pool.reserve(items.size());
  {
    std::set<ItemId> seen;
    for (const auto& it : items) {
      if (!seen.insert(it.id).second) {
        throw std::invalid_argument("duplicate item id " + std::to_string(it.id));
      }
      if (it.eligible) pool.push_back(&it);
    }
  }

  std::vector<EdgeEntry> scored(pool.size());
  for (int c = 0; c < g.n_clusters_; ++c) {
    const auto& cv = centroids.vectors[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < pool.size(); ++i) {
      scored[i] = {pool[i]->id, dot(cv, pool[i]->embedding)};
    }
    const std::size_t keep = std::min<std::size_t>(scored.size(), 2 * static_cast<std::size_t>(target_w));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), edge_before);
    auto& active = g.active_[static_cast<std::size_t>(c)];
    auto& reserve = g.reserve_[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < keep; ++i) {
      if (i < static_cast<std::size_t>(target_w)) {
        active.push_back(scored[i]);
      } else {
        reserve.push_back(scored[i]);
      }
    }
  }
  for (const ItemSpec* it : pool) g.meta_[it->id] = {it->upload_time, true};
  for (int c = 0; c < g.n_clusters_; ++c) {
    for (const auto& e : g.active_[static_cast<std::size_t>(c)]) g.degree_[e.item] += 1;
  }

  if (max_item_degree) {
    const int cap = *max_item_degree;
    // Trim phase: an over-connected item keeps only its best clusters
    // (score desc, cluster id asc breaks ties).
    std::vector<ItemId> over;
    for (const auto& [item, deg] : g.degree_) {
      if (deg > cap) over.push_back(item);
    }
    std::sort(over.begin(), over.end());
    std::vector<ClusterId> deficient;
    for (ItemId item : over) {
      struct Holding {
        ClusterId cluster;
        double score;
      };
      std::vector<Holding> holdings;
      for (int c = 0; c < g.n_clusters_; ++c) {
        const auto& list = g.active_[static_cast<std::size_t>(c)];
        for (const auto& e : list) {
          if (e.item == item) holdings.push_back({static_cast<ClusterId>(c), e.score});
        }
      }
      std::sort(holdings.begin(), holdings.end(), [](const Holding& a, const Holding& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.cluster < b.cluster;
      });
      for (std::size_t i = static_cast<std::size_t>(cap); i < holdings.size(); ++i) {
        auto& list = g.active_[static_cast<std::size_t>(holdings[i].cluster)];
        list.erase(std::find_if(list.begin(), list.end(),
                                [&](const EdgeEntry& e) { return e.item == item; }));
        g.degree_[item] -= 1;
        g.add_to_reserve(holdings[i].cluster, {item, holdings[i].score});
        deficient.push_back(holdings[i].cluster);
      }
    }
    // Fill phase: deficient clusters pull next-best items that still have
    // headroom under the cap.
    std::sort(deficient.begin(), deficient.end());
    deficient.erase(std::unique(deficient.begin(), deficient.end()), deficient.end());
    for (ClusterId c : deficient) {
      auto& active = g.active_[static_cast<std::size_t>(c)];
      auto& reserve = g.reserve_[static_cast<std::size_t>(c)];
      std::size_t i = 0;
      while (active.size() < static_cast<std::size_t>(g.target_w_) && i < reserve.size()) {
        const EdgeEntry e = reserve[i];
        if (g.item_degree(e.item) >= cap) {
          ++i;
          continue;
        }
        reserve.erase(reserve.begin() + static_cast<std::ptrdiff_t>(i));
        g.insert_sorted(active, e);
        g.degree_[e.item] += 1;
      }
    }
  }
  return g;
}

GraphDelta SparseGraph::merge_incremental(const std::vector<ItemSpec>& new_items,
                                          const Centroids& centroids) {
  if (centroids.count() != n_clusters_) {
    throw std::invalid_argument("centroid count does not match graph");
  }
  GraphDelta delta;
  for (const auto& spec : new_items) {
    if (meta_.count(spec.id)) {
      throw std::invalid_argument("duplicate item id " + std::to_string(spec.id));
    }
    if (!spec.eligible) continue;

    struct Candidate {
      ClusterId cluster;
      double score;
    };
    std::vector<Candidate> cands;
    cands.reserve(static_cast<std::size_t>(n_clusters_));
    for (int c = 0; c < n_clusters_; ++c) {
      cands.push_back({static_cast<ClusterId>(c),
                       dot(centroids.vectors[static_cast<std::size_t>(c)], spec.embedding)});
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.cluster < b.cluster;
    });

    bool placed_anywhere = false;
    int placed = 0;
    for (const auto& cand : cands) {
      if (max_degree_ && placed >= *max_degree_) break;
      auto& active = active_[static_cast<std::size_t>(cand.cluster)];
      const bool under_capacity = active.size() < static_cast<std::size_t>(target_w_);
      if (under_capacity || cand.score > active.back().score) {
        if (!under_capacity) {
          const EdgeEntry evicted = active.back();
          active.pop_back();
          degree_[evicted.item] -= 1;
          add_to_reserve(cand.cluster, evicted);
          delta.removed.emplace_back(cand.cluster, evicted.item);
        }
        insert_sorted(active, {spec.id, cand.score});
        degree_[spec.id] += 1;
        delta.added.push_back({cand.cluster, spec.id, cand.score});
        placed += 1;
        placed_anywhere = true;
      } else {
        // Not top-W material here; remember it as a backfill candidate.
        auto& reserve = reserve_[static_cast<std::size_t>(cand.cluster)];
        if (reserve.size() < static_cast<std::size_t>(target_w_) ||
            cand.score > reserve.back().score) {
          add_to_reserve(cand.cluster, {spec.id, cand.score});
          placed_anywhere = true;
        }
      }
    }
    if (placed_anywhere) meta_[spec.id] = {spec.upload_time, true};
    if (placed > 0) delta.added_items.emplace_back(spec.id, spec.upload_time);
  }
  // A later item in the same batch can evict an earlier one; such an edge is
  // a net no-op and must not appear in both delta lists.
  {
    std::set<std::pair<ClusterId, ItemId>> removed_set(delta.removed.begin(),
                                                       delta.removed.end());
    std::vector<DeltaEdge> net_added;
    for (const auto& e : delta.added) {
      auto key = std::make_pair(e.cluster, e.item);
      if (removed_set.count(key)) {
        removed_set.erase(key);
      } else {
        net_added.push_back(e);
      }
    }
    delta.added = std::move(net_added);
    delta.removed.assign(removed_set.begin(), removed_set.end());
  }
  version_ += 1;
  delta.new_version = version_;
  return delta;
}

GraphDelta SparseGraph::expire_items(double now, double max_age) {
  GraphDelta delta;
  if (!std::isinf(max_age)) {
    std::vector<ItemId> expired;
    for (const auto& [item, info] : meta_) {
      if (now - info.upload_time > max_age) expired.push_back(item);
    }
    std::sort(expired.begin(), expired.end());
    std::set<ClusterId> touched;
    for (ItemId item : expired) {
      for (int c = 0; c < n_clusters_; ++c) {
        auto& active = active_[static_cast<std::size_t>(c)];
        auto it = std::find_if(active.begin(), active.end(),
                               [&](const EdgeEntry& e) { return e.item == item; });
        if (it != active.end()) {
          active.erase(it);
          delta.removed.emplace_back(static_cast<ClusterId>(c), item);
          touched.insert(static_cast<ClusterId>(c));
        }
        auto& reserve = reserve_[static_cast<std::size_t>(c)];
        auto rit = std::find_if(reserve.begin(), reserve.end(),
                                [&](const EdgeEntry& e) { return e.item == item; });
        if (rit != reserve.end()) reserve.erase(rit);
      }
      meta_.erase(item);
      degree_.erase(item);
    }
    for (ClusterId c : touched) backfill(c, delta);
  }
  version_ += 1;
  delta.new_version = version_;
  return delta;
}

void SparseGraph::backfill(ClusterId c, GraphDelta& delta) {
  auto& active = active_[static_cast<std::size_t>(c)];
  auto& reserve = reserve_[static_cast<std::size_t>(c)];
  std::size_t i = 0;
  while (active.size() < static_cast<std::size_t>(target_w_) && i < reserve.size()) {
    const EdgeEntry e = reserve[i];
    if (max_degree_ && item_degree(e.item) >= *max_degree_) {
      ++i;
      continue;
    }
    reserve.erase(reserve.begin() + static_cast<std::ptrdiff_t>(i));
    insert_sorted(active, e);
    degree_[e.item] += 1;
    delta.added.push_back({c, e.item, e.score});
    auto info = meta_.find(e.item);
    delta.added_items.emplace_back(e.item, info == meta_.end() ? 0.0 : info->second.upload_time);
  }
}

bool SparseGraph::apply_delta(const GraphDelta& delta) {
  if (delta.new_version <= version_) return false;
  for (const auto& [item, upload_time] : delta.added_items) {
    meta_.try_emplace(item, ItemInfo{upload_time, true});
  }
  for (const auto& [cluster, item] : delta.removed) {
    auto& active = active_.at(static_cast<std::size_t>(cluster));
    auto it = std::find_if(active.begin(), active.end(),
                           [&](const EdgeEntry& e) { return e.item == item; });
    if (it == active.end()) continue;
    active.erase(it);
    if (--degree_[item] == 0) {
      degree_.erase(item);
      meta_.erase(item);
    }
  }
  for (const auto& e : delta.added) {
    auto& active = active_.at(static_cast<std::size_t>(e.cluster));
    if (std::any_of(active.begin(), active.end(),
                    [&](const EdgeEntry& x) { return x.item == e.item; })) {
      continue;
    }
    insert_sorted(active, {e.item, e.score});
    degree_[e.item] += 1;
    meta_.try_emplace(e.item, ItemInfo{0.0, true});
  }
  version_ = delta.new_version;
  return true;
}

void SparseGraph::validate() const {
  std::unordered_map<ItemId, int> degree_check;
  for (int c = 0; c < n_clusters_; ++c) {
    const auto& active = active_[static_cast<std::size_t>(c)];
    if (active.size() > static_cast<std::size_t>(target_w_)) {
      throw std::logic_error("cluster exceeds target W");
    }
    std::set<ItemId> seen;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (!seen.insert(active[i].item).second) {
        throw std::logic_error("duplicate item within a cluster");
      }
      if (!meta_.count(active[i].item)) {
        throw std::logic_error("edge references item without metadata");
      }
      if (i > 0 && edge_before(active[i], active[i - 1])) {
        throw std::logic_error("cluster list not ordered by score");
      }
      degree_check[active[i].item] += 1;
    }
  }
  for (const auto& [item, deg] : degree_check) {
    if (max_degree_ && deg > *max_degree_) throw std::logic_error("item exceeds max degree");
    auto it = degree_.find(item);
    if (it == degree_.end() || it->second != deg) {
      throw std::logic_error("degree bookkeeping out of sync");
    }
  }
}

void serialize_graph(std::ostream& out, const SparseGraph& g) {
  out << "graph v1 " << g.version_ << ' ' << g.n_clusters_ << ' ' << g.target_w_ << '\n';
  std::set<ItemId> referenced;
  for (int c = 0; c < g.n_clusters_; ++c) {
    for (const auto& e : g.active_[static_cast<std::size_t>(c)]) {
      out << "edge " << c << ' ' << e.item << ' ' << fmt_double(e.score) << '\n';
      referenced.insert(e.item);
    }
  }
  for (ItemId item : referenced) {
    const auto& info = g.meta_.at(item);
    out << "item " << item << ' ' << fmt_double(info.upload_time) << '\n';
  }
}

std::string serialize_graph_string(const SparseGraph& g) {
  std::ostringstream ss;
  serialize_graph(ss, g);
  return ss.str();
}

void write_graph_file(const std::filesystem::path& path, const SparseGraph& g) {
  AtomicFile f(path);
  serialize_graph(f.stream(), g);
  f.commit();
}

SparseGraph deserialize_graph(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty graph file");
  ++lineno;
  auto toks = split_ws(line);
  if (toks.size() != 5 || toks[0] != "graph" || toks[1] != "v1") {
    throw ParseError(lineno, "expected header 'graph v1 <version> <C> <W>'");
  }
  SparseGraph g;
  g.version_ = parse_int(toks[2], lineno);
  g.n_clusters_ = static_cast<int>(parse_int(toks[3], lineno));
  g.target_w_ = static_cast<int>(parse_int(toks[4], lineno));
  if (g.n_clusters_ < 1 || g.target_w_ < 1) throw ParseError(lineno, "invalid graph dimensions");
  g.active_.resize(static_cast<std::size_t>(g.n_clusters_));
  g.reserve_.resize(static_cast<std::size_t>(g.n_clusters_));

  bool in_items = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    toks = split_ws(line);
    if (toks[0] == "edge") {
      if (in_items) throw ParseError(lineno, "edge line after item section");
      if (toks.size() != 4) throw ParseError(lineno, "expected 'edge <cluster> <item> <score>'");
      const auto c = parse_int(toks[1], lineno);
      const auto item = parse_int(toks[2], lineno);
      const double score = parse_double(toks[3], lineno);
      if (c < 0 || c >= g.n_clusters_) throw ParseError(lineno, "cluster id out of range");
      if (item < 0) throw ParseError(lineno, "negative item id");
      auto& active = g.active_[static_cast<std::size_t>(c)];
      if (active.size() >= static_cast<std::size_t>(g.target_w_)) {
        throw ParseError(lineno, "cluster exceeds W");
      }
      if (!active.empty()) {
        const EdgeEntry e{item, score};
        if (edge_before(e, active.back())) {
          throw ParseError(lineno, "edges within a cluster must be ordered by score");
        }
        if (std::any_of(active.begin(), active.end(),
                        [&](const EdgeEntry& x) { return x.item == item; })) {
          throw ParseError(lineno, "duplicate edge");
        }
      }
      active.push_back({item, score});
      g.degree_[item] += 1;
    } else if (toks[0] == "item") {
      in_items = true;
      if (toks.size() != 3) throw ParseError(lineno, "expected 'item <item> <upload_time>'");
      const auto item = parse_int(toks[1], lineno);
      const double t = parse_double(toks[2], lineno);
      if (!g.meta_.try_emplace(item, ItemInfo{t, true}).second) {
        throw ParseError(lineno, "duplicate item metadata");
      }
    } else {
      throw ParseError(lineno, "unknown record '" + toks[0] + "'");
    }
  }
  for (const auto& [item, deg] : g.degree_) {
    (void)deg;
    if (!g.meta_.count(item)) {
      throw ParseError(lineno, "item " + std::to_string(item) +
                                   " referenced by an edge has no metadata (truncated file?)");
    }
  }
  return g;
}

SparseGraph deserialize_graph_string(const std::string& text) {
  std::istringstream ss(text);
  return deserialize_graph(ss);
}

SparseGraph read_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return deserialize_graph(in);
}

}  // namespace edgebandit
