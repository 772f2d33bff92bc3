#include "edgebandit/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace edgebandit {

DelaySpec DelaySpec::constant(double d) {
  if (d < 0.0) throw std::invalid_argument("delay must be non-negative");
  DelaySpec s;
  s.kind = Kind::Constant;
  s.value = d;
  return s;
}

DelaySpec DelaySpec::uniform_range(double lo, double hi) {
  if (lo < 0.0 || hi < lo) throw std::invalid_argument("invalid uniform delay range");
  DelaySpec s;
  s.kind = Kind::Uniform;
  s.lo = lo;
  s.hi = hi;
  return s;
}

DelaySpec DelaySpec::parse(const std::string& text) {
  if (text.rfind("uniform:", 0) == 0) {
    const auto rest = text.substr(8);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("expected uniform:<lo>:<hi>, got '" + text + "'");
    }
    return uniform_range(parse_double(rest.substr(0, colon), 0),
                         parse_double(rest.substr(colon + 1), 0));
  }
  return constant(parse_double(text, 0));
}

std::string DelaySpec::to_string() const {
  if (kind == Kind::Constant) return fmt_double(value);
  return "uniform:" + fmt_double(lo) + ":" + fmt_double(hi);
}

double DelaySpec::draw(Rng& rng) const {
  if (kind == Kind::Constant) return value;
  return rng.uniform(lo, hi);
}

void write_params(std::ostream& out, const Snapshot& snap) {
  out << "params v1 " << snap.version << ' ' << snap.graph_version << '\n';
  for (const auto& [cluster, list] : snap.edges.by_cluster) {
    for (const auto& [item, ep] : list) {
      out << "pe " << cluster << ' ' << item << ' ' << fmt_double(ep.d) << ' ' << fmt_double(ep.b)
          << ' ' << ep.n << '\n';
    }
  }
}

void write_params_file(const std::filesystem::path& path, const Snapshot& snap) {
  AtomicFile f(path);
  write_params(f.stream(), snap);
  f.commit();
}

Snapshot read_params(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty params file");
  ++lineno;
  auto toks = split_ws(line);
  if (toks.size() != 4 || toks[0] != "params" || toks[1] != "v1") {
    throw ParseError(lineno, "expected header 'params v1 <version> <graph_version>'");
  }
  Snapshot snap;
  snap.version = static_cast<std::uint64_t>(parse_int(toks[2], lineno));
  snap.graph_version = parse_int(toks[3], lineno);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    toks = split_ws(line);
    if (toks[0] != "pe" || toks.size() != 6) {
      throw ParseError(lineno, "expected 'pe <cluster> <item> <d> <b> <n>'");
    }
    EdgeParams ep;
    const auto cluster = static_cast<ClusterId>(parse_int(toks[1], lineno));
    const auto item = parse_int(toks[2], lineno);
    ep.d = parse_double(toks[3], lineno);
    ep.b = parse_double(toks[4], lineno);
    ep.n = static_cast<std::uint64_t>(parse_int(toks[5], lineno));
    if (!(ep.d >= 1.0)) throw ParseError(lineno, "edge d below the 1.0 prior");
    snap.edges.insert(cluster, item, ep);
    if (ep.n == 0) snap.infinite_edges += 1;
  }
  return snap;
}

Snapshot read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_params(in);
}

ParamStore::ParamStore(int n_shards, DelaySpec delay, std::uint64_t seed, double r_max)
    : n_shards_(n_shards),
      delay_(delay),
      r_max_(r_max),
      shards_(static_cast<std::size_t>(n_shards)),
      delay_rng_(Rng::derive(seed, 0xde1a)) {
  if (n_shards < 1) throw std::invalid_argument("n_shards must be >= 1");
  if (!(r_max > 0.0)) throw std::invalid_argument("r_max must be positive");
}

std::size_t ParamStore::shard_of(ClusterId c) const {
  // splitmix-style mix so consecutive cluster ids spread across shards
  std::uint64_t z = static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return static_cast<std::size_t>((z ^ (z >> 31)) % static_cast<std::uint64_t>(n_shards_));
}

void ParamStore::ingest(FeedbackEvent ev) {
  if (!std::isfinite(ev.reward)) throw std::invalid_argument("reward must be finite");
  if (ev.emit_time < 0.0) throw std::invalid_argument("emit_time must be non-negative");
  {
    std::lock_guard<std::mutex> lk(registry_mu_);
    auto it = item_degree_.find(ev.item);
    if (it == item_degree_.end() || it->second == 0) {
      std::lock_guard<std::mutex> slk(stats_mu_);
      ingested_ += 1;
      dropped_ += 1;
      return;
    }
  }
  std::lock_guard<std::mutex> lk(queue_mu_);
  Pending p;
  p.maturity = ev.emit_time + delay_.draw(delay_rng_);
  p.seq = next_seq_++;
  p.ev = std::move(ev);
  queue_.push(std::move(p));
  std::lock_guard<std::mutex> slk(stats_mu_);
  ingested_ += 1;
}

void ParamStore::apply_event(const Pending& p, double now) {
  bool item_known;
  {
    std::lock_guard<std::mutex> lk(registry_mu_);
    auto it = item_degree_.find(p.ev.item);
    item_known = it != item_degree_.end() && it->second > 0;
  }
  if (!item_known) {
    std::lock_guard<std::mutex> slk(stats_mu_);
    dropped_ += 1;
    return;
  }
  const double r = std::clamp(p.ev.reward, 0.0, r_max_);
  for (const auto& entry : p.ev.context.entries) {
    Shard& shard = shards_[shard_of(entry.cluster)];
    std::lock_guard<std::mutex> lk(shard.mu);
    auto cit = shard.edges.find(entry.cluster);
    if (cit == shard.edges.end()) continue;
    auto eit = cit->second.find(p.ev.item);
    if (eit == cit->second.end()) continue;
    if (eit->second.n == 0) infinite_edges_.fetch_sub(1);
    eit->second.apply(entry.weight, r);
  }
  std::lock_guard<std::mutex> slk(stats_mu_);
  applied_ += 1;
  latency_sum_ += now - p.ev.emit_time;
}

std::size_t ParamStore::advance(double now) {
  std::size_t count = 0;
  while (true) {
    Pending p;
    {
      std::lock_guard<std::mutex> lk(queue_mu_);
      if (queue_.empty() || queue_.top().maturity > now) break;
      p = queue_.top();
      queue_.pop();
    }
    apply_event(p, now);
    ++count;
  }
  std::lock_guard<std::mutex> slk(stats_mu_);
  last_now_ = std::max(last_now_, now);
  return count;
}

Snapshot ParamStore::snapshot() {
  std::lock_guard<std::mutex> store_lk(store_mu_);
  Snapshot snap;
  snap.version = snapshot_version_.fetch_add(1) + 1;
  snap.graph_version = graph_version_;
  for (auto& shard : shards_) {
    std::lock_guard<std::mutex> lk(shard.mu);
    for (const auto& [cluster, items] : shard.edges) {
      auto& list = snap.edges.by_cluster[cluster];
      list.reserve(items.size());
      for (const auto& [item, ep] : items) list.emplace_back(item, ep);
    }
  }
  snap.infinite_edges = infinite_edges_.load();
  {
    std::lock_guard<std::mutex> slk(stats_mu_);
    snap.created_at = last_now_;
  }
  return snap;
}

bool ParamStore::sync_graph(const GraphDelta& delta) {
  std::lock_guard<std::mutex> store_lk(store_mu_);
  if (delta.new_version <= graph_version_) return false;
  for (const auto& [cluster, item] : delta.removed) {
    Shard& shard = shards_[shard_of(cluster)];
    std::lock_guard<std::mutex> lk(shard.mu);
    auto cit = shard.edges.find(cluster);
    if (cit == shard.edges.end()) continue;
    auto eit = cit->second.find(item);
    if (eit == cit->second.end()) continue;
    if (eit->second.n == 0) infinite_edges_.fetch_sub(1);
    cit->second.erase(eit);
    if (cit->second.empty()) shard.edges.erase(cit);
    std::lock_guard<std::mutex> rlk(registry_mu_);
    auto dit = item_degree_.find(item);
    if (dit != item_degree_.end() && --dit->second == 0) item_degree_.erase(dit);
  }
  for (const auto& e : delta.added) {
    Shard& shard = shards_[shard_of(e.cluster)];
    std::lock_guard<std::mutex> lk(shard.mu);
    auto [it, inserted] = shard.edges[e.cluster].try_emplace(e.item);
    if (inserted) {
      infinite_edges_.fetch_add(1);
      std::lock_guard<std::mutex> rlk(registry_mu_);
      item_degree_[e.item] += 1;
    }
  }
  graph_version_ = delta.new_version;
  return true;
}

StoreStats ParamStore::stats() const {
  StoreStats s;
  {
    std::lock_guard<std::mutex> lk(stats_mu_);
    s.ingested = ingested_;
    s.applied = applied_;
    s.dropped = dropped_;
    s.latency_sum = latency_sum_;
  }
  {
    std::lock_guard<std::mutex> lk(queue_mu_);
    s.queued = queue_.size();
  }
  s.infinite_edges = infinite_edges_.load();
  return s;
}

std::int64_t ParamStore::current_graph_version() const {
  std::lock_guard<std::mutex> lk(store_mu_);
  return graph_version_;
}

GraphDelta full_graph_delta(const SparseGraph& g) {
  GraphDelta delta;
  delta.new_version = g.version();
  for (int c = 0; c < g.n_clusters(); ++c) {
    for (const auto& e : g.items_for(static_cast<ClusterId>(c))) {
      delta.added.push_back({static_cast<ClusterId>(c), e.item, e.score});
    }
  }
  for (ItemId item : g.active_items()) {
    const ItemInfo* info = g.find_item(item);
    delta.added_items.emplace_back(item, info ? info->upload_time : 0.0);
  }
  return delta;
}

}  // namespace edgebandit
