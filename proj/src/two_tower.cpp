#include "edgebandit/two_tower.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace edgebandit {

void write_interactions(std::ostream& out, const InteractionLog& log) {
  for (const auto& r : log.records) {
    out << r.user << '\t' << r.item << '\t' << fmt_double(r.time) << '\n';
  }
}

void write_interactions_file(const std::filesystem::path& path, const InteractionLog& log) {
  AtomicFile f(path);
  write_interactions(f.stream(), log);
  f.commit();
}

InteractionLog read_interactions(std::istream& in, std::int64_t n_users, std::int64_t n_items) {
  InteractionLog log;
  std::string line;
  std::size_t lineno = 0;
  double prev_time = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> toks;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      toks.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (toks.size() != 3) throw ParseError(lineno, "expected user<TAB>item<TAB>timestamp");
    Interaction r;
    r.user = parse_int(toks[0], lineno);
    r.item = parse_int(toks[1], lineno);
    r.time = parse_double(toks[2], lineno);
    if (r.user < 0 || (n_users >= 0 && r.user >= n_users)) {
      throw ParseError(lineno, "user id out of bounds: " + toks[0]);
    }
    if (r.item < 0 || (n_items >= 0 && r.item >= n_items)) {
      throw ParseError(lineno, "item id out of bounds: " + toks[1]);
    }
    if (r.time < prev_time) throw ParseError(lineno, "timestamps must be non-decreasing");
    prev_time = r.time;
    log.records.push_back(r);
  }
  return log;
}

InteractionLog read_interactions_file(const std::filesystem::path& path, std::int64_t n_users,
                                      std::int64_t n_items) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_interactions(in, n_users, n_items);
}

std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  std::vector<double> out(logits.size());
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / temperature - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

TwoTowerModel::TwoTowerModel(std::int64_t n_users, std::int64_t n_items, TwoTowerConfig cfg)
    : n_users_(n_users), n_items_(n_items), cfg_(cfg), rng_(Rng::derive(cfg.seed, 0xebd0)) {
  if (n_users <= 0 || n_items <= 0) throw std::invalid_argument("world must be non-empty");
  if (!(cfg_.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (cfg_.dim <= 0) throw std::invalid_argument("dim must be positive");
  Rng init(Rng::derive(cfg.seed, 0xebd1));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
  auto init_table = [&](std::int64_t n) {
    std::vector<std::vector<double>> t(static_cast<std::size_t>(n));
    for (auto& row : t) {
      row.resize(static_cast<std::size_t>(cfg_.dim));
      for (double& v : row) v = init.normal() * scale;
    }
    return t;
  };
  users_ = init_table(n_users);
  items_ = init_table(n_items);
}

TwoTowerModel::TwoTowerModel(IdTable user_table, IdTable item_table, TwoTowerConfig cfg)
    : n_users_(static_cast<std::int64_t>(user_table.size())),
      n_items_(static_cast<std::int64_t>(item_table.size())),
      cfg_(cfg),
      rng_(Rng::derive(cfg.seed, 0xebd0)) {
  if (user_table.size() == 0 || item_table.size() == 0) {
    throw std::invalid_argument("tables must be non-empty");
  }
  cfg_.dim = static_cast<int>(user_table.dim());
  if (item_table.dim() != user_table.dim()) {
    throw std::invalid_argument("user/item table dimensions differ");
  }
  auto place = [&](IdTable& t, std::vector<std::vector<double>>& dst) {
    dst.assign(t.size(), {});
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto id = t.ids[i];
      if (id < 0 || id >= static_cast<std::int64_t>(t.size())) {
        throw std::invalid_argument("table ids must be dense 0..n-1");
      }
      dst[static_cast<std::size_t>(id)] = std::move(t.rows[i]);
    }
  };
  place(user_table, users_);
  place(item_table, items_);
}

void TwoTowerModel::check_batch(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& batch) const {
  if (batch.empty()) throw std::invalid_argument("batch must contain at least one pair");
  for (const auto& [u, v] : batch) {
    if (u < 0 || u >= n_users_) throw std::invalid_argument("invalid user id " + std::to_string(u));
    if (v < 0 || v >= n_items_) throw std::invalid_argument("invalid item id " + std::to_string(v));
  }
}

namespace {

struct BatchForward {
  std::vector<std::vector<double>> f;  // normalized user rows per batch row
  std::vector<std::vector<double>> g;  // normalized item rows per batch row
  std::vector<double> f_norm;
  std::vector<double> g_norm;
  std::vector<std::vector<double>> prob;  // row-wise softmax of logits
  double loss = 0.0;
};

BatchForward forward(const std::vector<std::vector<double>>& users,
                     const std::vector<std::vector<double>>& items,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& batch,
                     double tau) {
  const std::size_t b = batch.size();
  BatchForward fw;
  fw.f.resize(b);
  fw.g.resize(b);
  fw.f_norm.resize(b);
  fw.g_norm.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    fw.f[i] = users[static_cast<std::size_t>(batch[i].first)];
    fw.f_norm[i] = normalize(fw.f[i]);
    fw.g[i] = items[static_cast<std::size_t>(batch[i].second)];
    fw.g_norm[i] = normalize(fw.g[i]);
  }
  fw.prob.assign(b, std::vector<double>(b));
  for (std::size_t i = 0; i < b; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b; ++j) {
      fw.prob[i][j] = dot(fw.f[i], fw.g[j]) / tau;
      m = std::max(m, fw.prob[i][j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < b; ++j) sum += std::exp(fw.prob[i][j] - m);
    const double lse = m + std::log(sum);
    fw.loss += lse - fw.prob[i][i];
    for (std::size_t j = 0; j < b; ++j) fw.prob[i][j] = std::exp(fw.prob[i][j] - lse);
  }
  if (!std::isfinite(fw.loss)) throw std::runtime_error("non-finite batch loss");
  return fw;
}

// Backprop through y = x / ||x||: dx = (dy - <dy, y> y) / ||x||.
void add_normalized_grad(std::vector<double>& dst, const std::vector<double>& dy,
                         const std::vector<double>& y, double norm) {
  const double proj = dot(dy, y);
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += (dy[k] - proj * y[k]) / norm;
}

}  // namespace

double TwoTowerModel::batch_softmax_loss(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& batch) const {
  check_batch(batch);
  return forward(users_, items_, batch, cfg_.temperature).loss;
}

double TwoTowerModel::train_step(const std::vector<std::pair<std::int64_t, std::int64_t>>& batch) {
  check_batch(batch);
  const auto fw = forward(users_, items_, batch, cfg_.temperature);
  const std::size_t b = batch.size();
  const std::size_t d = static_cast<std::size_t>(cfg_.dim);
  const double inv_tau = 1.0 / cfg_.temperature;

  // Gradients are accumulated per raw table row; duplicate ids in a batch sum.
  std::map<std::int64_t, std::vector<double>> du;
  std::map<std::int64_t, std::vector<double>> dv;
  std::vector<double> df(d), dg(d);
  for (std::size_t i = 0; i < b; ++i) {
    std::fill(df.begin(), df.end(), 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      const double coef = (fw.prob[i][j] - (i == j ? 1.0 : 0.0)) * inv_tau;
      for (std::size_t k = 0; k < d; ++k) df[k] += coef * fw.g[j][k];
    }
    auto& slot = du.try_emplace(batch[i].first, d, 0.0).first->second;
    add_normalized_grad(slot, df, fw.f[i], fw.f_norm[i]);
  }
  for (std::size_t j = 0; j < b; ++j) {
    std::fill(dg.begin(), dg.end(), 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      const double coef = (fw.prob[i][j] - (i == j ? 1.0 : 0.0)) * inv_tau;
      for (std::size_t k = 0; k < d; ++k) dg[k] += coef * fw.f[i][k];
    }
    auto& slot = dv.try_emplace(batch[j].second, d, 0.0).first->second;
    add_normalized_grad(slot, dg, fw.g[j], fw.g_norm[j]);
  }

  for (const auto& [id, grad] : du) {
    for (double v : grad) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite gradient for user row " + std::to_string(id));
      }
    }
    auto& row = users_[static_cast<std::size_t>(id)];
    for (std::size_t k = 0; k < d; ++k) row[k] -= cfg_.learning_rate * grad[k];
  }
  for (const auto& [id, grad] : dv) {
    for (double v : grad) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite gradient for item row " + std::to_string(id));
      }
    }
    auto& row = items_[static_cast<std::size_t>(id)];
    for (std::size_t k = 0; k < d; ++k) row[k] -= cfg_.learning_rate * grad[k];
  }
  return fw.loss;
}

double TwoTowerModel::fit(const InteractionLog& log, int epochs, int batch_size) {
  if (log.records.empty()) throw std::invalid_argument("empty interaction log");
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs/batch_size must be >= 1");
  std::vector<std::size_t> order(log.records.size());
  std::iota(order.begin(), order.end(), 0);
  double epoch_loss = 0.0;
  for (int e = 0; e < epochs; ++e) {
    rng_.shuffle(order);
    epoch_loss = 0.0;
    std::size_t n_batches = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> batch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      for (std::size_t i = start; i < end; ++i) {
        const auto& r = log.records[order[i]];
        batch.emplace_back(r.user, r.item);
      }
      epoch_loss += train_step(batch);
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(n_batches);
  }
  return epoch_loss;
}

std::vector<double> TwoTowerModel::encode_user(std::int64_t user) const {
  if (user < 0 || user >= n_users_) {
    throw std::invalid_argument("invalid user id " + std::to_string(user));
  }
  return normalized(users_[static_cast<std::size_t>(user)]);
}

std::vector<double> TwoTowerModel::encode_item(std::int64_t item) const {
  if (item < 0 || item >= n_items_) {
    throw std::invalid_argument("invalid item id " + std::to_string(item));
  }
  return normalized(items_[static_cast<std::size_t>(item)]);
}

double TwoTowerModel::evaluate_recall(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs, int k) const {
  if (pairs.empty()) throw std::invalid_argument("held-out set must be non-empty");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<std::vector<double>> item_emb(static_cast<std::size_t>(n_items_));
  for (std::int64_t j = 0; j < n_items_; ++j) {
    item_emb[static_cast<std::size_t>(j)] = encode_item(j);
  }
  std::size_t hits = 0;
  for (const auto& [u, target] : pairs) {
    const auto ue = encode_user(u);
    const double target_score = dot(ue, item_emb[static_cast<std::size_t>(target)]);
    std::int64_t position = 0;
    for (std::int64_t j = 0; j < n_items_; ++j) {
      const double s = dot(ue, item_emb[static_cast<std::size_t>(j)]);
      if (s > target_score || (s == target_score && j < target)) ++position;
    }
    if (position < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

IdTable TwoTowerModel::user_table() const {
  IdTable t;
  for (std::int64_t i = 0; i < n_users_; ++i) {
    t.ids.push_back(i);
    t.rows.push_back(encode_user(i));
  }
  return t;
}

IdTable TwoTowerModel::item_table() const {
  IdTable t;
  for (std::int64_t j = 0; j < n_items_; ++j) {
    t.ids.push_back(j);
    t.rows.push_back(encode_item(j));
  }
  return t;
}

std::vector<double>& TwoTowerModel::raw_user_row(std::int64_t user) {
  return users_.at(static_cast<std::size_t>(user));
}

std::vector<double>& TwoTowerModel::raw_item_row(std::int64_t item) {
  return items_.at(static_cast<std::size_t>(item));
}

}  // namespace edgebandit
