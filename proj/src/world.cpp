#include "edgebandit/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace edgebandit {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<std::vector<double>> draw_directions(int count, int dim, Rng& rng) {
  std::vector<std::vector<double>> dirs(static_cast<std::size_t>(count));
  for (auto& d : dirs) {
    d.resize(static_cast<std::size_t>(dim));
    do {
      for (double& v : d) v = rng.normal();
    } while (l2_norm(d) < 1e-9);
    normalize(d);
  }
  return dirs;
}

}  // namespace

World::World(const WorldSpec& spec) : spec_(spec) {
  if (spec.n_users < 1 || spec.n_items_initial < 1) {
    throw std::invalid_argument("world must have users and items");
  }
  if (spec.latent_dim < 1 || spec.n_components < 1) {
    throw std::invalid_argument("latent_dim and n_components must be >= 1");
  }
  if (spec.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (spec.item_arrival_rate < 0.0 || spec.spare_items < 0) {
    throw std::invalid_argument("arrival counts must be non-negative");
  }

  Rng rng(Rng::derive(spec.seed, 0x301d));
  const auto dirs = draw_directions(spec.n_components, spec.latent_dim, rng);

  auto sample_around = [&](int component) {
    std::vector<double> v = dirs[static_cast<std::size_t>(component)];
    for (double& x : v) x += spec_.component_noise * rng.normal();
    if (l2_norm(v) < 1e-9) v = dirs[static_cast<std::size_t>(component)];
    normalize(v);
    return v;
  };

  user_latents_.reserve(static_cast<std::size_t>(spec.n_users));
  user_component_.reserve(static_cast<std::size_t>(spec.n_users));
  for (std::int64_t u = 0; u < spec.n_users; ++u) {
    const int comp = static_cast<int>(rng.uniform_int(spec.n_components));
    user_component_.push_back(comp);
    if (spec.n_components > 1 && rng.u01() < spec.user_blend) {
      // Blend two components so cluster affinities are genuinely heterogeneous.
      int other = static_cast<int>(rng.uniform_int(spec.n_components));
      if (other == comp) other = (other + 1) % spec.n_components;
      const double mix = rng.uniform(0.55, 0.95);
      std::vector<double> v(static_cast<std::size_t>(spec.latent_dim));
      const auto& a = dirs[static_cast<std::size_t>(comp)];
      const auto& b = dirs[static_cast<std::size_t>(other)];
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = mix * a[k] + (1.0 - mix) * b[k] + spec.component_noise * rng.normal();
      }
      if (l2_norm(v) < 1e-9) v = a;
      normalize(v);
      user_latents_.push_back(std::move(v));
    } else {
      user_latents_.push_back(sample_around(comp));
    }
  }

  const std::int64_t scheduled_arrivals =
      static_cast<std::int64_t>(std::floor(spec.item_arrival_rate * static_cast<double>(spec.horizon)));
  const std::int64_t total = spec.n_items_initial + scheduled_arrivals + spec.spare_items;
  item_latents_.reserve(static_cast<std::size_t>(total));
  item_component_.reserve(static_cast<std::size_t>(total));
  for (std::int64_t j = 0; j < total; ++j) {
    const int comp = static_cast<int>(rng.uniform_int(spec.n_components));
    item_component_.push_back(comp);
    item_latents_.push_back(sample_around(comp));
  }

  upload_times_.assign(static_cast<std::size_t>(total),
                       std::numeric_limits<double>::infinity());
  for (std::int64_t j = 0; j < spec.n_items_initial; ++j) {
    upload_times_[static_cast<std::size_t>(j)] =
        spec.initial_age_spread > 0.0 ? -rng.u01() * spec.initial_age_spread : 0.0;
  }
  // Deterministic arrival schedule: step t releases
  // floor((t+1)*rate) - floor(t*rate) items.
  std::int64_t next = spec.n_items_initial;
  for (std::int64_t t = 0; t < spec.horizon && next < spec.n_items_initial + scheduled_arrivals; ++t) {
    const auto target = static_cast<std::int64_t>(
        std::floor(spec.item_arrival_rate * static_cast<double>(t + 1)));
    const auto done = static_cast<std::int64_t>(
        std::floor(spec.item_arrival_rate * static_cast<double>(t)));
    for (std::int64_t i = done; i < target && next < spec.n_items_initial + scheduled_arrivals; ++i) {
      upload_times_[static_cast<std::size_t>(next++)] = static_cast<double>(t);
    }
  }
}

std::int64_t World::n_scheduled_items() const {
  return total_items() - spec_.spare_items;
}

const std::vector<double>& World::user_latent(UserId u) const {
  if (u < 0 || u >= spec_.n_users) throw std::invalid_argument("invalid user id");
  return user_latents_[static_cast<std::size_t>(u)];
}

void World::check_item(ItemId j) const {
  if (j < 0 || j >= total_items()) throw std::invalid_argument("invalid item id");
}

const std::vector<double>& World::item_latent(ItemId j) const {
  check_item(j);
  return item_latents_[static_cast<std::size_t>(j)];
}

double World::scheduled_upload_time(ItemId j) const {
  check_item(j);
  return upload_times_[static_cast<std::size_t>(j)];
}

std::vector<ItemId> World::arrivals_at(std::int64_t step) const {
  std::vector<ItemId> out;
  for (std::int64_t j = spec_.n_items_initial; j < n_scheduled_items(); ++j) {
    if (upload_times_[static_cast<std::size_t>(j)] == static_cast<double>(step)) out.push_back(j);
  }
  return out;
}

double World::true_reward_prob(UserId u, ItemId j) const {
  check_item(j);
  if (spec_.linear_rewards) {
    if (!linear_ready_) {
      throw std::logic_error("linear world queried before plant_linear_model()");
    }
    const auto& ctx = linear_user_contexts_.at(static_cast<std::size_t>(u));
    const auto& theta = linear_theta_.at(static_cast<std::size_t>(j));
    double p = 0.0;
    for (const auto& e : ctx.entries) {
      for (const auto& [cluster, value] : theta) {
        if (cluster == e.cluster) p += e.weight * value;
      }
    }
    return std::clamp(p, 0.0, 1.0);
  }
  return sigmoid(spec_.reward_scale * dot(user_latent(u), item_latent(j)) + spec_.reward_bias);
}

double World::draw_reward(UserId u, ItemId j, Rng& rng) const {
  return rng.u01() < true_reward_prob(u, j) ? 1.0 : 0.0;
}

std::vector<double> World::observed_item_embedding(ItemId j) const {
  check_item(j);
  Rng rng(Rng::derive(spec_.seed ^ static_cast<std::uint64_t>(j) * 0x9e3779b97f4a7c15ull, 0x0b5));
  std::vector<double> v = item_latents_[static_cast<std::size_t>(j)];
  for (double& x : v) x += spec_.observation_noise * rng.normal();
  if (l2_norm(v) < 1e-9) v = item_latents_[static_cast<std::size_t>(j)];
  normalize(v);
  return v;
}

void World::plant_linear_model(const Centroids& centroids, int context_k, double context_tau) {
  if (!spec_.linear_rewards) return;
  linear_user_contexts_.clear();
  linear_user_contexts_.reserve(user_latents_.size());
  for (const auto& u : user_latents_) {
    linear_user_contexts_.push_back(context_vector(u, centroids, context_k, context_tau));
  }
  linear_theta_.clear();
  linear_theta_.reserve(item_latents_.size());
  const int support = std::min(3, centroids.count());
  for (const auto& v : item_latents_) {
    std::vector<std::pair<ClusterId, double>> row;
    std::vector<std::pair<double, ClusterId>> scored;
    for (int c = 0; c < centroids.count(); ++c) {
      scored.emplace_back(dot(centroids.vectors[static_cast<std::size_t>(c)], v),
                          static_cast<ClusterId>(c));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int i = 0; i < support; ++i) {
      row.emplace_back(scored[static_cast<std::size_t>(i)].second,
                       sigmoid(spec_.reward_scale * scored[static_cast<std::size_t>(i)].first +
                               spec_.reward_bias));
    }
    std::sort(row.begin(), row.end());
    linear_theta_.push_back(std::move(row));
  }
  linear_ready_ = true;
}

void World::save(std::ostream& out) const {
  out << "world v1\n";
  out << "n_users " << spec_.n_users << '\n';
  out << "n_items_initial " << spec_.n_items_initial << '\n';
  out << "latent_dim " << spec_.latent_dim << '\n';
  out << "n_components " << spec_.n_components << '\n';
  out << "component_noise " << fmt_double(spec_.component_noise) << '\n';
  out << "user_blend " << fmt_double(spec_.user_blend) << '\n';
  out << "reward_scale " << fmt_double(spec_.reward_scale) << '\n';
  out << "reward_bias " << fmt_double(spec_.reward_bias) << '\n';
  out << "item_arrival_rate " << fmt_double(spec_.item_arrival_rate) << '\n';
  out << "item_max_age " << fmt_double(spec_.item_max_age) << '\n';
  out << "initial_age_spread " << fmt_double(spec_.initial_age_spread) << '\n';
  out << "horizon " << spec_.horizon << '\n';
  out << "spare_items " << spec_.spare_items << '\n';
  out << "observation_noise " << fmt_double(spec_.observation_noise) << '\n';
  out << "linear_rewards " << (spec_.linear_rewards ? 1 : 0) << '\n';
  out << "seed " << spec_.seed << '\n';
  out << "users " << user_latents_.size() << '\n';
  for (std::size_t u = 0; u < user_latents_.size(); ++u) {
    out << user_component_[u];
    for (double v : user_latents_[u]) out << ' ' << fmt_double(v);
    out << '\n';
  }
  out << "items " << item_latents_.size() << '\n';
  for (std::size_t j = 0; j < item_latents_.size(); ++j) {
    out << item_component_[j] << ' ' << fmt_double(upload_times_[j]);
    for (double v : item_latents_[j]) out << ' ' << fmt_double(v);
    out << '\n';
  }
}

void World::save_file(const std::filesystem::path& path) const {
  AtomicFile f(path);
  save(f.stream());
  f.commit();
}

World World::load(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, "unexpected end of world file");
    ++lineno;
    return split_ws(line);
  };
  auto toks = next_line();
  if (toks.size() != 2 || toks[0] != "world" || toks[1] != "v1") {
    throw ParseError(lineno, "expected header 'world v1'");
  }
  World w;
  auto scalar = [&](const char* key) {
    auto t = next_line();
    if (t.size() != 2 || t[0] != key) {
      throw ParseError(lineno, std::string("expected '") + key + " <value>'");
    }
    return t[1];
  };
  w.spec_.n_users = parse_int(scalar("n_users"), lineno);
  w.spec_.n_items_initial = parse_int(scalar("n_items_initial"), lineno);
  w.spec_.latent_dim = static_cast<int>(parse_int(scalar("latent_dim"), lineno));
  w.spec_.n_components = static_cast<int>(parse_int(scalar("n_components"), lineno));
  w.spec_.component_noise = parse_double(scalar("component_noise"), lineno);
  w.spec_.user_blend = parse_double(scalar("user_blend"), lineno);
  w.spec_.reward_scale = parse_double(scalar("reward_scale"), lineno);
  w.spec_.reward_bias = parse_double(scalar("reward_bias"), lineno);
  w.spec_.item_arrival_rate = parse_double(scalar("item_arrival_rate"), lineno);
  w.spec_.item_max_age = parse_double(scalar("item_max_age"), lineno);
  w.spec_.initial_age_spread = parse_double(scalar("initial_age_spread"), lineno);
  w.spec_.horizon = parse_int(scalar("horizon"), lineno);
  w.spec_.spare_items = parse_int(scalar("spare_items"), lineno);
  w.spec_.observation_noise = parse_double(scalar("observation_noise"), lineno);
  w.spec_.linear_rewards = parse_int(scalar("linear_rewards"), lineno) != 0;
  w.spec_.seed = static_cast<std::uint64_t>(parse_int(scalar("seed"), lineno));

  auto section = [&](const char* key) {
    auto t = next_line();
    if (t.size() != 2 || t[0] != key) {
      throw ParseError(lineno, std::string("expected '") + key + " <count>'");
    }
    return parse_int(t[1], lineno);
  };
  const auto n_users = section("users");
  const std::size_t dim = static_cast<std::size_t>(w.spec_.latent_dim);
  for (std::int64_t u = 0; u < n_users; ++u) {
    auto t = next_line();
    if (t.size() != dim + 1) throw ParseError(lineno, "bad user latent row");
    w.user_component_.push_back(static_cast<int>(parse_int(t[0], lineno)));
    std::vector<double> v(dim);
    for (std::size_t k = 0; k < dim; ++k) v[k] = parse_double(t[k + 1], lineno);
    w.user_latents_.push_back(std::move(v));
  }
  const auto n_items = section("items");
  for (std::int64_t j = 0; j < n_items; ++j) {
    auto t = next_line();
    if (t.size() != dim + 2) throw ParseError(lineno, "bad item latent row");
    w.item_component_.push_back(static_cast<int>(parse_int(t[0], lineno)));
    w.upload_times_.push_back(parse_double(t[1], lineno));
    std::vector<double> v(dim);
    for (std::size_t k = 0; k < dim; ++k) v[k] = parse_double(t[k + 2], lineno);
    w.item_latents_.push_back(std::move(v));
  }
  return w;
}

World World::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return World::load(in);
}

LogGenResult generate_logs(const World& world, LogPolicy policy, std::int64_t n_events,
                           std::uint64_t seed) {
  if (n_events < 0) throw std::invalid_argument("n_events must be non-negative");
  LogGenResult res;
  Rng rng(Rng::derive(seed, 0x106));
  const std::int64_t n_items = world.spec().n_items_initial;

  std::vector<double> item_weights;
  if (policy == LogPolicy::PopularityBiased) {
    // Popularity proxy: softmax over the items' mean true reward.
    std::vector<double> mean_p(static_cast<std::size_t>(n_items), 0.0);
    for (std::int64_t j = 0; j < n_items; ++j) {
      double s = 0.0;
      for (std::int64_t u = 0; u < world.n_users(); ++u) s += world.true_reward_prob(u, j);
      mean_p[static_cast<std::size_t>(j)] = s / static_cast<double>(world.n_users());
    }
    item_weights = softmax(mean_p, 0.05);
    for (std::size_t j = 1; j < item_weights.size(); ++j) item_weights[j] += item_weights[j - 1];
  }

  const std::uint64_t max_attempts =
      n_events == 0 ? 0 : static_cast<std::uint64_t>(n_events) * 1000ull;
  while (res.positives < static_cast<std::uint64_t>(n_events) && res.attempts < max_attempts) {
    const UserId u = rng.uniform_int(world.n_users());
    ItemId j = 0;
    if (policy == LogPolicy::Uniform) {
      j = rng.uniform_int(n_items);
    } else {
      const double target = rng.u01();
      j = static_cast<ItemId>(
          std::lower_bound(item_weights.begin(), item_weights.end(), target) -
          item_weights.begin());
      if (j >= n_items) j = n_items - 1;
    }
    res.attempts += 1;
    if (world.draw_reward(u, j, rng) > 0.0) {
      res.log.records.push_back({u, j, static_cast<double>(res.attempts)});
      res.positives += 1;
    }
  }
  return res;
}

}  // namespace edgebandit
