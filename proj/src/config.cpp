#include "edgebandit/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "edgebandit/io.hpp"

namespace edgebandit {

namespace {

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"world",
       {"n_users", "n_items_initial", "latent_dim", "n_components", "component_noise",
        "user_blend", "reward_scale", "reward_bias", "item_arrival_rate", "item_max_age", "initial_age_spread",
        "horizon", "spare_items", "observation_noise", "linear_rewards", "seed"}},
      {"logs", {"n_events", "policy"}},
      {"train", {"dim", "temperature", "learning_rate", "epochs", "batch_size"}},
      {"cluster", {"n_clusters", "max_iters"}},
      {"graph", {"items_per_cluster", "max_item_degree"}},
      {"experiment",
       {"type", "policy", "arm_name", "explore_fraction", "arm_policies", "n_corpus_slices",
        "alpha", "top_k", "context_k", "context_tau", "renormalize_context", "cold_start",
        "r_max", "graded_rewards", "delay", "delay_sweep", "n_shards", "snapshot_every",
        "metrics_every", "impression_thresholds", "inject_step", "inject_count", "seed"}},
  };
  return s;
}

SectionMap parse_ini(const std::string& text) {
  SectionMap out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "unterminated section header");
      section = line.substr(1, line.size() - 2);
      if (!schema().count(section)) throw ParseError(lineno, "unknown section [" + section + "]");
      out.try_emplace(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    if (section.empty()) throw ParseError(lineno, "key outside any section");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "empty key");
    if (!schema().at(section).count(key)) {
      throw ParseError(lineno, "unknown key '" + key + "' in section [" + section + "]");
    }
    if (!out[section].insert({key, value}).second) {
      throw ParseError(lineno, "duplicate key '" + key + "'");
    }
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const SectionMap& sections) : sections_(sections) {}

  bool has(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    return sit != sections_.end() && sit->second.count(key);
  }

  std::string raw(const std::string& section, const std::string& key) const {
    return sections_.at(section).at(key);
  }

  template <typename T, typename Fn>
  void apply(const std::string& section, const std::string& key, T& dst, Fn parse) const {
    if (has(section, key)) dst = parse(raw(section, key));
  }

  void get_int(const std::string& s, const std::string& k, std::int64_t& dst) const {
    apply(s, k, dst, [&](const std::string& v) { return parse_scalar_int(s, k, v); });
  }
  void get_int32(const std::string& s, const std::string& k, int& dst) const {
    apply(s, k, dst,
          [&](const std::string& v) { return static_cast<int>(parse_scalar_int(s, k, v)); });
  }
  void get_u64(const std::string& s, const std::string& k, std::uint64_t& dst) const {
    apply(s, k, dst, [&](const std::string& v) {
      return static_cast<std::uint64_t>(parse_scalar_int(s, k, v));
    });
  }
  void get_double(const std::string& s, const std::string& k, double& dst) const {
    apply(s, k, dst, [&](const std::string& v) { return parse_scalar_double(s, k, v); });
  }
  void get_bool(const std::string& s, const std::string& k, bool& dst) const {
    apply(s, k, dst, [&](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "no") return false;
      throw std::invalid_argument("[" + s + "] " + k + ": expected a boolean, got '" + v + "'");
    });
  }

  std::int64_t parse_scalar_int(const std::string& s, const std::string& k,
                                const std::string& v) const {
    try {
      return parse_int(v, 0);
    } catch (const ParseError&) {
      throw std::invalid_argument("[" + s + "] " + k + ": expected an integer, got '" + v + "'");
    }
  }

  double parse_scalar_double(const std::string& s, const std::string& k,
                             const std::string& v) const {
    if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    try {
      return parse_double(v, 0);
    } catch (const ParseError&) {
      throw std::invalid_argument("[" + s + "] " + k + ": expected a number, got '" + v + "'");
    }
  }

 private:
  const SectionMap& sections_;
};

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

RunConfig RunConfig::from_string(const std::string& text) {
  const auto sections = parse_ini(text);
  const Reader r(sections);
  RunConfig cfg;

  r.get_int("world", "n_users", cfg.world.n_users);
  r.get_int("world", "n_items_initial", cfg.world.n_items_initial);
  r.get_int32("world", "latent_dim", cfg.world.latent_dim);
  r.get_int32("world", "n_components", cfg.world.n_components);
  r.get_double("world", "component_noise", cfg.world.component_noise);
  r.get_double("world", "user_blend", cfg.world.user_blend);
  r.get_double("world", "reward_scale", cfg.world.reward_scale);
  r.get_double("world", "reward_bias", cfg.world.reward_bias);
  r.get_double("world", "item_arrival_rate", cfg.world.item_arrival_rate);
  r.get_double("world", "item_max_age", cfg.world.item_max_age);
  r.get_double("world", "initial_age_spread", cfg.world.initial_age_spread);
  r.get_int("world", "horizon", cfg.world.horizon);
  r.get_int("world", "spare_items", cfg.world.spare_items);
  r.get_double("world", "observation_noise", cfg.world.observation_noise);
  r.get_bool("world", "linear_rewards", cfg.world.linear_rewards);
  r.get_u64("world", "seed", cfg.world.seed);

  r.get_int("logs", "n_events", cfg.log_events);
  if (r.has("logs", "policy")) {
    const auto v = r.raw("logs", "policy");
    if (v == "uniform") {
      cfg.log_policy = LogPolicy::Uniform;
    } else if (v == "popularity") {
      cfg.log_policy = LogPolicy::PopularityBiased;
    } else {
      throw std::invalid_argument("[logs] policy: expected uniform|popularity, got '" + v + "'");
    }
  }

  r.get_int32("train", "dim", cfg.train.dim);
  r.get_double("train", "temperature", cfg.train.temperature);
  r.get_double("train", "learning_rate", cfg.train.learning_rate);
  r.get_int32("train", "epochs", cfg.train_epochs);
  r.get_int32("train", "batch_size", cfg.train_batch_size);

  r.get_int32("cluster", "n_clusters", cfg.n_clusters);
  r.get_int32("cluster", "max_iters", cfg.cluster_max_iters);

  r.get_int32("graph", "items_per_cluster", cfg.items_per_cluster);
  if (r.has("graph", "max_item_degree")) {
    const auto v = r.parse_scalar_int("graph", "max_item_degree", r.raw("graph", "max_item_degree"));
    if (v > 0) cfg.max_item_degree = static_cast<int>(v);
  }

  if (r.has("experiment", "type")) {
    const auto v = r.raw("experiment", "type");
    if (v == "type1" || v == "fresh_discovery") {
      cfg.experiment.type = ExperimentConfig::Type::FreshDiscovery;
    } else if (v == "type2" || v == "corpus_exploration") {
      cfg.experiment.type = ExperimentConfig::Type::CorpusExploration;
    } else {
      throw std::invalid_argument("[experiment] type: expected type1|type2, got '" + v + "'");
    }
  }
  if (r.has("experiment", "policy")) cfg.experiment.policy = parse_policy(r.raw("experiment", "policy"));
  if (r.has("experiment", "arm_name")) cfg.experiment.arm_name = r.raw("experiment", "arm_name");
  r.get_double("experiment", "explore_fraction", cfg.experiment.explore_fraction);
  if (r.has("experiment", "arm_policies")) {
    cfg.experiment.arm_policies.clear();
    for (const auto& name : split_csv(r.raw("experiment", "arm_policies"))) {
      cfg.experiment.arm_policies.push_back(parse_policy(name));
    }
  }
  r.get_int32("experiment", "n_corpus_slices", cfg.experiment.n_corpus_slices);
  r.get_double("experiment", "alpha", cfg.experiment.alpha);
  r.get_int32("experiment", "top_k", cfg.experiment.top_k);
  r.get_int32("experiment", "context_k", cfg.experiment.context_k);
  r.get_double("experiment", "context_tau", cfg.experiment.context_tau);
  r.get_bool("experiment", "renormalize_context", cfg.experiment.renormalize_context);
  if (r.has("experiment", "cold_start")) {
    const auto v = r.raw("experiment", "cold_start");
    if (v == "infinite") {
      cfg.experiment.cold_start = ColdStart::Infinite;
    } else if (v == "prior") {
      cfg.experiment.cold_start = ColdStart::Prior;
    } else {
      throw std::invalid_argument("[experiment] cold_start: expected infinite|prior, got '" + v + "'");
    }
  }
  r.get_double("experiment", "r_max", cfg.experiment.r_max);
  r.get_bool("experiment", "graded_rewards", cfg.experiment.graded_rewards);
  if (r.has("experiment", "delay")) {
    cfg.experiment.delay = DelaySpec::parse(r.raw("experiment", "delay"));
  }
  if (r.has("experiment", "delay_sweep")) {
    for (const auto& tok : split_csv(r.raw("experiment", "delay_sweep"))) {
      cfg.delay_sweep.push_back(r.parse_scalar_double("experiment", "delay_sweep", tok));
    }
  }
  r.get_int32("experiment", "n_shards", cfg.experiment.n_shards);
  r.get_int("experiment", "snapshot_every", cfg.experiment.snapshot_every);
  r.get_int("experiment", "metrics_every", cfg.experiment.metrics_every);
  if (r.has("experiment", "impression_thresholds")) {
    cfg.experiment.impression_thresholds.clear();
    for (const auto& tok : split_csv(r.raw("experiment", "impression_thresholds"))) {
      cfg.experiment.impression_thresholds.push_back(
          r.parse_scalar_int("experiment", "impression_thresholds", tok));
    }
  }
  r.get_int("experiment", "inject_step", cfg.experiment.inject_step);
  r.get_int("experiment", "inject_count", cfg.experiment.inject_count);
  if (r.has("experiment", "seed")) {
    r.get_u64("experiment", "seed", cfg.experiment.seed);
  } else {
    cfg.experiment.seed = Rng::derive(cfg.world.seed, 0xe);
  }

  // Cross-field validation before any stage runs.
  if (cfg.experiment.explore_fraction < 0.0 || cfg.experiment.explore_fraction > 1.0) {
    throw std::invalid_argument("[experiment] explore_fraction must be in [0, 1]");
  }
  if (cfg.experiment.top_k < 1) throw std::invalid_argument("[experiment] top_k must be >= 1");
  if (cfg.experiment.context_k < 1) throw std::invalid_argument("[experiment] context_k must be >= 1");
  if (!(cfg.experiment.context_tau > 0.0)) {
    throw std::invalid_argument("[experiment] context_tau must be positive");
  }
  if (cfg.n_clusters < 1) throw std::invalid_argument("[cluster] n_clusters must be >= 1");
  if (cfg.items_per_cluster < 1) {
    throw std::invalid_argument("[graph] items_per_cluster must be >= 1");
  }
  if (!(cfg.train.temperature > 0.0)) {
    throw std::invalid_argument("[train] temperature must be positive");
  }
  cfg.experiment.items_per_cluster = cfg.items_per_cluster;
  cfg.experiment.max_item_degree = cfg.max_item_degree;
  cfg.train.seed = Rng::derive(cfg.world.seed, 0x7);
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

void RunConfig::override_seed(std::uint64_t seed) {
  world.seed = seed;
  train.seed = Rng::derive(seed, 0x7);
  experiment.seed = Rng::derive(seed, 0xe);
}

}  // namespace edgebandit
