#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "edgebandit/clustering.hpp"
#include "edgebandit/graph.hpp"
#include "edgebandit/rng.hpp"
#include "edgebandit/two_tower.hpp"

namespace edgebandit {

using UserId = std::int64_t;

struct WorldSpec {
  std::int64_t n_users = 500;
  std::int64_t n_items_initial = 200;
  int latent_dim = 16;
  int n_components = 8;          // latent mixture directions
  double component_noise = 0.25;
  double user_blend = 0.5;       // chance a user mixes two components
  double reward_scale = 4.0;     // logit gain on the latent dot product
  double reward_bias = -2.0;     // logit offset
  double item_arrival_rate = 0.0;  // new items per step
  double item_max_age = std::numeric_limits<double>::infinity();  // steps
  // Spread initial upload times over [-spread, 0] so the starting corpus
  // graduates gradually instead of expiring in one step.
  double initial_age_spread = 0.0;
  std::int64_t horizon = 2000;
  std::int64_t spare_items = 0;  // extra pool for mid-run batch injection
  double observation_noise = 0.25;  // noise on policy-visible embeddings of arrivals
  bool linear_rewards = false;   // planted sparse linear model instead of sigmoid
  std::uint64_t seed = 1;
};

// Hidden ground truth: unit-norm user/item latents from a noisy mixture of
// directions, plus the arrival schedule. Policies never see the latents; only
// the reward oracle and the metrics read them.
class World {
 public:
  explicit World(const WorldSpec& spec);

  const WorldSpec& spec() const { return spec_; }
  std::int64_t n_users() const { return spec_.n_users; }
  std::int64_t total_items() const { return static_cast<std::int64_t>(item_latents_.size()); }
  std::int64_t n_scheduled_items() const;  // initial + rate-driven arrivals

  const std::vector<double>& user_latent(UserId u) const;
  const std::vector<double>& item_latent(ItemId j) const;
  int user_component(UserId u) const { return user_component_.at(static_cast<std::size_t>(u)); }
  int item_component(ItemId j) const { return item_component_.at(static_cast<std::size_t>(j)); }

  // Scheduled upload time: 0 for the initial corpus, the arrival step for
  // rate-driven arrivals, +inf for spare (injection-only) items.
  double scheduled_upload_time(ItemId j) const;
  std::vector<ItemId> arrivals_at(std::int64_t step) const;

  double true_reward_prob(UserId u, ItemId j) const;
  // Bernoulli draw from true_reward_prob.
  double draw_reward(UserId u, ItemId j, Rng& rng) const;

  // What the online pipeline is allowed to see for a streamed-in item: the
  // latent blurred by observation noise, renormalized. Deterministic per item.
  std::vector<double> observed_item_embedding(ItemId j) const;

  void save(std::ostream& out) const;
  void save_file(const std::filesystem::path& path) const;
  static World load(std::istream& in);
  static World load_file(const std::filesystem::path& path);

  // Installs the planted linear reward model; required before reward queries
  // when spec.linear_rewards is set. theta has one sparse row per item over
  // the given centroids; the expected reward is <w*_u, theta*_j> with w*_u
  // the softmax context of the true user latent.
  void plant_linear_model(const Centroids& centroids, int context_k, double context_tau);

 private:
  World() = default;
  void check_item(ItemId j) const;

  WorldSpec spec_;
  std::vector<std::vector<double>> user_latents_;
  std::vector<std::vector<double>> item_latents_;
  std::vector<int> user_component_;
  std::vector<int> item_component_;
  std::vector<double> upload_times_;

  // planted linear model state
  bool linear_ready_ = false;
  std::vector<SparseContext> linear_user_contexts_;
  std::vector<std::vector<std::pair<ClusterId, double>>> linear_theta_;
};

enum class LogPolicy { Uniform, PopularityBiased };

struct LogGenResult {
  InteractionLog log;
  std::uint64_t attempts = 0;
  std::uint64_t positives = 0;
};

// Simulates a baseline logging policy over the initial corpus and records the
// positive interactions only. Timestamps are the attempt indices.
LogGenResult generate_logs(const World& world, LogPolicy policy, std::int64_t n_events,
                           std::uint64_t seed);

}  // namespace edgebandit
