#include <doctest.h>

#include <cmath>
#include <sstream>

#include "edgebandit/world.hpp"

using namespace edgebandit;

namespace {

WorldSpec small_spec() {
  WorldSpec s;
  s.n_users = 60;
  s.n_items_initial = 40;
  s.latent_dim = 8;
  s.n_components = 4;
  s.horizon = 100;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_CASE("worlds are deterministic per seed") {
  const World a(small_spec());
  const World b(small_spec());
  for (UserId u = 0; u < a.n_users(); ++u) CHECK(a.user_latent(u) == b.user_latent(u));
  for (ItemId j = 0; j < a.total_items(); ++j) CHECK(a.item_latent(j) == b.item_latent(j));
  auto spec2 = small_spec();
  spec2.seed = 6;
  const World c(spec2);
  CHECK(a.user_latent(0) != c.user_latent(0));
}

TEST_CASE("one-dimensional latents collapse to plus or minus one") {
  auto spec = small_spec();
  spec.latent_dim = 1;
  spec.n_components = 2;
  const World w(spec);
  for (UserId u = 0; u < w.n_users(); ++u) {
    CHECK(std::abs(std::abs(w.user_latent(u)[0]) - 1.0) < 1e-12);
  }
  for (ItemId j = 0; j < w.total_items(); ++j) {
    CHECK(std::abs(std::abs(w.item_latent(j)[0]) - 1.0) < 1e-12);
  }
}

TEST_CASE("latents are unit norm and mixture components separate") {
  const World w(small_spec());
  double within = 0.0, cross = 0.0;
  std::int64_t n_within = 0, n_cross = 0;
  for (UserId u = 0; u < w.n_users(); ++u) {
    CHECK(std::abs(l2_norm(w.user_latent(u)) - 1.0) < 1e-9);
    for (ItemId j = 0; j < w.spec().n_items_initial; ++j) {
      const double d = dot(w.user_latent(u), w.item_latent(j));
      if (w.user_component(u) == w.item_component(j)) {
        within += d;
        ++n_within;
      } else {
        cross += d;
        ++n_cross;
      }
    }
  }
  CHECK(within / static_cast<double>(n_within) > cross / static_cast<double>(n_cross));
}

TEST_CASE("flat world gives the bias probability everywhere") {
  auto spec = small_spec();
  spec.reward_scale = 0.0;
  spec.reward_bias = -1.2;
  const World w(spec);
  const double expected = 1.0 / (1.0 + std::exp(1.2));
  for (int i = 0; i < 20; ++i) {
    CHECK(w.true_reward_prob(i % w.n_users(), i % w.spec().n_items_initial) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("aligned pair at scale 4 bias -2 gives sigmoid(2)") {
  // Verified by direct evaluation: p = 1 / (1 + exp(-(4*1 - 2))).
  auto spec = small_spec();
  spec.component_noise = 0.0;
  spec.user_blend = 0.0;
  spec.n_components = 1;  // everyone shares one direction: <u, v> = 1
  const World w(spec);
  const double p = w.true_reward_prob(0, 0);
  CHECK(p == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(p == doctest::Approx(0.8808).epsilon(1e-4));
}

TEST_CASE("empirical reward mean matches the oracle probability") {
  const World w(small_spec());
  Rng rng(9);
  const double p = w.true_reward_prob(3, 7);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += w.draw_reward(3, 7, rng);
  const double sigma = std::sqrt(p * (1.0 - p) / n);
  CHECK(std::abs(sum / n - p) <= 3.0 * sigma);
}

TEST_CASE("arrival schedule follows the rate") {
  auto spec = small_spec();
  spec.item_arrival_rate = 0.5;
  spec.horizon = 40;
  const World w(spec);
  CHECK(w.n_scheduled_items() == spec.n_items_initial + 20);
  std::int64_t total = 0;
  for (std::int64_t t = 0; t < spec.horizon; ++t) {
    const auto arr = w.arrivals_at(t);
    total += static_cast<std::int64_t>(arr.size());
    for (ItemId j : arr) CHECK(w.scheduled_upload_time(j) == static_cast<double>(t));
  }
  CHECK(total == 20);
  for (ItemId j = 0; j < spec.n_items_initial; ++j) {
    CHECK(w.scheduled_upload_time(j) == 0.0);
  }
}

TEST_CASE("spare items exist but are never scheduled") {
  auto spec = small_spec();
  spec.spare_items = 7;
  const World w(spec);
  CHECK(w.total_items() == spec.n_items_initial + 7);
  for (ItemId j = spec.n_items_initial; j < w.total_items(); ++j) {
    CHECK(std::isinf(w.scheduled_upload_time(j)));
  }
}

TEST_CASE("observed embeddings are noisy, unit norm, and deterministic") {
  const World w(small_spec());
  const auto a = w.observed_item_embedding(3);
  CHECK(a == w.observed_item_embedding(3));
  CHECK(std::abs(l2_norm(a) - 1.0) < 1e-9);
  CHECK(a != w.item_latent(3));
  CHECK(dot(a, w.item_latent(3)) > 0.5);  // close to the truth
}

TEST_CASE("world files round-trip") {
  auto spec = small_spec();
  spec.item_arrival_rate = 0.25;
  spec.spare_items = 3;
  const World w(spec);
  std::ostringstream out;
  w.save(out);
  std::istringstream in(out.str());
  const World back = World::load(in);
  CHECK(back.spec().n_users == spec.n_users);
  CHECK(back.spec().seed == spec.seed);
  for (UserId u = 0; u < w.n_users(); ++u) CHECK(back.user_latent(u) == w.user_latent(u));
  for (ItemId j = 0; j < w.total_items(); ++j) {
    CHECK(back.item_latent(j) == w.item_latent(j));
    const bool same_time =
        back.scheduled_upload_time(j) == w.scheduled_upload_time(j) ||
        (std::isinf(back.scheduled_upload_time(j)) && std::isinf(w.scheduled_upload_time(j)));
    CHECK(same_time);
  }
  std::ostringstream again;
  back.save(again);
  CHECK(again.str() == out.str());
}

TEST_CASE("uniform logging hits at roughly the mean probability") {
  const World w(small_spec());
  double mean_p = 0.0;
  for (UserId u = 0; u < w.n_users(); ++u) {
    for (ItemId j = 0; j < w.spec().n_items_initial; ++j) mean_p += w.true_reward_prob(u, j);
  }
  mean_p /= static_cast<double>(w.n_users() * w.spec().n_items_initial);

  const auto res = generate_logs(w, LogPolicy::Uniform, 4000, 17);
  CHECK(res.positives == 4000);
  CHECK(res.log.records.size() == 4000);
  const double hit_rate = static_cast<double>(res.positives) / static_cast<double>(res.attempts);
  const double sigma = std::sqrt(mean_p * (1.0 - mean_p) / static_cast<double>(res.attempts));
  CHECK(std::abs(hit_rate - mean_p) <= 4.0 * sigma);

  // Timestamps are non-decreasing and ids in range.
  double prev = -1.0;
  for (const auto& r : res.log.records) {
    CHECK(r.time >= prev);
    prev = r.time;
    CHECK(r.user < w.n_users());
    CHECK(r.item < w.spec().n_items_initial);
  }
}

TEST_CASE("zero events give an empty log") {
  const World w(small_spec());
  const auto res = generate_logs(w, LogPolicy::Uniform, 0, 1);
  CHECK(res.log.records.empty());
  CHECK(res.attempts == 0);
}

TEST_CASE("popularity bias raises the logged items' mean quality") {
  const World w(small_spec());
  auto mean_quality = [&](const InteractionLog& log) {
    double s = 0.0;
    for (const auto& r : log.records) s += w.true_reward_prob(r.user, r.item);
    return s / static_cast<double>(log.records.size());
  };
  const auto uniform = generate_logs(w, LogPolicy::Uniform, 2000, 21);
  const auto biased = generate_logs(w, LogPolicy::PopularityBiased, 2000, 21);
  CHECK(mean_quality(biased.log) > mean_quality(uniform.log));
  // Popularity sampling reaches the target in fewer attempts.
  CHECK(biased.attempts < uniform.attempts);
}

TEST_CASE("planted linear rewards are linear in the true context") {
  auto spec = small_spec();
  spec.linear_rewards = true;
  World w(spec);
  CHECK_THROWS_AS(w.true_reward_prob(0, 0), std::logic_error);
  Centroids cents;
  Rng rng(3);
  for (int c = 0; c < 6; ++c) {
    std::vector<double> v(8);
    for (double& x : v) x = rng.normal();
    normalize(v);
    cents.vectors.push_back(v);
  }
  w.plant_linear_model(cents, 3, 0.2);
  for (int i = 0; i < 10; ++i) {
    const double p = w.true_reward_prob(i, i);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}
