#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "edgebandit/io.hpp"
#include "edgebandit/rng.hpp"

namespace edgebandit {

struct Interaction {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double time = 0.0;
};

struct InteractionLog {
  std::vector<Interaction> records;
};

// Line format: user_id<TAB>item_id<TAB>timestamp.
void write_interactions(std::ostream& out, const InteractionLog& log);
void write_interactions_file(const std::filesystem::path& path, const InteractionLog& log);
// Validates id bounds (when n_users / n_items >= 0) and that timestamps are
// non-decreasing within the file.
InteractionLog read_interactions(std::istream& in, std::int64_t n_users = -1,
                                 std::int64_t n_items = -1);
InteractionLog read_interactions_file(const std::filesystem::path& path,
                                      std::int64_t n_users = -1, std::int64_t n_items = -1);

struct TwoTowerConfig {
  int dim = 16;
  double temperature = 0.05;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
};

// Id-lookup two-tower model trained with the in-batch sampled-softmax loss.
// Rows are stored unnormalized; normalization happens inside the forward pass
// (and is differentiated through), so encode() outputs always have unit norm.
class TwoTowerModel {
 public:
  TwoTowerModel(std::int64_t n_users, std::int64_t n_items, TwoTowerConfig cfg);
  // Restores a model from exported (normalized) tables.
  TwoTowerModel(IdTable user_table, IdTable item_table, TwoTowerConfig cfg);

  std::int64_t n_users() const { return n_users_; }
  std::int64_t n_items() const { return n_items_; }
  int dim() const { return cfg_.dim; }
  const TwoTowerConfig& config() const { return cfg_; }

  double batch_softmax_loss(const std::vector<std::pair<std::int64_t, std::int64_t>>& batch) const;

  // One SGD step on the batch loss; returns the pre-step loss.
  double train_step(const std::vector<std::pair<std::int64_t, std::int64_t>>& batch);

  // Epoch-based training over the log; batches are drawn by seeded shuffle.
  // Returns the mean per-batch loss of the final epoch.
  double fit(const InteractionLog& log, int epochs, int batch_size);

  std::vector<double> encode_user(std::int64_t user) const;
  std::vector<double> encode_item(std::int64_t item) const;

  // Fraction of held-out pairs whose item lands in the user's top-k by dot
  // product over the full item table.
  double evaluate_recall(const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs,
                         int k) const;

  // Normalized tables in the exported file layout.
  IdTable user_table() const;
  IdTable item_table() const;

  // Raw (unnormalized) storage, exposed for gradient checks.
  std::vector<double>& raw_user_row(std::int64_t user);
  std::vector<double>& raw_item_row(std::int64_t item);

 private:
  void check_batch(const std::vector<std::pair<std::int64_t, std::int64_t>>& batch) const;

  std::int64_t n_users_;
  std::int64_t n_items_;
  TwoTowerConfig cfg_;
  std::vector<std::vector<double>> users_;
  std::vector<std::vector<double>> items_;
  Rng rng_;
};

// Softmax with log-sum-exp stabilization; exposed for reuse and for direct
// property tests (shift invariance, temperature sharpening).
std::vector<double> softmax(const std::vector<double>& logits, double temperature);

}  // namespace edgebandit
