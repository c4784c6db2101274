#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "fld/training/trained_model.hpp"

namespace fld::training {

/// One iteration samples a pool of mini_batches x batch_size training items
/// and makes `epochs` shuffled passes over it, one optimizer step per
/// mini-batch.
struct TrainConfig {
  std::size_t max_iterations = 5000;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  std::size_t epochs = 5;
  std::size_t mini_batches = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Fraction of trajectories held back for validation (0 disables it).
  double validation_fraction = 0.2;
  /// Validation loss is evaluated every this many iterations (0: never).
  std::size_t validate_every = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossRecord {
  std::size_t iteration = 0;
  /// Mean over the iteration's optimizer steps.
  double total = 0.0;
  std::vector<double> per_horizon;
  /// NaN when not evaluated this iteration.
  double validation = 0.0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<LossRecord> history;
};

/// Training items: (trajectory, start) pairs whose window plus lookahead fit.
struct ItemIndex {
  std::size_t trajectory;
  std::size_t start;
};
std::vector<ItemIndex> enumerate_items(std::span<const signal::Trajectory> corpus, std::size_t window, std::size_t lookahead);

/// Gathers items into batch x d x H arrays: the current segment and
/// `lookahead` future segments.
model::HorizonBatch gather_batch(std::span<const signal::Trajectory> corpus, std::span<const ItemIndex> items,
                                 std::size_t window, std::size_t lookahead);

using ProgressFn = std::function<void(const LossRecord&)>;

/// Fits normalization on the training split, normalizes, and trains.
/// Deterministic for a given seed. Throws ConfigError when no trajectory is
/// long enough and NumericError (naming the iteration) on divergence.
TrainResult train(ModelKind kind, std::span<const signal::Trajectory> corpus, const TrainConfig& config,
                  const ModelSettings& settings, const ProgressFn& progress = {});

/// iteration,total,L_0..L_N,validation
void write_loss_history(std::ostream& out, const std::vector<LossRecord>& history);
void write_loss_history(const std::filesystem::path& path, const std::vector<LossRecord>& history);

}  // namespace fld::training
