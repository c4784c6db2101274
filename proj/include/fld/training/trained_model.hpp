#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fld/model/baselines.hpp"
#include "fld/model/fld_model.hpp"
#include "fld/signal/trajectory.hpp"
#include "json.hpp"

namespace fld::training {

using model::ModelKind;
using numerics::DenseArray;
using numerics::Parameter;

/// Hyperparameters of every model kind in one place. `fld` carries the
/// shared dimensions (d, c, H, N, dt) for all kinds.
struct ModelSettings {
  model::FLDConfig fld;
  double vae_beta = 1e-3;
  std::size_t ff_hidden = 512;

  nlohmann::json to_json() const;
  static ModelSettings from_json(const nlohmann::json& j);
};

/// One trained (or freshly initialised) model of any kind together with the
/// normalization its inputs expect.
class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(ModelKind kind, ModelSettings settings, std::uint64_t seed);

  ModelKind kind() const noexcept { return kind_; }
  const ModelSettings& settings() const noexcept { return settings_; }
  std::size_t window() const noexcept { return settings_.fld.window; }
  std::size_t state_dim() const noexcept { return settings_.fld.state_dim; }
  /// Lookahead needed per training item: N for fld, 0 for pae/vae, 1 for ff.
  std::size_t lookahead() const;

  signal::NormalizationStats normalization;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;

  model::FLDModel& fld() { return fld_; }
  const model::FLDModel& fld() const { return fld_; }
  model::Vae& vae() { return vae_; }
  const model::Vae& vae() const { return vae_; }
  model::FeedForward& ff() { return ff_; }
  const model::FeedForward& ff() const { return ff_; }

  std::vector<Parameter*> parameters();
  /// Every array that defines the model: parameters, batch-norm running
  /// statistics and the normalization vectors, with stable names. The
  /// normalization arrays are refreshed from `normalization` on each call.
  std::vector<std::pair<std::string, DenseArray*>> named_arrays();
  /// Copies normalization arrays written through `named_arrays` back into
  /// `normalization`.
  void commit_arrays();

  /// Prediction `steps` segments ahead from normalized segments (batch x d x
  /// H), eval mode. The VAE only reconstructs (steps == 0).
  DenseArray predict(const DenseArray& segments, long steps) const;
  bool supports_horizon(long steps) const;
  /// predict() for every horizon 0..max_horizon, sharing the encoding (FLD)
  /// or the autoregressive chain (FF). Unsupported horizons come back empty.
  std::vector<DenseArray> predict_horizons(const DenseArray& segments, std::size_t max_horizon) const;

 private:
  ModelKind kind_ = ModelKind::fld;
  ModelSettings settings_;
  model::FLDModel fld_;
  model::Vae vae_;
  model::FeedForward ff_;
  DenseArray norm_mean_;
  DenseArray norm_std_;
};

}  // namespace fld::training
