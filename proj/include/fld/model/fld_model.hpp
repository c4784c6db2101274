#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fld/model/latent.hpp"
#include "fld/numerics/layers.hpp"
#include "fld/signal/trajectory.hpp"
#include "json.hpp"

namespace fld::model {

using numerics::Activation;
using numerics::BatchNormCache;
using numerics::BatchNormLayer;
using numerics::Conv1dLayer;
using numerics::NormMode;
using numerics::Parameter;

struct FLDConfig {
  std::size_t state_dim = 27;
  std::size_t channels = 8;
  std::size_t window = 51;
  std::size_t horizon = 50;
  double alpha = 1.0;
  double dt = 0.02;
  std::size_t hidden_channels = 64;
  /// Conv kernel; 0 means the window length (rounded up to odd).
  std::size_t kernel_size = 0;
  /// Adds BN + ELU after the last decoder conv.
  bool final_activation = false;

  std::size_t kernel() const;
  void validate() const;

  nlohmann::json to_json() const;
  static FLDConfig from_json(const nlohmann::json& j);
};

/// conv -> [BN] -> [activation]
struct ConvBlock {
  Conv1dLayer conv;
  BatchNormLayer bn;
  bool normalized = true;
  Activation act = Activation::elu;

  struct Cache {
    DenseArray input;
    BatchNormCache bn;
    DenseArray pre_activation;
  };

  ConvBlock() = default;
  ConvBlock(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, bool norm, Activation a,
            std::mt19937_64& rng);

  DenseArray forward(const DenseArray& x, NormMode mode, Cache* cache, bool update_running);
  DenseArray infer(const DenseArray& x, NormMode mode) const;
  DenseArray backward(const Cache& cache, const DenseArray& grad_output);
  void collect(std::vector<Parameter*>& out);
};

/// Encoder output for a batch: latent curves and their parameterization,
/// each of phi/f/a/b shaped batch x c.
struct Encoding {
  DenseArray z;
  DenseArray phi;
  DenseArray f;
  DenseArray a;
  DenseArray b;

  std::size_t batch() const { return phi.dim(0); }
  LatentState state(std::size_t item) const;
  LatentParameterization theta(std::size_t item) const;
};

/// Normalized segments for the horizon-N objective: `current` and each of
/// `futures[i-1]` are batch x d x H.
struct HorizonBatch {
  DenseArray current;
  std::vector<DenseArray> futures;
};

struct LossOptions {
  NormMode mode = NormMode::train;
  bool backward = false;
  bool update_running = true;
};

struct LossResult {
  double total = 0.0;
  std::vector<double> per_horizon;
};

/// Weighted objective sum_i alpha^i L_i.
double weighted_loss(std::span<const double> per_horizon, double alpha);

/// Convolutional periodic autoencoder whose latent curves are propagated
/// forward in phase. With horizon 0 it is the plain periodic autoencoder.
class FLDModel {
 public:
  FLDModel() = default;
  FLDModel(FLDConfig config, std::uint64_t seed);

  const FLDConfig& config() const noexcept { return config_; }
  /// Stats the model's inputs were normalized with (identity until set).
  signal::NormalizationStats normalization;

  std::vector<Parameter*> parameters();
  std::vector<BatchNormLayer*> batchnorm_layers();
  std::vector<const BatchNormLayer*> batchnorm_layers() const;
  std::size_t parameter_count() const;

  /// Inference paths. Inputs are d x H or batch x d x H, normalized. Train
  /// mode uses batch statistics without touching the running estimates.
  DenseArray encode(const DenseArray& segments, NormMode mode = NormMode::eval) const;
  Encoding parameterize(const DenseArray& z, NormMode mode = NormMode::eval) const;
  Encoding encode_parameters(const DenseArray& segments, NormMode mode = NormMode::eval) const;
  /// batch x c x H latent curves with phi advanced by `steps` frames.
  DenseArray reconstruct(const Encoding& enc, long steps = 0) const;
  DenseArray decode(const DenseArray& latent, NormMode mode = NormMode::eval) const;
  /// encode -> parameterize -> advance -> reconstruct -> decode. steps >= 0.
  DenseArray predict(const DenseArray& segments, long steps, NormMode mode = NormMode::eval) const;
  /// d x H segment for a single state (eval mode).
  DenseArray decode_state(const LatentState& state, const LatentParameterization& theta) const;

  /// Horizon-N objective. Decodes all N+1 horizons as one batch so that the
  /// batch statistics are shared. With `backward` set, gradients accumulate
  /// into the parameters (callers zero them).
  LossResult loss(const HorizonBatch& batch, std::size_t horizon, double alpha, const LossOptions& options);
  /// The same objective in eval mode, without gradients or running-stat
  /// updates.
  LossResult eval_loss(const HorizonBatch& batch, std::size_t horizon, double alpha) const;

  const std::vector<double>& time_grid() const noexcept { return grid_; }
  const RealDft& dft() const noexcept { return dft_; }

 private:
  DenseArray phase_logits(const DenseArray& z) const;
  DenseArray normalize_input(const DenseArray& segments) const;
  void fill_spectral(Encoding& enc) const;

  FLDConfig config_;
  std::vector<ConvBlock> encoder_;
  Parameter phase_weight_;  // c x 2 x H
  Parameter phase_bias_;    // c x 2
  BatchNormLayer phase_bn_;  // 2c features
  std::vector<ConvBlock> decoder_;
  RealDft dft_{2};
  std::vector<double> grid_;
};

}  // namespace fld::model
