#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fld/numerics/layers.hpp"

namespace fld::model {

using numerics::Activation;
using numerics::DenseArray;
using numerics::LinearLayer;
using numerics::Parameter;

enum class ModelKind { fld, pae, vae, ff, original };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Values needed to represent a trajectory of `traj_len` frames:
/// original d|tau|, VAE c(|tau|-H+1), PAE 4c(|tau|-H+1), FLD 4c.
/// FF is not a representation and is rejected.
std::size_t representation_param_count(ModelKind kind, std::size_t d, std::size_t c, std::size_t H, std::size_t traj_len);

/// Fully connected stack: sizes = {in, hidden..., out}; `hidden` after every
/// layer but the last, `output` after the last.
class Mlp {
 public:
  struct Cache {
    std::vector<DenseArray> inputs;
    std::vector<DenseArray> pre_activations;
  };

  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden, Activation output,
      std::mt19937_64& rng);

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }

  /// `x` is batch x in (or a vector of length in).
  DenseArray forward(const DenseArray& x) const;
  DenseArray forward(const DenseArray& x, Cache& cache) const;
  /// Accumulates parameter gradients, returns dL/dx.
  DenseArray backward(const Cache& cache, const DenseArray& grad_output);

  void collect(std::vector<Parameter*>& out);
  std::vector<Parameter*> parameters();

 private:
  std::vector<LinearLayer> layers_;
  Activation hidden_ = Activation::elu;
  Activation output_ = Activation::none;
};

/// Flattens batch x d x H (or d x H) into batch x (d H).
DenseArray flatten_segments(const DenseArray& segments);

/// KL(N(mu, sigma^2) || N(0, 1)) for one latent dimension.
double gaussian_kl(double mu, double sigma);

struct VaeConfig {
  std::size_t state_dim = 27;
  std::size_t window = 51;
  std::size_t latent = 8;
  double beta = 1e-3;
};

struct VaeOutput {
  DenseArray reconstruction;  // batch x d x H
  DenseArray mean;            // batch x latent
  DenseArray std;
};

struct VaeLoss {
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
};

/// MLP VAE over flattened segments: encoder 512/256/128 ReLU with linear mean
/// and softplus std heads, decoder 128/256/512 ReLU with a linear output.
class Vae {
 public:
  Vae() = default;
  Vae(VaeConfig config, std::uint64_t seed);

  const VaeConfig& config() const noexcept { return config_; }
  std::vector<Parameter*> parameters();

  /// Eval: decodes the mean.
  VaeOutput forward(const DenseArray& segments) const;
  /// Training objective MSE + beta * KL (KL summed over latent dims, averaged
  /// over the batch), with a reparameterized sample drawn from `rng`.
  VaeLoss loss(const DenseArray& segments, std::mt19937_64& rng, bool backward);

 private:
  VaeConfig config_;
  Mlp encoder_;
  LinearLayer mean_head_;
  LinearLayer std_head_;
  Mlp decoder_;
};

struct FeedForwardConfig {
  std::size_t state_dim = 27;
  std::size_t window = 51;
  std::size_t hidden = 512;
};

/// One-step segment predictor, MLP 512/512 ELU on the flattened segment.
/// Longer horizons compose it with itself.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(FeedForwardConfig config, std::uint64_t seed);

  const FeedForwardConfig& config() const noexcept { return config_; }
  std::vector<Parameter*> parameters();

  /// batch x d x H -> same shape, `steps` applications (0 returns the input).
  DenseArray predict(const DenseArray& segments, long steps) const;
  /// MSE between predict(current, 1) and next.
  double loss(const DenseArray& current, const DenseArray& next, bool backward);

 private:
  FeedForwardConfig config_;
  Mlp net_;
};

}  // namespace fld::model
