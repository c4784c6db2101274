#include "fld/model/baselines.hpp"

#include <cmath>

#include "fld/common/error.hpp"

namespace fld::model {

using numerics::activate;
using numerics::activate_backward;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::fld: return "fld";
    case ModelKind::pae: return "pae";
    case ModelKind::vae: return "vae";
    case ModelKind::ff: return "ff";
    case ModelKind::original: return "original";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "fld") return ModelKind::fld;
  if (name == "pae") return ModelKind::pae;
  if (name == "vae") return ModelKind::vae;
  if (name == "ff") return ModelKind::ff;
  if (name == "original") return ModelKind::original;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected fld, pae, vae, ff)");
}

std::size_t representation_param_count(ModelKind kind, std::size_t d, std::size_t c, std::size_t H, std::size_t traj_len) {
  if (traj_len < H) throw ConfigError("representation_param_count: trajectory shorter than the window");
  const std::size_t windows = traj_len - H + 1;
  switch (kind) {
    case ModelKind::original: return d * traj_len;
    case ModelKind::vae: return c * windows;
    case ModelKind::pae: return 4 * c * windows;
    case ModelKind::fld: return 4 * c;
    case ModelKind::ff: break;
  }
  throw ConfigError("representation_param_count: the feed-forward predictor has no latent representation");
}

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden, Activation output,
         std::mt19937_64& rng)
    : hidden_(hidden), output_(output) {
  if (sizes.size() < 2) throw ConfigError("Mlp: need at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    layers_.emplace_back(name + "." + std::to_string(l), sizes[l], sizes[l + 1], rng);
  }
}

DenseArray Mlp::forward(const DenseArray& x) const {
  DenseArray h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = activate(layers_[l].forward(h), l + 1 == layers_.size() ? output_ : hidden_);
  }
  return h;
}

DenseArray Mlp::forward(const DenseArray& x, Cache& cache) const {
  cache.inputs.clear();
  cache.pre_activations.clear();
  DenseArray h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs.push_back(h);
    DenseArray pre = layers_[l].forward(h);
    h = activate(pre, l + 1 == layers_.size() ? output_ : hidden_);
    cache.pre_activations.push_back(std::move(pre));
  }
  return h;
}

DenseArray Mlp::backward(const Cache& cache, const DenseArray& grad_output) {
  DenseArray g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    g = activate_backward(cache.pre_activations[l], g, l + 1 == layers_.size() ? output_ : hidden_);
    g = layers_[l].backward(cache.inputs[l], g);
  }
  return g;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (LinearLayer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  collect(out);
  return out;
}

DenseArray flatten_segments(const DenseArray& segments) {
  if (segments.rank() == 2) return segments.reshaped({1, segments.size()});
  if (segments.rank() == 3) return segments.reshaped({segments.dim(0), segments.dim(1) * segments.dim(2)});
  throw ShapeError("flatten_segments: expected d x H or batch x d x H");
}

double gaussian_kl(double mu, double sigma) {
  return 0.5 * (mu * mu + sigma * sigma - 1.0) - std::log(sigma);
}

// ---------------------------------------------------------------------------
// VAE
// ---------------------------------------------------------------------------

Vae::Vae(VaeConfig config, std::uint64_t seed) : config_(config) {
  if (config_.latent < 1 || config_.state_dim < 1 || config_.window < 1) throw ConfigError("Vae: sizes must be positive");
  if (config_.beta < 0.0) throw ConfigError("Vae: beta must be >= 0");
  std::mt19937_64 rng(seed);
  const std::size_t n = config_.state_dim * config_.window;
  encoder_ = Mlp("vae.encoder", {n, 512, 256, 128}, Activation::relu, Activation::relu, rng);
  mean_head_ = LinearLayer("vae.mean", 128, config_.latent, rng);
  std_head_ = LinearLayer("vae.std", 128, config_.latent, rng);
  decoder_ = Mlp("vae.decoder", {config_.latent, 128, 256, 512, n}, Activation::relu, Activation::none, rng);
}

std::vector<Parameter*> Vae::parameters() {
  std::vector<Parameter*> out;
  encoder_.collect(out);
  out.push_back(&mean_head_.weight);
  out.push_back(&mean_head_.bias);
  out.push_back(&std_head_.weight);
  out.push_back(&std_head_.bias);
  decoder_.collect(out);
  return out;
}

VaeOutput Vae::forward(const DenseArray& segments) const {
  const DenseArray x = flatten_segments(segments);
  const DenseArray h = encoder_.forward(x);
  VaeOutput out;
  out.mean = mean_head_.forward(h);
  out.std = activate(std_head_.forward(h), Activation::softplus);
  out.reconstruction = decoder_.forward(out.mean).reshaped({x.dim(0), config_.state_dim, config_.window});
  return out;
}

VaeLoss Vae::loss(const DenseArray& segments, std::mt19937_64& rng, bool backward) {
  const DenseArray x = flatten_segments(segments);
  const std::size_t B = x.dim(0), c = config_.latent, n = x.dim(1);
  Mlp::Cache enc_cache, dec_cache;
  const DenseArray h = encoder_.forward(x, enc_cache);
  const DenseArray mu = mean_head_.forward(h);
  const DenseArray std_pre = std_head_.forward(h);
  const DenseArray sigma = activate(std_pre, Activation::softplus);
  DenseArray eps({B, c});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& e : eps.storage()) e = normal(rng);
  DenseArray z({B, c});
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = mu[k] + sigma[k] * eps[k];
  const DenseArray y = decoder_.forward(z, dec_cache);

  VaeLoss out;
  for (std::size_t k = 0; k < y.size(); ++k) out.mse += (y[k] - x[k]) * (y[k] - x[k]);
  out.mse /= static_cast<double>(B * n);
  for (std::size_t k = 0; k < mu.size(); ++k) out.kl += gaussian_kl(mu[k], sigma[k]);
  out.kl /= static_cast<double>(B);
  out.total = out.mse + config_.beta * out.kl;
  if (!std::isfinite(out.total)) throw NumericError("Vae::loss: non-finite loss");
  if (!backward) return out;

  DenseArray dy(y.shape());
  for (std::size_t k = 0; k < y.size(); ++k) dy[k] = 2.0 * (y[k] - x[k]) / static_cast<double>(B * n);
  const DenseArray dz = decoder_.backward(dec_cache, dy);
  DenseArray dmu({B, c}), dsigma({B, c});
  const double kb = config_.beta / static_cast<double>(B);
  for (std::size_t k = 0; k < dz.size(); ++k) {
    dmu[k] = dz[k] + kb * mu[k];
    dsigma[k] = dz[k] * eps[k] + kb * (sigma[k] - 1.0 / sigma[k]);
  }
  const DenseArray dstd_pre = activate_backward(std_pre, dsigma, Activation::softplus);
  DenseArray dh = mean_head_.backward(h, dmu);
  dh += std_head_.backward(h, dstd_pre);
  encoder_.backward(enc_cache, dh);
  return out;
}

// ---------------------------------------------------------------------------
// feed-forward
// ---------------------------------------------------------------------------

FeedForward::FeedForward(FeedForwardConfig config, std::uint64_t seed) : config_(config) {
  if (config_.state_dim < 1 || config_.window < 1 || config_.hidden < 1) throw ConfigError("FeedForward: sizes must be positive");
  std::mt19937_64 rng(seed);
  const std::size_t n = config_.state_dim * config_.window;
  net_ = Mlp("ff", {n, config_.hidden, config_.hidden, n}, Activation::elu, Activation::none, rng);
}

std::vector<Parameter*> FeedForward::parameters() { return net_.parameters(); }

DenseArray FeedForward::predict(const DenseArray& segments, long steps) const {
  if (steps < 0) throw ConfigError("FeedForward::predict: steps must be >= 0");
  DenseArray x = flatten_segments(segments);
  for (long s = 0; s < steps; ++s) x = net_.forward(x);
  return x.reshaped({x.dim(0), config_.state_dim, config_.window});
}

double FeedForward::loss(const DenseArray& current, const DenseArray& next, bool backward) {
  const DenseArray x = flatten_segments(current);
  const DenseArray t = flatten_segments(next);
  if (!x.same_shape(t)) throw ShapeError("FeedForward::loss: input and target shapes differ");
  Mlp::Cache cache;
  const DenseArray y = net_.forward(x, cache);
  double mse = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) mse += (y[k] - t[k]) * (y[k] - t[k]);
  mse /= static_cast<double>(y.size());
  if (!std::isfinite(mse)) throw NumericError("FeedForward::loss: non-finite loss");
  if (backward) {
    DenseArray dy(y.shape());
    for (std::size_t k = 0; k < y.size(); ++k) dy[k] = 2.0 * (y[k] - t[k]) / static_cast<double>(y.size());
    net_.backward(cache, dy);
  }
  return mse;
}

}  // namespace fld::model
