#include "fld/model/fld_model.hpp"

#include <cmath>

#include "fld/common/error.hpp"

namespace fld::model {

using numerics::activate;
using numerics::activate_backward;
using numerics::Shape;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

std::size_t FLDConfig::kernel() const {
  if (kernel_size != 0) return kernel_size;
  return window % 2 == 1 ? window : window + 1;
}

void FLDConfig::validate() const {
  if (state_dim < 1) throw ConfigError("FLDConfig: state_dim must be >= 1");
  if (channels < 1) throw ConfigError("FLDConfig: channels must be >= 1");
  if (window < 2) throw ConfigError("FLDConfig: window must be >= 2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("FLDConfig: alpha must be in (0, 1]");
  if (!(dt > 0.0)) throw ConfigError("FLDConfig: dt must be positive");
  if (hidden_channels < 1) throw ConfigError("FLDConfig: hidden_channels must be >= 1");
  if (kernel() % 2 == 0) throw ConfigError("FLDConfig: kernel_size must be odd");
}

nlohmann::json FLDConfig::to_json() const {
  return {{"state_dim", state_dim},     {"channels", channels},
          {"window", window},           {"horizon", horizon},
          {"alpha", alpha},             {"dt", dt},
          {"hidden_channels", hidden_channels}, {"kernel_size", kernel_size},
          {"final_activation", final_activation}};
}

FLDConfig FLDConfig::from_json(const nlohmann::json& j) {
  FLDConfig c;
  c.state_dim = j.value("state_dim", c.state_dim);
  c.channels = j.value("channels", c.channels);
  c.window = j.value("window", c.window);
  c.horizon = j.value("horizon", c.horizon);
  c.alpha = j.value("alpha", c.alpha);
  c.dt = j.value("dt", c.dt);
  c.hidden_channels = j.value("hidden_channels", c.hidden_channels);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.final_activation = j.value("final_activation", c.final_activation);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// conv block
// ---------------------------------------------------------------------------

ConvBlock::ConvBlock(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, bool norm,
                     Activation a, std::mt19937_64& rng)
    : conv(name + ".conv", in, out, kernel, rng), bn(name + ".bn", out), normalized(norm), act(a) {}

DenseArray ConvBlock::forward(const DenseArray& x, NormMode mode, Cache* cache, bool update_running) {
  DenseArray y = conv.forward(x);
  if (cache) cache->input = x;
  if (normalized) y = bn.forward(y, mode, cache ? &cache->bn : nullptr, update_running);
  if (act == Activation::none) return y;
  DenseArray out = activate(y, act);
  if (cache) cache->pre_activation = std::move(y);
  return out;
}

DenseArray ConvBlock::infer(const DenseArray& x, NormMode mode) const {
  DenseArray y = conv.forward(x);
  if (normalized) y = bn.infer(y, mode);
  return act == Activation::none ? y : activate(y, act);
}

DenseArray ConvBlock::backward(const Cache& cache, const DenseArray& grad_output) {
  DenseArray g = act == Activation::none ? grad_output : activate_backward(cache.pre_activation, grad_output, act);
  if (normalized) g = bn.backward(cache.bn, g);
  return conv.backward(cache.input, g);
}

void ConvBlock::collect(std::vector<Parameter*>& out) {
  out.push_back(&conv.weight);
  out.push_back(&conv.bias);
  if (normalized) {
    out.push_back(&bn.gamma);
    out.push_back(&bn.beta);
  }
}

// ---------------------------------------------------------------------------
// encoding helpers
// ---------------------------------------------------------------------------

LatentState Encoding::state(std::size_t item) const {
  const auto r = phi.row(item);
  return {{r.begin(), r.end()}};
}

LatentParameterization Encoding::theta(std::size_t item) const {
  const auto rf = f.row(item), ra = a.row(item), rb = b.row(item);
  return {{rf.begin(), rf.end()}, {ra.begin(), ra.end()}, {rb.begin(), rb.end()}};
}

double weighted_loss(std::span<const double> per_horizon, double alpha) {
  double total = 0.0;
  for (std::size_t i = 0; i < per_horizon.size(); ++i) total += std::pow(alpha, static_cast<double>(i)) * per_horizon[i];
  return total;
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

FLDModel::FLDModel(FLDConfig config, std::uint64_t seed)
    : normalization(signal::NormalizationStats::identity(config.state_dim)),
      config_(config),
      dft_(config.window),
      grid_(model::time_grid(config.window, config.dt)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.state_dim, h = config_.hidden_channels, c = config_.channels, k = config_.kernel();
  const std::size_t H = config_.window;
  encoder_.emplace_back("encoder.0", d, h, k, true, Activation::elu, rng);
  encoder_.emplace_back("encoder.1", h, h, k, true, Activation::elu, rng);
  encoder_.emplace_back("encoder.2", h, c, k, true, Activation::elu, rng);
  phase_weight_ = Parameter("phase.weight", DenseArray({c, 2, H}));
  phase_bias_ = Parameter("phase.bias", DenseArray({c, 2}));
  numerics::init_uniform_fan_in(phase_weight_.value, H, rng);
  numerics::init_uniform_fan_in(phase_bias_.value, H, rng);
  phase_bn_ = BatchNormLayer("phase.bn", 2 * c);
  decoder_.emplace_back("decoder.0", c, h, k, true, Activation::elu, rng);
  decoder_.emplace_back("decoder.1", h, h, k, true, Activation::elu, rng);
  decoder_.emplace_back("decoder.2", h, d, k, config_.final_activation,
                        config_.final_activation ? Activation::elu : Activation::none, rng);
}

std::vector<Parameter*> FLDModel::parameters() {
  std::vector<Parameter*> out;
  for (ConvBlock& b : encoder_) b.collect(out);
  out.push_back(&phase_weight_);
  out.push_back(&phase_bias_);
  out.push_back(&phase_bn_.gamma);
  out.push_back(&phase_bn_.beta);
  for (ConvBlock& b : decoder_) b.collect(out);
  return out;
}

std::vector<BatchNormLayer*> FLDModel::batchnorm_layers() {
  std::vector<BatchNormLayer*> out;
  for (ConvBlock& b : encoder_) out.push_back(&b.bn);
  out.push_back(&phase_bn_);
  for (ConvBlock& b : decoder_)
    if (b.normalized) out.push_back(&b.bn);
  return out;
}

std::vector<const BatchNormLayer*> FLDModel::batchnorm_layers() const {
  auto self = const_cast<FLDModel*>(this)->batchnorm_layers();
  return {self.begin(), self.end()};
}

std::size_t FLDModel::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : const_cast<FLDModel*>(this)->parameters()) n += p->value.size();
  return n;
}

DenseArray FLDModel::normalize_input(const DenseArray& segments) const {
  const std::size_t d = config_.state_dim, H = config_.window;
  if (segments.rank() == 2 && segments.dim(0) == d && segments.dim(1) == H) return segments.reshaped({1, d, H});
  if (segments.rank() == 3 && segments.dim(1) == d && segments.dim(2) == H) return segments;
  throw ShapeError("FLDModel: expected segments of shape [B, " + std::to_string(d) + ", " + std::to_string(H) +
                   "], got " + numerics::shape_string(segments.shape()));
}

DenseArray FLDModel::encode(const DenseArray& segments, NormMode mode) const {
  DenseArray h = normalize_input(segments);
  for (const ConvBlock& b : encoder_) h = b.infer(h, mode);
  return h;
}

DenseArray FLDModel::phase_logits(const DenseArray& z) const {
  const std::size_t B = z.dim(0), c = config_.channels, H = config_.window;
  DenseArray v({B, 2 * c});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* zr = z.ptr() + (b * c + ch) * H;
      for (std::size_t k = 0; k < 2; ++k) {
        const double* w = phase_weight_.value.ptr() + (ch * 2 + k) * H;
        double s = phase_bias_.value[ch * 2 + k];
        for (std::size_t t = 0; t < H; ++t) s += w[t] * zr[t];
        v.at(b, 2 * ch + k) = s;
      }
    }
  return v;
}

void FLDModel::fill_spectral(Encoding& enc) const {
  const std::size_t B = enc.z.dim(0), c = config_.channels, H = config_.window;
  enc.f = DenseArray({B, c});
  enc.a = DenseArray({B, c});
  enc.b = DenseArray({B, c});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const CurveParams p = parameterize_curve(dft_, {enc.z.ptr() + (b * c + ch) * H, H}, config_.dt);
      enc.f.at(b, ch) = p.f;
      enc.a.at(b, ch) = p.a;
      enc.b.at(b, ch) = p.b;
    }
}

Encoding FLDModel::parameterize(const DenseArray& z, NormMode mode) const {
  const std::size_t c = config_.channels, H = config_.window;
  if (z.rank() != 3 || z.dim(1) != c || z.dim(2) != H) {
    throw ShapeError("FLDModel::parameterize: expected latent of shape [B, " + std::to_string(c) + ", " +
                     std::to_string(H) + "], got " + numerics::shape_string(z.shape()));
  }
  Encoding enc;
  enc.z = z;
  const DenseArray u = phase_bn_.infer(phase_logits(z), mode);
  const std::size_t B = z.dim(0);
  enc.phi = DenseArray({B, c});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) enc.phi.at(b, ch) = numerics::atan2_phase(u.at(b, 2 * ch + 1), u.at(b, 2 * ch));
  fill_spectral(enc);
  return enc;
}

Encoding FLDModel::encode_parameters(const DenseArray& segments, NormMode mode) const {
  return parameterize(encode(segments, mode), mode);
}

DenseArray FLDModel::reconstruct(const Encoding& enc, long steps) const {
  if (steps < 0) throw ConfigError("FLDModel::reconstruct: steps must be >= 0");
  const std::size_t B = enc.batch(), c = config_.channels, H = config_.window;
  DenseArray out({B, c, H});
  const double s = static_cast<double>(steps);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double f = enc.f.at(b, ch);
      const double phi = numerics::wrap_phase(enc.phi.at(b, ch) + s * f * config_.dt);
      reconstruct_curve(phi, f, enc.a.at(b, ch), enc.b.at(b, ch), grid_, {out.ptr() + (b * c + ch) * H, H});
    }
  return out;
}

DenseArray FLDModel::decode(const DenseArray& latent, NormMode mode) const {
  const std::size_t c = config_.channels, H = config_.window;
  DenseArray h;
  if (latent.rank() == 2 && latent.dim(0) == c && latent.dim(1) == H) {
    h = latent.reshaped({1, c, H});
  } else if (latent.rank() == 3 && latent.dim(1) == c && latent.dim(2) == H) {
    h = latent;
  } else {
    throw ShapeError("FLDModel::decode: expected latent of shape [B, " + std::to_string(c) + ", " + std::to_string(H) +
                     "], got " + numerics::shape_string(latent.shape()));
  }
  for (const ConvBlock& b : decoder_) h = b.infer(h, mode);
  return h;
}

DenseArray FLDModel::predict(const DenseArray& segments, long steps, NormMode mode) const {
  if (steps < 0) throw ConfigError("FLDModel::predict: steps must be >= 0");
  return decode(reconstruct(encode_parameters(segments, mode), steps), mode);
}

DenseArray FLDModel::decode_state(const LatentState& state, const LatentParameterization& theta) const {
  if (state.channels() != config_.channels) throw ShapeError("FLDModel::decode_state: channel count mismatch");
  const DenseArray z = reconstruct_latent(state, theta, grid_);
  return decode(z, NormMode::eval).reshaped({config_.state_dim, config_.window});
}

LossResult FLDModel::eval_loss(const HorizonBatch& batch, std::size_t horizon, double alpha) const {
  // Eval mode with backward and running updates off never writes to *this.
  return const_cast<FLDModel*>(this)->loss(batch, horizon, alpha, {NormMode::eval, false, false});
}

LossResult FLDModel::loss(const HorizonBatch& batch, std::size_t horizon, double alpha, const LossOptions& opt) {
  const DenseArray x = normalize_input(batch.current);
  const std::size_t B = x.dim(0), d = config_.state_dim, c = config_.channels, H = config_.window;
  if (batch.futures.size() < horizon) {
    throw ConfigError("FLDModel::loss: horizon " + std::to_string(horizon) + " exceeds the " +
                      std::to_string(batch.futures.size()) + " future segments supplied");
  }
  for (std::size_t i = 0; i < horizon; ++i) {
    if (!batch.futures[i].same_shape(x)) throw ShapeError("FLDModel::loss: future segment shape mismatch");
  }
  const std::size_t steps = horizon + 1;
  const bool record = opt.backward;

  // encoder
  std::vector<ConvBlock::Cache> enc_cache(encoder_.size());
  DenseArray z = x;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    z = encoder_[l].forward(z, opt.mode, record ? &enc_cache[l] : nullptr, opt.update_running);
  }

  // phase head
  const DenseArray logits = phase_logits(z);
  BatchNormCache phase_cache;
  const DenseArray u = phase_bn_.forward(logits, opt.mode, record ? &phase_cache : nullptr, opt.update_running);
  Encoding enc;
  enc.z = z;
  enc.phi = DenseArray({B, c});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) enc.phi.at(b, ch) = numerics::atan2_phase(u.at(b, 2 * ch + 1), u.at(b, 2 * ch));
  fill_spectral(enc);

  // every horizon decoded as one batch, horizon-major
  DenseArray latent({steps * B, c, H});
  for (std::size_t i = 0; i < steps; ++i) {
    const DenseArray zi = reconstruct(enc, static_cast<long>(i));
    std::copy(zi.storage().begin(), zi.storage().end(), latent.storage().begin() + static_cast<long>(i * B * c * H));
  }
  std::vector<ConvBlock::Cache> dec_cache(decoder_.size());
  DenseArray y = latent;
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    y = decoder_[l].forward(y, opt.mode, record ? &dec_cache[l] : nullptr, opt.update_running);
  }

  const std::size_t per = B * d * H;
  LossResult result;
  result.per_horizon.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const DenseArray& target = i == 0 ? x : batch.futures[i - 1];
    const double* yp = y.ptr() + i * per;
    double s = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      const double e = yp[k] - target[k];
      s += e * e;
    }
    result.per_horizon[i] = s / static_cast<double>(per);
  }
  result.total = weighted_loss(result.per_horizon, alpha);
  if (!std::isfinite(result.total)) {
    throw NumericError("FLDModel::loss: non-finite loss (per-horizon L_0 = " + std::to_string(result.per_horizon[0]) + ")");
  }
  if (!opt.backward) return result;

  // d/dy of sum_i alpha^i mean((y_i - s_i)^2)
  DenseArray dy(y.shape());
  for (std::size_t i = 0; i < steps; ++i) {
    const DenseArray& target = i == 0 ? x : batch.futures[i - 1];
    const double scale = std::pow(alpha, static_cast<double>(i)) * 2.0 / static_cast<double>(per);
    const double* yp = y.ptr() + i * per;
    double* gp = dy.ptr() + i * per;
    for (std::size_t k = 0; k < per; ++k) gp[k] = scale * (yp[k] - target[k]);
  }
  DenseArray g = std::move(dy);
  for (std::size_t l = decoder_.size(); l-- > 0;) g = decoder_[l].backward(dec_cache[l], g);

  // back through the sinusoidal reconstruction
  DenseArray dphi({B, c}), df({B, c}), da({B, c}), db({B, c});
  for (std::size_t i = 0; i < steps; ++i) {
    const double s = static_cast<double>(i);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double f = enc.f.at(b, ch);
        const double phi = numerics::wrap_phase(enc.phi.at(b, ch) + s * f * config_.dt);
        const CurveGrad cg =
            reconstruct_curve_backward(phi, f, enc.a.at(b, ch), grid_, {g.ptr() + ((i * B + b) * c + ch) * H, H});
        dphi.at(b, ch) += cg.phi;
        df.at(b, ch) += cg.f + cg.phi * s * config_.dt;
        da.at(b, ch) += cg.a;
        db.at(b, ch) += cg.b;
      }
  }

  // spectral parameterization and phase head back into z
  DenseArray dz(z.shape());
  DenseArray du({B, 2 * c});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::span<const double> zr{z.ptr() + (b * c + ch) * H, H};
      parameterize_curve_backward(dft_, zr, config_.dt, df.at(b, ch), da.at(b, ch), db.at(b, ch),
                                  {dz.ptr() + (b * c + ch) * H, H});
      const auto pg = numerics::atan2_phase_grad(u.at(b, 2 * ch + 1), u.at(b, 2 * ch));
      du.at(b, 2 * ch + 1) = dphi.at(b, ch) * pg.d_sy;
      du.at(b, 2 * ch) = dphi.at(b, ch) * pg.d_sx;
    }
  const DenseArray dv = phase_bn_.backward(phase_cache, du);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* zr = z.ptr() + (b * c + ch) * H;
      double* dzr = dz.ptr() + (b * c + ch) * H;
      for (std::size_t k = 0; k < 2; ++k) {
        const double gv = dv.at(b, 2 * ch + k);
        const std::size_t off = (ch * 2 + k) * H;
        phase_bias_.grad[ch * 2 + k] += gv;
        for (std::size_t t = 0; t < H; ++t) {
          phase_weight_.grad[off + t] += gv * zr[t];
          dzr[t] += gv * phase_weight_.value[off + t];
        }
      }
    }

  g = std::move(dz);
  for (std::size_t l = encoder_.size(); l-- > 0;) g = encoder_[l].backward(enc_cache[l], g);
  return result;
}

}  // namespace fld::model
