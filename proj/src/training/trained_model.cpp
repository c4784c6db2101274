#include "fld/training/trained_model.hpp"

#include "fld/common/error.hpp"

namespace fld::training {

nlohmann::json ModelSettings::to_json() const {
  return {{"fld", fld.to_json()}, {"vae_beta", vae_beta}, {"ff_hidden", ff_hidden}};
}

ModelSettings ModelSettings::from_json(const nlohmann::json& j) {
  ModelSettings s;
  s.fld = model::FLDConfig::from_json(j.at("fld"));
  s.vae_beta = j.value("vae_beta", s.vae_beta);
  s.ff_hidden = j.value("ff_hidden", s.ff_hidden);
  return s;
}

TrainedModel::TrainedModel(ModelKind kind, ModelSettings settings, std::uint64_t seed_value)
    : normalization(signal::NormalizationStats::identity(settings.fld.state_dim)),
      seed(seed_value),
      kind_(kind),
      settings_(std::move(settings)) {
  settings_.fld.validate();
  const auto& c = settings_.fld;
  switch (kind_) {
    case ModelKind::pae:
      settings_.fld.horizon = 0;
      [[fallthrough]];
    case ModelKind::fld:
      fld_ = model::FLDModel(settings_.fld, seed_value);
      break;
    case ModelKind::vae:
      vae_ = model::Vae({c.state_dim, c.window, c.channels, settings_.vae_beta}, seed_value);
      break;
    case ModelKind::ff:
      ff_ = model::FeedForward({c.state_dim, c.window, settings_.ff_hidden}, seed_value);
      break;
    case ModelKind::original:
      throw ConfigError("TrainedModel: 'original' is not a trainable model");
  }
}

std::size_t TrainedModel::lookahead() const {
  switch (kind_) {
    case ModelKind::fld: return settings_.fld.horizon;
    case ModelKind::ff: return 1;
    default: return 0;
  }
}

std::vector<Parameter*> TrainedModel::parameters() {
  switch (kind_) {
    case ModelKind::vae: return vae_.parameters();
    case ModelKind::ff: return ff_.parameters();
    default: return fld_.parameters();
  }
}

std::vector<std::pair<std::string, DenseArray*>> TrainedModel::named_arrays() {
  std::vector<std::pair<std::string, DenseArray*>> out;
  for (Parameter* p : parameters()) out.emplace_back(p->name, &p->value);
  if (kind_ == ModelKind::fld || kind_ == ModelKind::pae) {
    for (numerics::BatchNormLayer* bn : fld_.batchnorm_layers()) {
      out.emplace_back(bn->name + ".running_mean", &bn->state.running_mean);
      out.emplace_back(bn->name + ".running_var", &bn->state.running_var);
    }
  }
  const std::size_t d = state_dim();
  if (normalization.dims() != d) throw ShapeError("TrainedModel: normalization dimension mismatch");
  norm_mean_ = DenseArray({d}, normalization.mean);
  norm_std_ = DenseArray({d}, normalization.std);
  out.emplace_back("normalization.mean", &norm_mean_);
  out.emplace_back("normalization.std", &norm_std_);
  return out;
}

void TrainedModel::commit_arrays() {
  normalization.mean = norm_mean_.storage();
  normalization.std = norm_std_.storage();
  if (kind_ == ModelKind::fld || kind_ == ModelKind::pae) fld_.normalization = normalization;
}

bool TrainedModel::supports_horizon(long steps) const {
  if (steps < 0) return false;
  return kind_ != ModelKind::vae || steps == 0;
}

DenseArray TrainedModel::predict(const DenseArray& segments, long steps) const {
  if (!supports_horizon(steps)) {
    throw ConfigError("TrainedModel::predict: " + model::to_string(kind_) + " cannot predict " + std::to_string(steps) +
                      " steps ahead");
  }
  switch (kind_) {
    case ModelKind::vae: return vae_.forward(segments).reconstruction;
    case ModelKind::ff: return ff_.predict(segments, steps);
    default: return fld_.predict(segments, steps);
  }
}

std::vector<DenseArray> TrainedModel::predict_horizons(const DenseArray& segments, std::size_t max_horizon) const {
  std::vector<DenseArray> out(max_horizon + 1);
  switch (kind_) {
    case ModelKind::vae:
      out[0] = predict(segments, 0);
      break;
    case ModelKind::ff:
      out[0] = predict(segments, 0);
      for (std::size_t i = 1; i <= max_horizon; ++i) out[i] = ff_.predict(out[i - 1], 1);
      break;
    default: {
      const model::Encoding enc = fld_.encode_parameters(segments);
      for (std::size_t i = 0; i <= max_horizon; ++i) out[i] = fld_.decode(fld_.reconstruct(enc, static_cast<long>(i)));
    }
  }
  return out;
}

}  // namespace fld::training
