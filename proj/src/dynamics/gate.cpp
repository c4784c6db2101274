#include "fld/dynamics/gate.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fld/common/error.hpp"

namespace fld::dynamics {

InputBuffer::InputBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("InputBuffer: capacity must be positive");
}

void InputBuffer::push(DenseArray segment) {
  if (!segments_.empty() && !segment.same_shape(segments_.front())) throw ShapeError("InputBuffer: segment shape changed");
  if (full()) segments_.pop_front();
  segments_.push_back(std::move(segment));
}

void GateConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("gate: epsilon must be positive and finite");
  if (!(alpha > 0.0)) throw ConfigError("gate: alpha must be positive");
}

nlohmann::json GateConfig::to_json() const {
  return {{"epsilon", epsilon},  {"horizon", horizon},     {"alpha", alpha},
          {"quantile", quantile}, {"anchors", anchors},     {"anchor_stride", anchor_stride},
          {"corpus_crc32", corpus_crc32}};
}

GateConfig GateConfig::from_json(const nlohmann::json& j) {
  GateConfig g;
  g.epsilon = j.at("epsilon").get<double>();
  g.horizon = j.at("horizon").get<std::size_t>();
  g.alpha = j.at("alpha").get<double>();
  g.quantile = j.value("quantile", 0.0);
  g.anchors = j.value("anchors", std::size_t{0});
  g.anchor_stride = j.value("anchor_stride", std::size_t{0});
  g.corpus_crc32 = j.value("corpus_crc32", std::string{});
  g.validate();
  return g;
}

GateConfig manual_gate(const TrainedModel& model, double epsilon) {
  GateConfig g;
  g.epsilon = epsilon;
  g.horizon = model.settings().fld.horizon;
  g.alpha = model.settings().fld.alpha;
  g.validate();
  return g;
}

double quantile_midpoint(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile: no values");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("quantile must lie in (0, 1], got " + std::to_string(q));
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return 0.5 * (values[lo] + values[hi]);
}

namespace {

const model::FLDModel& fld_of(const TrainedModel& m) {
  if (m.kind() != model::ModelKind::fld && m.kind() != model::ModelKind::pae) {
    throw ConfigError("the gate needs an fld or pae model, got " + model::to_string(m.kind()));
  }
  return m.fld();
}

DenseArray normalized_batch(const TrainedModel& m, const DenseArray& raw) {
  DenseArray seg = raw.reshaped({1, raw.dim(0), raw.dim(1)});
  m.normalization.apply_segment(seg);
  return seg;
}

}  // namespace

double gate_loss(const TrainedModel& model, const InputBuffer& buffer, std::size_t horizon, double alpha) {
  const model::FLDModel& fld = fld_of(model);
  if (buffer.size() != horizon + 1) {
    throw ConfigError("gate_loss: buffer holds " + std::to_string(buffer.size()) + " segments, horizon " +
                      std::to_string(horizon) + " needs " + std::to_string(horizon + 1));
  }
  model::HorizonBatch hb;
  hb.current = normalized_batch(model, buffer[0]);
  for (std::size_t i = 1; i <= horizon; ++i) hb.futures.push_back(normalized_batch(model, buffer[i]));
  return fld.eval_loss(hb, horizon, alpha).total;
}

std::vector<double> anchor_losses(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                                  std::size_t horizon, double alpha, std::size_t stride) {
  if (stride == 0) throw ConfigError("anchor_losses: stride must be positive");
  const std::size_t H = model.window();
  std::vector<double> out;
  for (const auto& t : corpus) {
    for (std::size_t s = 0; s + H + horizon <= t.length(); s += stride) {
      InputBuffer buf(horizon + 1);
      for (std::size_t i = 0; i <= horizon; ++i) buf.push(signal::extract_segment(t, s + i, H));
      out.push_back(gate_loss(model, buf, horizon, alpha));
    }
  }
  return out;
}

GateConfig calibrate_threshold(const TrainedModel& model, std::span<const signal::Trajectory> corpus, double quantile,
                               std::size_t stride, std::optional<std::size_t> horizon, std::optional<double> alpha) {
  if (corpus.empty()) throw ConfigError("calibrate_threshold: empty corpus");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("calibrate_threshold: quantile must lie in (0, 1]");
  GateConfig g;
  g.horizon = horizon.value_or(model.settings().fld.horizon);
  g.alpha = alpha.value_or(model.settings().fld.alpha);
  const std::vector<double> losses = anchor_losses(model, corpus, g.horizon, g.alpha, stride);
  if (losses.empty()) throw ConfigError("calibrate_threshold: no trajectory is long enough for one buffer");
  g.epsilon = quantile_midpoint(losses, quantile);
  g.quantile = quantile;
  g.anchors = losses.size();
  g.anchor_stride = stride;
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& t : corpus) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.frames.ptr()), static_cast<uInt>(t.frames.size() * sizeof(double)));
  }
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
  g.corpus_crc32 = hex;
  g.validate();
  return g;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::accepted: return "accepted";
    case Verdict::rejected: return "rejected";
    case Verdict::no_input: return "no_input";
  }
  return "?";
}

GateDecision gate_step(const InputBuffer& buffer, const LatentRollState& state, const GateConfig& gate,
                       const TrainedModel& model) {
  const double dt = model.settings().fld.dt;
  GateDecision d;
  if (buffer.empty()) {
    d.verdict = Verdict::no_input;
    d.state = propagate(state, dt);
  } else {
    if (buffer.size() != gate.horizon + 1) {
      throw ConfigError("gate_step: buffer holds " + std::to_string(buffer.size()) + " of " +
                        std::to_string(gate.horizon + 1) + " segments; wait for warm-up");
    }
    d.loss = gate_loss(model, buffer, gate.horizon, gate.alpha);
    if (*d.loss <= gate.epsilon) {
      d.verdict = Verdict::accepted;
      d.state = encode_state(model, buffer[buffer.size() - 1]);
      d.state.step = state.step + 1;
    } else {
      d.verdict = Verdict::rejected;
      d.state = propagate(state, dt);
    }
  }
  d.target = target_frame(model, d.state);
  return d;
}

GateStream::GateStream(const TrainedModel& model, GateConfig gate, LatentRollState initial)
    : model_(&model), gate_(std::move(gate)), state_(std::move(initial)), buffer_(gate_.horizon + 1) {
  fld_of(model);
  gate_.validate();
}

GateDecision GateStream::push(std::optional<std::span<const double>> frame) {
  const std::size_t H = model_->window(), d = model_->state_dim();
  if (!frame) {
    frames_.clear();
    buffer_.clear();
  } else {
    if (frame->size() != d) {
      throw ShapeError("gate: frame has " + std::to_string(frame->size()) + " values, model expects " + std::to_string(d));
    }
    frames_.emplace_back(frame->begin(), frame->end());
    if (frames_.size() > H) frames_.pop_front();
    if (frames_.size() == H) {
      DenseArray seg({d, H});
      for (std::size_t t = 0; t < H; ++t)
        for (std::size_t j = 0; j < d; ++j) seg.at(j, t) = frames_[t][j];
      buffer_.push(std::move(seg));
    }
  }
  static const InputBuffer none(1);
  GateDecision dec = gate_step(buffer_.full() ? buffer_ : none, state_, gate_, *model_);
  state_ = dec.state;
  return dec;
}

nlohmann::json decision_to_json(std::size_t step, const GateDecision& d) {
  nlohmann::json j{{"step", step},
                   {"verdict", to_string(d.verdict)},
                   {"loss", d.loss ? nlohmann::json(*d.loss) : nlohmann::json(nullptr)},
                   {"phi", d.state.phi.phi},
                   {"theta", {{"f", d.state.theta.f}, {"a", d.state.theta.a}, {"b", d.state.theta.b}}},
                   {"target_frame", d.target}};
  return j;
}

LatentRollState neutral_state(std::size_t channels) {
  const std::vector<double> z(channels, 0.0);
  return {{z}, {z, z, z}, 0};
}

}  // namespace fld::dynamics
