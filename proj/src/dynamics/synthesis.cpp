#include "fld/dynamics/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include "fld/common/error.hpp"
#include "fld/numerics/spectral.hpp"

namespace fld::dynamics {

namespace {

const model::FLDModel& fld_of(const TrainedModel& m) {
  if (m.kind() != model::ModelKind::fld && m.kind() != model::ModelKind::pae) {
    throw ConfigError("latent dynamics need an fld or pae model, got " + model::to_string(m.kind()));
  }
  return m.fld();
}

void check_state(const TrainedModel& m, const LatentRollState& s) {
  const std::size_t c = m.settings().fld.channels;
  if (s.phi.channels() != c || s.theta.channels() != c || s.theta.a.size() != c || s.theta.b.size() != c) {
    throw ShapeError("latent state has " + std::to_string(s.phi.channels()) + " channels, model has " + std::to_string(c));
  }
}

}  // namespace

LatentRollState propagate(const LatentRollState& state, double dt) {
  LatentRollState out = state;
  out.phi = model::advance(state.phi, state.theta, 1.0, dt);
  ++out.step;
  return out;
}

LatentRollState encode_state(const TrainedModel& model, const DenseArray& raw_segment) {
  const model::FLDModel& fld = fld_of(model);
  DenseArray seg = raw_segment;
  model.normalization.apply_segment(seg);
  const model::Encoding enc = fld.encode_parameters(seg);
  return {enc.state(0), enc.theta(0), 0};
}

std::vector<double> target_frame(const TrainedModel& model, const LatentRollState& state) {
  const model::FLDModel& fld = fld_of(model);
  check_state(model, state);
  const DenseArray seg = fld.decode_state(state.phi, state.theta);
  const std::size_t d = seg.dim(0), H = seg.dim(1);
  std::vector<double> frame(d);
  for (std::size_t j = 0; j < d; ++j) frame[j] = seg.at(j, H - 1);
  model.normalization.invert_frame(frame);
  return frame;
}

signal::Trajectory synthesize(const TrainedModel& model, LatentRollState initial, std::size_t steps) {
  if (steps == 0) throw ConfigError("synthesize: steps must be positive");
  const std::vector<LatentParameterization> fixed(steps, initial.theta);
  return synthesize_schedule(model, initial.phi, fixed);
}

std::vector<LatentParameterization> interpolate_theta(const LatentParameterization& src,
                                                      const LatentParameterization& dst, std::size_t steps) {
  const std::size_t c = src.channels();
  if (dst.channels() != c || src.a.size() != c || src.b.size() != c || dst.a.size() != c || dst.b.size() != c) {
    throw ShapeError("interpolate_theta: channel counts differ");
  }
  if (steps == 0) return {dst};
  std::vector<LatentParameterization> out;
  out.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    if (k == 0) {
      out.push_back(src);
      continue;
    }
    if (k == steps) {
      out.push_back(dst);
      continue;
    }
    const double l = static_cast<double>(k) / static_cast<double>(steps);
    LatentParameterization t{std::vector<double>(c), std::vector<double>(c), std::vector<double>(c)};
    for (std::size_t ch = 0; ch < c; ++ch) {
      t.f[ch] = (1.0 - l) * src.f[ch] + l * dst.f[ch];
      t.a[ch] = (1.0 - l) * src.a[ch] + l * dst.a[ch];
      t.b[ch] = (1.0 - l) * src.b[ch] + l * dst.b[ch];
    }
    out.push_back(std::move(t));
  }
  return out;
}

signal::Trajectory synthesize_schedule(const TrainedModel& model, const LatentState& phi0,
                                       const std::vector<LatentParameterization>& schedule) {
  if (schedule.empty()) throw ConfigError("synthesize: empty schedule");
  const double dt = model.settings().fld.dt;
  const std::size_t d = model.state_dim();
  DenseArray frames({schedule.size(), d});
  LatentRollState s{phi0, schedule[0], 0};
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    s.theta = schedule[k];
    const std::vector<double> f = target_frame(model, s);
    std::copy(f.begin(), f.end(), frames.row(k).begin());
    s = propagate(s, dt);
  }
  return {std::move(frames), dt, "synthesized"};
}

double dominant_frequency(const signal::Trajectory& trajectory, std::size_t begin, std::size_t end,
                          std::vector<std::size_t> dims) {
  if (end > trajectory.length() || end < begin + 8) throw ConfigError("dominant_frequency: need at least 8 frames");
  if (dims.empty()) {
    for (std::size_t j = 0; j < trajectory.state_dim(); ++j) dims.push_back(j);
  }
  const std::size_t n = end - begin;
  const numerics::RealDft dft(n);
  std::vector<double> x(n), re(dft.bins()), im(dft.bins());
  double weighted = 0.0, total = 0.0;
  for (std::size_t j : dims) {
    if (j >= trajectory.state_dim()) throw ShapeError("dominant_frequency: dimension out of range");
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += trajectory.frames.at(begin + t, j);
    mean /= static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) x[t] = trajectory.frames.at(begin + t, j) - mean;
    dft.forward(x, re, im);
    std::size_t peak = 1;
    std::vector<double> mag(dft.bins());
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(re[k], im[k]);
    for (std::size_t k = 1; k < mag.size(); ++k)
      if (mag[k] > mag[peak]) peak = k;
    // Parabolic refinement of the peak on log magnitude.
    double bin = static_cast<double>(peak);
    if (peak + 1 < mag.size() && mag[peak - 1] > 0.0 && mag[peak + 1] > 0.0) {
      const double l = std::log(mag[peak - 1]), m = std::log(mag[peak]), r = std::log(mag[peak + 1]);
      const double den = l - 2.0 * m + r;
      if (den < 0.0) bin += 0.5 * (l - r) / den;
    }
    const double power = mag[peak] * mag[peak];
    weighted += power * bin / (static_cast<double>(n) * trajectory.dt);
    total += power;
  }
  if (total <= 0.0) return 0.0;
  return weighted / total;
}

}  // namespace fld::dynamics
