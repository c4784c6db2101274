#include "fld/signal/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fld/common/error.hpp"

namespace fld::signal {

std::vector<DimensionGroup> humanoid_layout() {
  return {{"base_linear_velocity", 0, 3},
          {"base_angular_velocity", 3, 6},
          {"projected_gravity", 6, 9},
          {"leg_joint_positions", 9, 19},
          {"arm_joint_positions", 19, 27}};
}

std::vector<DimensionGroup> evaluation_groups(std::size_t state_dim) {
  if (state_dim == kHumanoidStateDim) return {{"velocities", 0, 6}, {"gravity", 6, 9}, {"joints", 9, 27}};
  return {{"all", 0, state_dim}};
}

Trajectory::Trajectory(DenseArray f, double step, std::string l) : frames(std::move(f)), dt(step), label(std::move(l)) {
  if (frames.rank() != 2) throw ShapeError("Trajectory: frames must be a frames x d matrix");
  if (!(dt > 0.0)) throw ConfigError("Trajectory: dt must be positive");
}

Trajectory NormalizationStats::apply(const Trajectory& t) const {
  Trajectory out = t;
  for (std::size_t i = 0; i < out.length(); ++i) apply_frame(out.frame(i));
  return out;
}

Trajectory NormalizationStats::invert(const Trajectory& t) const {
  Trajectory out = t;
  for (std::size_t i = 0; i < out.length(); ++i) invert_frame(out.frame(i));
  return out;
}

void NormalizationStats::apply_frame(std::span<double> frame) const {
  if (frame.size() != dims()) throw ShapeError("NormalizationStats: frame dimension mismatch");
  for (std::size_t j = 0; j < frame.size(); ++j) frame[j] = (frame[j] - mean[j]) / std[j];
}

void NormalizationStats::invert_frame(std::span<double> frame) const {
  if (frame.size() != dims()) throw ShapeError("NormalizationStats: frame dimension mismatch");
  for (std::size_t j = 0; j < frame.size(); ++j) frame[j] = frame[j] * std[j] + mean[j];
}

namespace {

template <typename Fn>
void for_each_segment_row(DenseArray& segment, std::size_t dims, Fn&& fn) {
  const std::size_t d_axis = segment.rank() == 3 ? 1 : 0;
  if (segment.rank() < 2 || segment.dim(d_axis) != dims) throw ShapeError("NormalizationStats: segment dimension mismatch");
  const std::size_t len = segment.shape().back();
  const std::size_t batches = segment.rank() == 3 ? segment.dim(0) : 1;
  for (std::size_t b = 0; b < batches; ++b)
    for (std::size_t j = 0; j < dims; ++j) fn(j, segment.ptr() + (b * dims + j) * len, len);
}

}  // namespace

void NormalizationStats::apply_segment(DenseArray& segment) const {
  for_each_segment_row(segment, dims(), [&](std::size_t j, double* row, std::size_t len) {
    for (std::size_t t = 0; t < len; ++t) row[t] = (row[t] - mean[j]) / std[j];
  });
}

void NormalizationStats::invert_segment(DenseArray& segment) const {
  for_each_segment_row(segment, dims(), [&](std::size_t j, double* row, std::size_t len) {
    for (std::size_t t = 0; t < len; ++t) row[t] = row[t] * std[j] + mean[j];
  });
}

NormalizationStats NormalizationStats::identity(std::size_t dims) {
  return {std::vector<double>(dims, 0.0), std::vector<double>(dims, 1.0)};
}

NormalizationStats fit_normalization(std::span<const Trajectory> corpus) {
  std::size_t total = 0;
  std::size_t dims = 0;
  for (const Trajectory& t : corpus) {
    if (t.length() == 0) continue;
    if (dims == 0) dims = t.state_dim();
    if (t.state_dim() != dims) throw ShapeError("fit_normalization: trajectories disagree on state dimension");
    total += t.length();
  }
  if (total == 0) throw ConfigError("fit_normalization: empty corpus");
  if (total < 2) throw ConfigError("fit_normalization: need at least 2 frames");
  NormalizationStats s{std::vector<double>(dims, 0.0), std::vector<double>(dims, 0.0)};
  for (const Trajectory& t : corpus)
    for (std::size_t i = 0; i < t.length(); ++i)
      for (std::size_t j = 0; j < dims; ++j) s.mean[j] += t.frames.at(i, j);
  for (double& m : s.mean) m /= static_cast<double>(total);
  for (const Trajectory& t : corpus)
    for (std::size_t i = 0; i < t.length(); ++i)
      for (std::size_t j = 0; j < dims; ++j) {
        const double e = t.frames.at(i, j) - s.mean[j];
        s.std[j] += e * e;
      }
  for (double& v : s.std) {
    v = std::sqrt(v / static_cast<double>(total));
    if (v < 1e-6) v = 1.0;
  }
  return s;
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("window_starts: window and stride must be positive");
  if (length < window) {
    throw ConfigError("trajectory of " + std::to_string(length) + " frames is shorter than the window of " +
                      std::to_string(window));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= length; s += stride) starts.push_back(s);
  return starts;
}

void extract_segment_into(const Trajectory& t, std::size_t start, std::size_t window, std::span<double> out) {
  const std::size_t d = t.state_dim();
  if (start + window > t.length()) throw ShapeError("extract_segment: window runs past the trajectory end");
  if (out.size() != d * window) throw ShapeError("extract_segment: output size mismatch");
  for (std::size_t k = 0; k < window; ++k) {
    const auto f = t.frame(start + k);
    for (std::size_t j = 0; j < d; ++j) out[j * window + k] = f[j];
  }
}

DenseArray extract_segment(const Trajectory& t, std::size_t start, std::size_t window) {
  DenseArray seg({t.state_dim(), window});
  extract_segment_into(t, start, window, seg.data());
  return seg;
}

std::vector<Segment> window(const Trajectory& t, std::size_t window, std::size_t stride) {
  std::vector<Segment> out;
  for (std::size_t s : window_starts(t.length(), window, stride)) {
    out.push_back({s, s + window - 1, extract_segment(t, s, window)});
  }
  return out;
}

std::vector<TrainingItem> window_with_future(const Trajectory& t, std::size_t window, std::size_t horizon) {
  if (t.length() < window + horizon) {
    throw ConfigError("window_with_future: need " + std::to_string(window + horizon) + " frames, have " +
                      std::to_string(t.length()));
  }
  std::vector<TrainingItem> items;
  for (std::size_t s = 0; s + window + horizon <= t.length(); ++s) {
    TrainingItem item;
    item.current = {s, s + window - 1, extract_segment(t, s, window)};
    for (std::size_t i = 1; i <= horizon; ++i) {
      item.futures.push_back({s + i, s + i + window - 1, extract_segment(t, s + i, window)});
    }
    items.push_back(std::move(item));
  }
  return items;
}

CorpusSplit split_by_trajectory(std::span<const Trajectory> corpus, double validation_fraction,
                                unsigned long long seed) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ConfigError("split_by_trajectory: validation fraction must be in [0, 1)");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::round(validation_fraction * static_cast<double>(corpus.size())));
  if (validation_fraction > 0.0 && corpus.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, corpus.size() - 1);
  CorpusSplit split;
  // Keep the original corpus order inside each side.
  std::vector<bool> is_val(corpus.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  for (std::size_t i = 0; i < corpus.size(); ++i) (is_val[i] ? split.validation : split.train).push_back(corpus[i]);
  return split;
}

}  // namespace fld::signal
