#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fld/numerics/dense_array.hpp"

namespace fld::signal {

using numerics::DenseArray;

/// A contiguous block of state dimensions with a name.
struct DimensionGroup {
  std::string name;
  std::size_t begin;
  std::size_t end;
};

/// Humanoid state layout (d = 27): base linear velocity, base angular
/// velocity, projected gravity, 18 joint positions (10 leg, 8 arm).
inline constexpr std::size_t kHumanoidStateDim = 27;
std::vector<DimensionGroup> humanoid_layout();
/// Evaluation groups: velocities (0:6), gravity (6:9), joints (9:27); a
/// single "all" group for any other dimensionality.
std::vector<DimensionGroup> evaluation_groups(std::size_t state_dim);

/// Frames in time order, stored as a frames x d matrix.
struct Trajectory {
  DenseArray frames;
  double dt = 0.02;
  std::string label;

  Trajectory() = default;
  Trajectory(DenseArray f, double step, std::string l = {});

  std::size_t length() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
  std::size_t state_dim() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
  std::span<const double> frame(std::size_t t) const { return frames.row(t); }
  std::span<double> frame(std::size_t t) { return frames.row(t); }
};

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dims() const { return mean.size(); }

  Trajectory apply(const Trajectory& t) const;
  Trajectory invert(const Trajectory& t) const;
  /// In-place on a segment laid out d x H or batch x d x H.
  void apply_segment(DenseArray& segment) const;
  void invert_segment(DenseArray& segment) const;
  void apply_frame(std::span<double> frame) const;
  void invert_frame(std::span<double> frame) const;

  static NormalizationStats identity(std::size_t dims);
};

/// Per-dimension z-score over every frame of every trajectory (population
/// std). Dimensions with std < 1e-6 get std = 1.
NormalizationStats fit_normalization(std::span<const Trajectory> corpus);

// ---------------------------------------------------------------------------
// windowing
// ---------------------------------------------------------------------------

/// A d x H window whose columns run oldest -> newest; `target` is the index
/// of the newest frame.
struct Segment {
  std::size_t start = 0;
  std::size_t target = 0;
  DenseArray data;
};

/// Start indices of all windows: count = floor((len - H)/stride) + 1.
std::vector<std::size_t> window_starts(std::size_t length, std::size_t window, std::size_t stride = 1);

/// Frames [start, start + window) as a d x window matrix.
DenseArray extract_segment(const Trajectory& t, std::size_t start, std::size_t window);
/// Same, written into `out` (d x window values, row-major).
void extract_segment_into(const Trajectory& t, std::size_t start, std::size_t window, std::span<double> out);

std::vector<Segment> window(const Trajectory& t, std::size_t window, std::size_t stride = 1);

/// s_t plus the segments s_{t+1} ... s_{t+N} the horizon-N loss compares against.
struct TrainingItem {
  Segment current;
  std::vector<Segment> futures;
};

std::vector<TrainingItem> window_with_future(const Trajectory& t, std::size_t window, std::size_t horizon);

/// Trajectory-level split (no window crosses the split). Deterministic per seed;
/// at least one trajectory lands on each side when there are two or more.
struct CorpusSplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> validation;
};
CorpusSplit split_by_trajectory(std::span<const Trajectory> corpus, double validation_fraction, unsigned long long seed);

}  // namespace fld::signal
