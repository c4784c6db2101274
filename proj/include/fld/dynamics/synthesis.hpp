#pragma once

#include <cstddef>
#include <vector>

#include "fld/model/latent.hpp"
#include "fld/signal/trajectory.hpp"
#include "fld/training/trained_model.hpp"

namespace fld::dynamics {

using numerics::DenseArray;
using model::LatentParameterization;
using model::LatentState;
using training::TrainedModel;

/// Latent phase plus the parameterization it rolls with. theta is held
/// fixed while rolling; only phi and the step counter move.
struct LatentRollState {
  LatentState phi;
  LatentParameterization theta;
  std::size_t step = 0;
};

/// phi <- wrap(phi + f dt), step + 1.
LatentRollState propagate(const LatentRollState& state, double dt);

/// Roll state of one window (d x H, raw units) as the encoder sees it.
LatentRollState encode_state(const TrainedModel& model, const DenseArray& raw_segment);

/// Newest frame of the decoded window, denormalized.
std::vector<double> target_frame(const TrainedModel& model, const LatentRollState& state);

/// Decode, emit the newest frame, propagate; `steps` frames, raw units.
signal::Trajectory synthesize(const TrainedModel& model, LatentRollState initial, std::size_t steps);

/// theta_k = (1 - k/steps) src + (k/steps) dst for k = 0..steps. With
/// steps = 0 the schedule is just dst.
std::vector<LatentParameterization> interpolate_theta(const LatentParameterization& src,
                                                      const LatentParameterization& dst, std::size_t steps);

/// synthesize() with theta following `schedule`; frame k is decoded with
/// schedule[k] and phi then advances with that step's blended f.
signal::Trajectory synthesize_schedule(const TrainedModel& model, const LatentState& phi0,
                                       const std::vector<LatentParameterization>& schedule);

/// Frequency (Hz) of the strongest non-DC bin of a series, averaged over
/// the given state dimensions (all when empty) weighted by power.
double dominant_frequency(const signal::Trajectory& trajectory, std::size_t begin, std::size_t end,
                          std::vector<std::size_t> dims = {});

}  // namespace fld::dynamics
