#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fld/dynamics/synthesis.hpp"
#include "json.hpp"

namespace fld::dynamics {

/// The N+1 most recent raw d x H segments, oldest first. Segment i is
/// predicted i steps ahead from segment 0, so every horizon 0..N has ground
/// truth.
class InputBuffer {
 public:
  explicit InputBuffer(std::size_t capacity = 1);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }
  bool full() const noexcept { return segments_.size() == capacity_; }

  /// Drops the oldest segment once full.
  void push(DenseArray segment);
  void clear() { segments_.clear(); }
  const DenseArray& operator[](std::size_t i) const { return segments_[i]; }

 private:
  std::size_t capacity_;
  std::deque<DenseArray> segments_;
};

struct GateConfig {
  double epsilon = 0.0;
  /// Loss horizon and weight; calibration and gating must agree on them.
  std::size_t horizon = 0;
  double alpha = 1.0;
  /// Calibration record, empty/zero when epsilon was set by hand.
  double quantile = 0.0;
  std::size_t anchors = 0;
  std::size_t anchor_stride = 0;
  std::string corpus_crc32;

  void validate() const;
  nlohmann::json to_json() const;
  static GateConfig from_json(const nlohmann::json& j);
};

/// epsilon with the model's training horizon and alpha.
GateConfig manual_gate(const TrainedModel& model, double epsilon);

/// Midpoint between the order statistics around q (n - 1): {1,2,3,4} at 0.5
/// gives 2.5; q = 1 gives the maximum.
double quantile_midpoint(std::vector<double> values, double q);

/// sum_i alpha^i MSE_i of the prediction from buffer[0] against buffer[i],
/// in normalized units. Needs a full buffer of horizon + 1 segments.
double gate_loss(const TrainedModel& model, const InputBuffer& buffer, std::size_t horizon, double alpha);

/// The same loss at every anchor s (every `stride` frames) of each
/// trajectory, segments s .. s + horizon.
std::vector<double> anchor_losses(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                                  std::size_t horizon, double alpha, std::size_t stride = 1);

/// epsilon = quantile of anchor_losses over the training corpus. Horizon and
/// alpha default to the model's training values.
GateConfig calibrate_threshold(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                               double quantile = 0.99, std::size_t stride = 1,
                               std::optional<std::size_t> horizon = std::nullopt,
                               std::optional<double> alpha = std::nullopt);

enum class Verdict { accepted, rejected, no_input };
std::string to_string(Verdict v);

struct GateDecision {
  Verdict verdict = Verdict::no_input;
  std::optional<double> loss;
  LatentRollState state;
  /// Newest decoded frame of `state`, raw units.
  std::vector<double> target;
};

/// Empty buffer: propagate. Full buffer: accept (re-encode from the newest
/// segment) when the loss is within epsilon, otherwise propagate. A
/// partially filled buffer is an error.
GateDecision gate_step(const InputBuffer& buffer, const LatentRollState& state, const GateConfig& gate,
                       const TrainedModel& model);

/// Frame-by-frame driver: builds segments from incoming frames and reports
/// no_input while the buffer warms up. A missing frame resets the history.
class GateStream {
 public:
  GateStream(const TrainedModel& model, GateConfig gate, LatentRollState initial);

  GateDecision push(std::optional<std::span<const double>> frame);
  const LatentRollState& state() const noexcept { return state_; }

 private:
  const TrainedModel* model_;
  GateConfig gate_;
  LatentRollState state_;
  std::deque<std::vector<double>> frames_;
  InputBuffer buffer_;
};

/// {step, verdict, loss, phi[], theta{f[],a[],b[]}, target_frame[]}
nlohmann::json decision_to_json(std::size_t step, const GateDecision& d);

/// Zero phase, zero amplitude, zero frequency and offset.
LatentRollState neutral_state(std::size_t channels);

}  // namespace fld::dynamics
