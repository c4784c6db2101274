#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fld::curriculum {

/// One exp(-sigma ||target - measured||^2) term over a block of state dims.
struct TrackingTerm {
  std::string name;
  std::size_t begin;
  std::size_t end;
  double sigma;
  double weight = 1.0;
};

/// Linear and angular base velocity (sigma 0.2), projected gravity, leg and
/// arm joint positions (sigma 1.0), all weighted 1.
std::vector<TrackingTerm> default_tracking_terms();

struct TrackingReward {
  double total = 0.0;
  std::vector<double> terms;  // unweighted, one per TrackingTerm
};

/// Throws ShapeError when the states do not match the layout.
TrackingReward tracking_reward(std::span<const double> target, std::span<const double> measured,
                               const std::vector<TrackingTerm>& terms = default_tracking_terms());

/// Episode performance: mean step reward over the weight sum, in [0, 1].
/// Zero when every weight is zero or the episode is empty.
double episode_performance(std::span<const double> step_rewards,
                           const std::vector<TrackingTerm>& terms = default_tracking_terms());

struct RegularizationWeights {
  double action_rate = -0.01;
  double joint_acceleration = -2.5e-7;
  double torque = -1e-5;
};

/// w_a ||a' - a||^2 + w_q ||(qd' - qd) / dt||^2 + w_T ||T||^2.
double regularization_reward(std::span<const double> prev_action, std::span<const double> action,
                             std::span<const double> prev_joint_vel, std::span<const double> joint_vel,
                             std::span<const double> torques, double dt, const RegularizationWeights& w = {});

}  // namespace fld::curriculum
