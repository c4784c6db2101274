#include "fld/curriculum/rewards.hpp"

#include <cmath>

#include "fld/common/error.hpp"
#include "fld/signal/trajectory.hpp"

namespace fld::curriculum {

std::vector<TrackingTerm> default_tracking_terms() {
  const auto layout = signal::humanoid_layout();
  const double sigmas[] = {0.2, 0.2, 1.0, 1.0, 1.0};
  std::vector<TrackingTerm> out;
  for (std::size_t i = 0; i < layout.size(); ++i) out.push_back({layout[i].name, layout[i].begin, layout[i].end, sigmas[i], 1.0});
  return out;
}

TrackingReward tracking_reward(std::span<const double> target, std::span<const double> measured,
                               const std::vector<TrackingTerm>& terms) {
  if (target.size() != measured.size()) throw ShapeError("tracking_reward: target and measured sizes differ");
  TrackingReward r;
  for (const auto& t : terms) {
    if (t.begin >= t.end || t.end > target.size()) {
      throw ShapeError("tracking_reward: term '" + t.name + "' does not fit a state of " +
                       std::to_string(target.size()) + " values");
    }
    double sq = 0.0;
    for (std::size_t i = t.begin; i < t.end; ++i) sq += (target[i] - measured[i]) * (target[i] - measured[i]);
    const double v = std::exp(-t.sigma * sq);
    r.terms.push_back(v);
    r.total += t.weight * v;
  }
  return r;
}

double episode_performance(std::span<const double> step_rewards, const std::vector<TrackingTerm>& terms) {
  double wsum = 0.0;
  for (const auto& t : terms) wsum += t.weight;
  if (step_rewards.empty() || wsum <= 0.0) return 0.0;
  double s = 0.0;
  for (double v : step_rewards) s += v;
  return s / static_cast<double>(step_rewards.size()) / wsum;
}

double regularization_reward(std::span<const double> prev_action, std::span<const double> action,
                             std::span<const double> prev_joint_vel, std::span<const double> joint_vel,
                             std::span<const double> torques, double dt, const RegularizationWeights& w) {
  if (!(dt > 0.0)) throw ConfigError("regularization_reward: dt must be positive");
  if (prev_action.size() != action.size() || prev_joint_vel.size() != joint_vel.size()) {
    throw ShapeError("regularization_reward: previous and current vectors differ in size");
  }
  double da = 0.0, dq = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) da += (prev_action[i] - action[i]) * (prev_action[i] - action[i]);
  for (std::size_t i = 0; i < joint_vel.size(); ++i) {
    const double acc = (prev_joint_vel[i] - joint_vel[i]) / dt;
    dq += acc * acc;
  }
  for (double t : torques) tt += t * t;
  return w.action_rate * da + w.joint_acceleration * dq + w.torque * tt;
}

}  // namespace fld::curriculum
