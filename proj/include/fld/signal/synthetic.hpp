#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fld/signal/trajectory.hpp"
#include "json.hpp"

namespace fld::signal {

/// Sum-of-harmonics generator. Dimension j at frame t is
///   mean_j + sum_h amplitude_j * harmonics[h-1] * sin(2 pi (h * f_base * t * dt + phase_offset_j)) + noise
/// with gaussian noise drawn from `seed`.
///
/// A non-zero `modulation_depth` makes the signal quasi-periodic: the
/// instantaneous frequency becomes f_base * (1 + depth * sin(2 pi rate t dt))
/// and `h * f_base * t * dt` is replaced by its integral.
struct SyntheticMotionSpec {
  double base_frequency = 1.0;
  double dt = 0.02;
  std::size_t frames = 1000;
  std::vector<double> amplitude;
  std::vector<double> phase_offset;
  std::vector<double> mean;
  std::vector<double> harmonics{1.0};
  double noise_std = 0.0;
  unsigned long long seed = 0;
  std::string label;
  double modulation_depth = 0.0;
  double modulation_rate = 0.0;

  std::size_t state_dim() const { return amplitude.size(); }
  /// Throws ConfigError on an invalid spec.
  void validate() const;
};

Trajectory generate_synthetic(const SyntheticMotionSpec& spec);

inline constexpr std::size_t kFamilyCount = 5;
/// Base frequencies of the preset families, Hz.
inline constexpr double kFamilyFrequencies[kFamilyCount] = {0.8, 1.2, 1.6, 2.0, 2.4};

/// Preset family k in [0, 5): a humanoid-like gait whose forward velocity,
/// joint amplitudes and frequency grow with k. The structural parameters are
/// fixed per family; `seed` only drives the noise.
SyntheticMotionSpec family_spec(std::size_t family, std::size_t frames = 2000, double noise_std = 0.0,
                                unsigned long long seed = 0, std::size_t state_dim = kHumanoidStateDim);

/// The five-family corpus, one trajectory per family.
std::vector<Trajectory> family_corpus(std::size_t frames = 2000, double noise_std = 0.0, unsigned long long seed = 0,
                                      std::size_t state_dim = kHumanoidStateDim);

/// A held-out, quasi-periodic take on a family: same structure, frequency
/// wobbling by `depth` around f_base, amplitudes jittered by a few percent.
SyntheticMotionSpec heldout_spec(std::size_t family, std::size_t frames, unsigned long long seed, double depth = 0.05,
                                 std::size_t state_dim = kHumanoidStateDim);

nlohmann::json to_json(const SyntheticMotionSpec& spec);
SyntheticMotionSpec synthetic_spec_from_json(const nlohmann::json& j);

}  // namespace fld::signal
