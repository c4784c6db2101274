#include "fld/signal/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fld/common/error.hpp"

namespace fld::signal {

void SyntheticMotionSpec::validate() const {
  if (!(dt > 0.0)) throw ConfigError("synthetic spec: dt must be positive");
  if (!(base_frequency > 0.0) || !(base_frequency < 0.5 / dt)) {
    throw ConfigError("synthetic spec: base_frequency must lie in (0, 1/(2 dt))");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("synthetic spec: noise_std must be >= 0");
  if (amplitude.empty()) throw ConfigError("synthetic spec: at least one dimension required");
  if (phase_offset.size() != amplitude.size() || mean.size() != amplitude.size()) {
    throw ConfigError("synthetic spec: amplitude, phase_offset and mean must have the same length");
  }
  if (harmonics.empty()) throw ConfigError("synthetic spec: at least one harmonic required");
  if (frames == 0) throw ConfigError("synthetic spec: frames must be positive");
  if (modulation_depth < 0.0 || modulation_depth >= 1.0) throw ConfigError("synthetic spec: modulation_depth must be in [0, 1)");
  if (modulation_depth > 0.0 && !(modulation_rate > 0.0)) {
    throw ConfigError("synthetic spec: modulation_rate must be positive when modulation_depth is set");
  }
}

Trajectory generate_synthetic(const SyntheticMotionSpec& spec) {
  spec.validate();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const std::size_t d = spec.state_dim();
  DenseArray frames({spec.frames, d});
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double tau = static_cast<double>(t) * spec.dt;
    // Cycles elapsed at the fundamental.
    double cycles = spec.base_frequency * tau;
    if (spec.modulation_depth > 0.0) {
      const double w = two_pi * spec.modulation_rate;
      cycles += spec.base_frequency * spec.modulation_depth * (1.0 - std::cos(w * tau)) / w;
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v = spec.mean[j];
      for (std::size_t h = 0; h < spec.harmonics.size(); ++h) {
        const double order = static_cast<double>(h + 1);
        v += spec.amplitude[j] * spec.harmonics[h] * std::sin(two_pi * (order * cycles + spec.phase_offset[j]));
      }
      if (spec.noise_std > 0.0) v += spec.noise_std * noise(rng);
      frames.at(t, j) = v;
    }
  }
  return Trajectory(std::move(frames), spec.dt, spec.label);
}

namespace {

const char* kFamilyLabels[kFamilyCount] = {"step_in_place", "walk", "stride", "jog", "run"};

}  // namespace

SyntheticMotionSpec family_spec(std::size_t family, std::size_t frames, double noise_std, unsigned long long seed,
                                std::size_t state_dim) {
  if (family >= kFamilyCount) throw ConfigError("family_spec: family index must be < 5");
  if (state_dim == 0) throw ConfigError("family_spec: state_dim must be positive");
  SyntheticMotionSpec s;
  s.base_frequency = kFamilyFrequencies[family];
  s.dt = 0.02;
  s.frames = frames;
  s.noise_std = noise_std;
  s.seed = seed;
  s.label = kFamilyLabels[family];
  s.harmonics = {1.0, 0.25};
  s.amplitude.resize(state_dim);
  s.phase_offset.resize(state_dim);
  s.mean.resize(state_dim);

  // Structure depends on the family only, so every seed sees the same gait.
  std::mt19937_64 rng(0x5eedULL + 7919ULL * family);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double k = static_cast<double>(family);
  const double intensity = 1.0 + 0.25 * k;
  for (std::size_t j = 0; j < state_dim; ++j) {
    s.phase_offset[j] = unit(rng);
    const double jitter = 0.75 + 0.5 * unit(rng);
    const double centre = unit(rng) - 0.5;
    if (state_dim != kHumanoidStateDim) {
      s.amplitude[j] = 0.5 * intensity * jitter;
      s.mean[j] = 0.3 * centre + 0.2 * k;
      continue;
    }
    if (j < 3) {  // base linear velocity, m/s
      s.amplitude[j] = 0.1 * intensity * jitter;
      s.mean[j] = j == 0 ? 0.2 + 0.6 * k : 0.05 * centre;
    } else if (j < 6) {  // base angular velocity, rad/s
      s.amplitude[j] = 0.2 * intensity * jitter;
      s.mean[j] = 0.05 * centre;
    } else if (j < 9) {  // projected gravity
      s.amplitude[j] = 0.03 * intensity * jitter;
      s.mean[j] = j == 8 ? -1.0 : 0.02 * centre;
    } else if (j < 19) {  // legs, rad
      s.amplitude[j] = 0.3 * intensity * jitter;
      s.mean[j] = 0.4 * centre;
    } else {  // arms, rad
      s.amplitude[j] = 0.15 * intensity * jitter;
      s.mean[j] = 0.4 * centre;
    }
  }
  return s;
}

std::vector<Trajectory> family_corpus(std::size_t frames, double noise_std, unsigned long long seed,
                                      std::size_t state_dim) {
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < kFamilyCount; ++k) {
    out.push_back(generate_synthetic(family_spec(k, frames, noise_std, seed + k, state_dim)));
  }
  return out;
}

SyntheticMotionSpec heldout_spec(std::size_t family, std::size_t frames, unsigned long long seed, double depth,
                                 std::size_t state_dim) {
  SyntheticMotionSpec s = family_spec(family, frames, 0.0, seed, state_dim);
  s.label += "_heldout";
  s.modulation_depth = depth;
  s.modulation_rate = depth > 0.0 ? 0.1 : 0.0;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> jit(-0.05, 0.05);
  for (double& a : s.amplitude) a *= 1.0 + jit(rng);
  return s;
}

nlohmann::json to_json(const SyntheticMotionSpec& s) {
  return {{"base_frequency", s.base_frequency},
          {"dt", s.dt},
          {"frames", s.frames},
          {"amplitude", s.amplitude},
          {"phase_offset", s.phase_offset},
          {"mean", s.mean},
          {"harmonics", s.harmonics},
          {"noise_std", s.noise_std},
          {"seed", s.seed},
          {"label", s.label},
          {"modulation_depth", s.modulation_depth},
          {"modulation_rate", s.modulation_rate}};
}

SyntheticMotionSpec synthetic_spec_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("family")) {
      SyntheticMotionSpec s = family_spec(j.at("family").get<std::size_t>(), j.value("frames", std::size_t{2000}),
                                          j.value("noise_std", 0.0), j.value("seed", 0ULL),
                                          j.value("state_dim", kHumanoidStateDim));
      if (j.contains("label")) s.label = j.at("label").get<std::string>();
      return s;
    }
    SyntheticMotionSpec s;
    s.base_frequency = j.at("base_frequency").get<double>();
    s.dt = j.value("dt", 0.02);
    s.frames = j.at("frames").get<std::size_t>();
    s.amplitude = j.at("amplitude").get<std::vector<double>>();
    s.phase_offset = j.value("phase_offset", std::vector<double>(s.amplitude.size(), 0.0));
    s.mean = j.value("mean", std::vector<double>(s.amplitude.size(), 0.0));
    s.harmonics = j.value("harmonics", std::vector<double>{1.0});
    s.noise_std = j.value("noise_std", 0.0);
    s.seed = j.value("seed", 0ULL);
    s.label = j.value("label", std::string{});
    s.modulation_depth = j.value("modulation_depth", 0.0);
    s.modulation_rate = j.value("modulation_rate", 0.0);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
}

}  // namespace fld::signal
