#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fld/curriculum/samplers.hpp"
#include "json.hpp"

namespace fld::curriculum {

/// A ball in theta space standing in for one motion type. Membership goes to
/// the nearest center, so overlapping balls split like Voronoi cells.
struct SurrogateRegion {
  std::string label;
  Theta center;
  double radius = 1.0;
  double max_performance = 1.0;
  bool learnable = true;
  /// Part of the offline reference corpus (frontier regions are not).
  bool reference = true;
  /// A region with a prerequisite only improves once the prerequisite's
  /// competence reaches `unlock` times its maximum.
  std::optional<std::size_t> prerequisite;
  double unlock = 0.0;
};

/// Stand-in for the tracking learner: competence per region that grows with
/// practice.
struct SurrogateLandscape {
  std::string name;
  std::vector<SurrogateRegion> regions;
  double learning_rate = 0.05;
  /// Unlearnable regions never score above this.
  double floor = 0.1;
  /// Their typical score, below the floor.
  double unlearnable_level = 0.05;
  /// Std of the observation noise on every in-region score.
  double noise = 0.01;
  /// Std of corpus points around their region center.
  double corpus_spread = 0.3;
  std::uint64_t seed = 0;
  std::vector<double> competence;

  std::size_t dims() const { return regions.empty() ? 0 : static_cast<std::size_t>(regions[0].center.size()); }
  std::optional<std::size_t> region_of(const Theta& theta) const;
  bool unlocked(std::size_t region) const;
  /// Fraction of reference regions that are unlearnable.
  double unlearnable_fraction() const;
  void reset() { competence.assign(regions.size(), 0.0); }
  /// Throws ConfigError on an inconsistent landscape.
  void validate() const;

  nlohmann::json to_json() const;
  static SurrogateLandscape from_json(const nlohmann::json& j);
};

/// Practice theta once: the containing learnable region (if unlocked) moves
/// its competence by learning_rate * (max - competence); the returned score
/// is competence plus noise, clipped to [0, 1]. Unlearnable regions score
/// at most `floor`; outside every region the score is 0.
double surrogate_step(SurrogateLandscape& landscape, const Theta& theta, std::mt19937_64& rng);

/// Defaults give a 3-feature theta space (one latent channel). Nearest-
/// neighbour learning progress needs a buffer that is dense next to the
/// region size, which 5000 samples cannot give in 24 dimensions.
struct PresetOptions {
  std::size_t dims = 3;
  std::uint64_t seed = 7;
  /// Frontier regions chained outward from every learnable reference.
  std::size_t frontier_depth = 8;
  /// Offset of link g from the corpus mean is (1 + step g) times its root's.
  double frontier_step = 0.15;
  /// Share of uniform confidence-box draws that land in some region; sets
  /// the shared radius.
  double coverage = 0.75;
  double unlock = 0.7;
  double noise = 0.01;
};

/// Preset with 10 reference regions of which `unlearnable_percent` (0, 10 or
/// 60) are unlearnable, plus the frontier chains.
SurrogateLandscape make_preset(int unlearnable_percent, const PresetOptions& options = {});

/// Reference-region samples: center + N(0, corpus_spread^2 I). Labels are
/// region indices when requested.
Points offline_corpus(const SurrogateLandscape& landscape, std::size_t per_region, std::mt19937_64& rng,
                      std::vector<int>* labels = nullptr);

}  // namespace fld::curriculum
