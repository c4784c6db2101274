#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fld/curriculum/samplers.hpp"
#include "fld/curriculum/surrogate.hpp"

namespace fld::curriculum {

struct SimConfig {
  SamplerKind sampler = SamplerKind::alpgmm;
  std::size_t iterations = 100;
  std::size_t episodes_per_iteration = 50;
  /// Size of the running target set used for gamma and running performance.
  std::size_t running_window = 1000;
  std::size_t corpus_per_region = 200;
  std::size_t gmm_components = 8;
  std::size_t buffer_capacity = 5000;
  std::size_t offline_capacity = 20000;
  AlpGmmOptions alpgmm;
  std::uint64_t seed = 0;
};

/// One episode.
struct EpisodeRecord {
  std::size_t iteration = 0;
  Theta theta;
  std::vector<double> phi0;
  double performance = 0.0;
  double alp = 0.0;
  /// Exploration factor at the end of the episode's iteration.
  double gamma = 0.0;
  int region = -1;  // -1 outside every region
  bool unlearnable = false;
};

struct IterationSummary {
  std::size_t iteration = 0;
  double running_performance = 0.0;
  double gamma = 0.0;
  /// Share of this iteration's episodes that landed in unlearnable regions.
  double unlearnable_fraction = 0.0;
  /// Sampler refits so far (ALP-GMM only).
  std::size_t updates = 0;
};

struct SimResult {
  SamplerKind sampler = SamplerKind::alpgmm;
  std::uint64_t seed = 0;
  std::string preset;
  std::vector<EpisodeRecord> episodes;
  std::vector<IterationSummary> iterations;

  /// Unlearnable share over the episodes of iterations after `iteration`.
  double unlearnable_fraction_after(std::size_t iteration) const;
  /// Iteration at whose end the n-th refit happened.
  std::optional<std::size_t> iteration_of_update(std::size_t n) const;
  double final_running_performance() const;
};

/// The curriculum loop with the surrogate in place of the tracking learner:
/// per episode sample theta and phi_0 ~ U[-0.5, 0.5)^c (c = dims / 3,
/// at least 1), score, record
/// (theta, r, alp) in the performance buffer; refit the sampler on its
/// schedule. `landscape` is copied and starts with zero competence.
SimResult run_curriculum_sim(const SurrogateLandscape& landscape, const SimConfig& config);

/// Deterministic per seed; one thread per run.
std::vector<SimResult> run_curriculum_seeds(const SurrogateLandscape& landscape, const SimConfig& config,
                                            std::span<const std::uint64_t> seeds, std::size_t threads = 1);

/// Per-episode trace: iteration, sampler, seed, theta..., r, alp, gamma,
/// region_id. The leading comment records the alp scaling used by ALP-GMM.
void write_trace_csv(std::ostream& os, const SimResult& result, const std::vector<int>* oracle_labels = nullptr);
void write_summary_csv(std::ostream& os, std::span<const SimResult> results);

/// Kendall tau-b rank correlation of `values` against their index.
double kendall_tau(std::span<const double> values);

}  // namespace fld::curriculum
